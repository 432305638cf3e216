"""Bundled fixture targets."""

from __future__ import annotations

import os
from pathlib import Path
from typing import List

from ..ir import TargetProgram, load_program

TARGET_DIR = Path(__file__).resolve().parent.parent / "targets"


def bundled_targets() -> List[str]:
    return sorted(p.stem for p in TARGET_DIR.glob("*.tgt"))


def resolve_target(name: str) -> Path:
    """A path to an existing file, or the name of a bundled fixture (with or without .tgt)."""
    p = Path(name)
    if p.is_file():
        return p
    stem = p.name[:-4] if p.name.endswith(".tgt") else p.name
    bundled = TARGET_DIR / f"{stem}.tgt"
    if bundled.is_file():
        return bundled
    raise FileNotFoundError(f"no target file {name!r} and no bundled fixture named {stem!r}")


def load_target(name: str) -> TargetProgram:
    return load_program(os.fspath(resolve_target(name)))
