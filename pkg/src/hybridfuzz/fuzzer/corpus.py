"""On-disk corpus: ``queue/`` for admitted seeds, ``crashes/`` for unique crashes."""

from __future__ import annotations

import os
import re
import tempfile
from pathlib import Path
from typing import Iterator, Tuple

_UNSAFE = re.compile(r"[^A-Za-z0-9_.-]")


def atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def crash_file_name(kind: str, frames: Tuple[str, ...]) -> str:
    return _UNSAFE.sub("_", f"{kind}__{'-'.join(frames)}") + ".bin"


class CorpusDir:
    def __init__(self, root: os.PathLike):
        self.root = Path(root)
        self.queue = self.root / "queue"
        self.crashes = self.root / "crashes"
        self.queue.mkdir(parents=True, exist_ok=True)
        self.crashes.mkdir(parents=True, exist_ok=True)

    def save_seed(self, seed) -> Path:
        path = self.queue / f"id_{seed.id:06d}_{seed.origin}.bin"
        if not path.exists():
            atomic_write(path, seed.data)
        return path

    def save_crash(self, record, data: bytes) -> Path:
        path = self.crashes / crash_file_name(record.kind, record.frames)
        if not path.exists():
            atomic_write(path, data)
        return path

    def iter_queue(self) -> Iterator[Tuple[str, bytes]]:
        for p in sorted(self.queue.glob("id_*.bin")):
            yield p.name, p.read_bytes()

    def iter_crashes(self) -> Iterator[Tuple[str, bytes]]:
        for p in sorted(self.crashes.glob("*.bin")):
            yield p.name, p.read_bytes()
