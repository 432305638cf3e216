"""Shared helpers for the acceptance suite: result lines and cached campaigns."""

from __future__ import annotations

import functools
from typing import Dict

from hybridfuzz.config import EngineConfig
from hybridfuzz.coordinator import run_campaign
from hybridfuzz.harness.targets import load_target

RESULTS: Dict[int, str] = {}

TRIAL_SEEDS = (1, 2, 3, 4, 5)


def record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[n] = line
    print(line)


@functools.lru_cache(maxsize=None)
def program(name: str):
    return load_target(name)


@functools.lru_cache(maxsize=None)
def campaign(target: str, mode: str, seed: int, budget: float, max_execs=None) -> dict:
    cfg = EngineConfig(mode=mode, budget=budget, seed=seed, max_execs=max_execs, lockstep=True)
    return run_campaign(program(target), cfg).report
