"""Coverage-guided fuzzing loop: seed pool, admission and crash bookkeeping."""

from __future__ import annotations

import logging
import random
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Callable, Deque, Dict, List, Optional, Set, Tuple

from ..ir.interp import BUDGET, DEFAULT_STEP_BUDGET, Trace, execute
from ..ir.program import TargetProgram
from .bitmap import DEFAULT_BITMAP_SIZE, CoverageBitmap, EdgeHasher
from .mutate import mutate

log = logging.getLogger(__name__)

INITIAL = "Initial"
FUZZ = "FuzzMutation"
SOLVE = "Solve"
SAMPLE = "Sample"
ORIGINS = (INITIAL, FUZZ, SOLVE, SAMPLE)

CrashKey = Tuple[str, Tuple[str, ...]]


@dataclass
class Seed:
    id: int
    data: bytes
    parent: Optional[int]
    origin: str
    path_hash: str
    discovered_at: float
    # produced at a branch that the LOB filter would have pruned
    retrieved: bool = False
    site: Optional[int] = None
    crash_key: Optional[CrashKey] = None
    in_pool: bool = True

    def __post_init__(self):
        if self.origin not in ORIGINS:
            raise ValueError(f"unknown origin {self.origin!r}")
        if (self.origin == INITIAL) != (self.parent is None):
            raise ValueError("origin Initial iff parent absent")


@dataclass
class CrashRecord:
    seed_id: int
    kind: str
    frames: Tuple[str, ...]
    found_at: float

    @property
    def key(self) -> CrashKey:
        return (self.kind, self.frames)


@dataclass
class FuzzStats:
    execs: int = 0
    seeds_admitted: int = 0
    imported: int = 0
    imports_admitted: int = 0
    budget_exceeded: int = 0
    crashes: List[CrashRecord] = field(default_factory=list)


@dataclass
class FuzzStepResult:
    trace: Trace
    new_seed: Optional[Seed] = None
    crash: Optional[CrashRecord] = None


class Fuzzer:
    """Single-owner fuzzing state. Not thread-safe; wrap it in a worker."""

    def __init__(
        self,
        program: TargetProgram,
        rng_seed: int = 0,
        bitmap_size: int = DEFAULT_BITMAP_SIZE,
        step_budget: int = DEFAULT_STEP_BUDGET,
        clock: Optional[Callable[[], float]] = None,
        corpus=None,
    ):
        self.program = program
        self.rng = random.Random(rng_seed)
        self.hasher = EdgeHasher(program, bitmap_size)
        self.bitmap = CoverageBitmap(bitmap_size)
        self.step_budget = step_budget
        self.clock = clock or (lambda: 0.0)
        self.corpus = corpus
        self.pool: List[Seed] = []
        self.lineage: Dict[int, Seed] = {}
        self.crash_index: Dict[CrashKey, CrashRecord] = {}
        self.stats = FuzzStats()
        self.branch_hits: Counter = Counter()
        self.covered_edges: Set[Tuple[int, int]] = set()
        self.sync_mark = -1
        self._schedule: Deque[Seed] = deque()
        self._next_id = 0

    # bookkeeping -------------------------------------------------------------

    def _new_id(self) -> int:
        i = self._next_id
        self._next_id += 1
        return i

    def _run(self, data: bytes) -> Tuple[Trace, Dict[int, int]]:
        trace = execute(self.program, data, self.step_budget)
        self.stats.execs += 1
        if trace.outcome == BUDGET:
            self.stats.budget_exceeded += 1
        hit = trace.edges_hit
        self.covered_edges.update(hit)
        self.branch_hits.update(trace.branch_decisions)
        return trace, self.hasher.cell_counts(hit)

    def _record_crash(self, trace: Trace, seed: Seed) -> Optional[CrashRecord]:
        key = trace.crash_key()
        if key in self.crash_index:
            return None
        rec = CrashRecord(seed.id, key[0], key[1], seed.discovered_at)
        self.crash_index[key] = rec
        self.stats.crashes.append(rec)
        if self.corpus is not None:
            self.corpus.save_crash(rec, seed.data)
        log.debug("new crash %s via seed %d (%s)", key, seed.id, seed.origin)
        return rec

    def _admit(self, seed: Seed) -> None:
        self.pool.append(seed)
        self.stats.seeds_admitted += 1
        if self.corpus is not None:
            self.corpus.save_seed(seed)

    def _make_seed(self, data: bytes, parent, origin, trace: Trace, **extra) -> Seed:
        seed = Seed(self._new_id(), bytes(data), parent, origin, trace.path_hash, self.clock(), **extra)
        self.lineage[seed.id] = seed
        return seed

    # public API --------------------------------------------------------------

    def add_initial(self, data: bytes) -> Seed:
        if len(data) != self.program.input_len:
            raise ValueError("initial seed has wrong length")
        trace, cells = self._run(data)
        self.bitmap.update(cells)
        seed = self._make_seed(data, None, INITIAL, trace)
        if trace.crashed:
            seed.crash_key = trace.crash_key()
            self._record_crash(trace, seed)
        self._admit(seed)
        return seed

    def _next_seed(self) -> Seed:
        if not self._schedule:
            cycle: List[Seed] = []
            for s in self.pool:
                cycle.append(s)
                if s.id > self.sync_mark:
                    cycle.append(s)
            self._schedule.extend(cycle)
        return self._schedule.popleft()

    def fuzz_step(self) -> FuzzStepResult:
        if not self.pool:
            raise RuntimeError("seed pool is empty")
        parent = self._next_seed()
        pool = self.pool
        child = mutate(parent.data, self.rng, lambda: self.rng.choice(pool).data)
        trace, cells = self._run(child)
        if trace.crashed:
            if trace.crash_key() in self.crash_index:
                return FuzzStepResult(trace)
            seed = self._make_seed(child, parent.id, FUZZ, trace, crash_key=trace.crash_key(), in_pool=False)
            return FuzzStepResult(trace, crash=self._record_crash(trace, seed))
        if not self.bitmap.update(cells):
            return FuzzStepResult(trace)
        seed = self._make_seed(child, parent.id, FUZZ, trace)
        self._admit(seed)
        return FuzzStepResult(trace, new_seed=seed)

    def import_seed(
        self,
        data: bytes,
        origin: str,
        parent: int,
        site: Optional[int] = None,
        retrieved: bool = False,
    ) -> Tuple[bool, Trace]:
        """Execute an externally generated input and keep it if it is novel."""
        if len(data) != self.program.input_len:
            raise ValueError(f"imported input has {len(data)} bytes, expected {self.program.input_len}")
        if origin not in (SOLVE, SAMPLE):
            raise ValueError("imports must come from Solve or Sample")
        self.stats.imported += 1
        trace, cells = self._run(data)
        if trace.crashed:
            if trace.crash_key() in self.crash_index:
                return False, trace
            seed = self._make_seed(data, parent, origin, trace, site=site, retrieved=retrieved,
                                   crash_key=trace.crash_key(), in_pool=False)
            self._record_crash(trace, seed)
            self.stats.imports_admitted += 1
            return True, trace
        if not self.bitmap.update(cells):
            return False, trace
        seed = self._make_seed(data, parent, origin, trace, site=site, retrieved=retrieved)
        self._admit(seed)
        self.stats.imports_admitted += 1
        return True, trace

    def seeds_since(self, mark: int) -> List[Seed]:
        """Pool seeds with id above ``mark``, in admission order."""
        return [s for s in self.pool if s.id > mark]

    def note_sync(self) -> int:
        """Close the current synchronization window; returns its upper id."""
        self.sync_mark = self._next_id - 1
        return self.sync_mark

    def hit_counts(self) -> Dict[Tuple[int, bool], int]:
        return dict(self.branch_hits)

    @property
    def edge_coverage(self) -> int:
        return len(self.covered_edges)
