"""Complete solver for path conditions over input bytes.

Depth-first search over byte domains with bounds propagation on the linear
rows. Once the remaining search space is small enough it is enumerated in one
vectorised pass, which is also how ``!=`` and nonlinear atoms get decided.
``Unsat`` is only reported after the whole space has been refuted.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional

import numpy as np

from .bounds import byte_domains, linear_rows, propagate
from .linear import Atom, PathCondition, eval_atom_np

log = logging.getLogger(__name__)

SAT = "Sat"
UNSAT = "Unsat"
UNKNOWN = "Unknown"

GRID_LIMIT = 1 << 17
MAX_NONLINEAR_DIM = 3


@dataclass(frozen=True)
class SolveBudget:
    max_steps: int = 1 << 24
    max_seconds: Optional[float] = 0.05


@dataclass
class SolveResult:
    status: str
    model: Optional[Dict[int, int]] = None
    steps: int = 0
    reason: str = ""

    @property
    def sat(self) -> bool:
        return self.status == SAT


class _OutOfBudget(Exception):
    pass


class _Search:
    def __init__(self, pc: PathCondition, budget: SolveBudget, hint: Mapping[int, int]):
        self.atoms: List[Atom] = list(pc.atoms)
        self.rows = linear_rows(self.atoms)
        self.budget = budget
        self.hint = hint
        self.steps = 0
        self.deadline = None if budget.max_seconds is None else time.perf_counter() + budget.max_seconds

    def charge(self, n: int = 1) -> None:
        self.steps += n
        if self.steps > self.budget.max_steps:
            raise _OutOfBudget("step budget")
        if self.deadline is not None and time.perf_counter() > self.deadline:
            raise _OutOfBudget("time budget")

    def grid(self, lo: Dict[int, int], hi: Dict[int, int]) -> Optional[Dict[int, int]]:
        free = [v for v in lo if lo[v] < hi[v]]
        axes = [np.arange(lo[v], hi[v] + 1, dtype=np.uint64) for v in free]
        if axes:
            mesh = np.meshgrid(*axes, indexing="ij")
            cols = {v: m.ravel() for v, m in zip(free, mesh)}
            n = cols[free[0]].shape[0]
        else:
            cols, n = {}, 1
        self.charge(n)
        for v in lo:
            if v not in cols:
                cols[v] = np.full(n, lo[v], dtype=np.uint64)
        ok = np.ones(n, dtype=bool)
        for a in self.atoms:
            valid = np.ones(n, dtype=bool)
            ok &= eval_atom_np(a, cols, valid)
            if not ok.any():
                return None
        idx = np.flatnonzero(ok)
        if self.hint:
            dist = np.zeros(idx.shape[0], dtype=np.int64)
            for v in free:
                h = self.hint.get(v)
                if h is not None:
                    dist += np.abs(cols[v][idx].astype(np.int64) - int(h))
            pick = int(idx[int(np.argmin(dist))])
        else:
            pick = int(idx[0])
        return {v: int(cols[v][pick]) for v in lo}

    def dfs(self, lo: Dict[int, int], hi: Dict[int, int]) -> Optional[Dict[int, int]]:
        self.charge()
        if not propagate(self.rows, lo, hi):
            return None
        size = 1
        for v in lo:
            size *= hi[v] - lo[v] + 1
            if size > GRID_LIMIT:
                break
        if size <= GRID_LIMIT:
            return self.grid(lo, hi)
        # branch on the smallest open domain, trying the hint value first
        var = min((v for v in lo if lo[v] < hi[v]), key=lambda v: (hi[v] - lo[v], v))
        a, b = lo[var], hi[var]
        h = min(max(int(self.hint.get(var, a)), a), b)
        for sub in _children(a, b, h):
            lo2, hi2 = dict(lo), dict(hi)
            lo2[var], hi2[var] = sub
            found = self.dfs(lo2, hi2)
            if found is not None:
                return found
        return None


def _children(a: int, b: int, h: int):
    """Partition [a, b]: the hint point, then halves ordered by distance to it."""
    if a <= h <= b:
        yield (h, h)
        parts = [(a, h - 1), (h + 1, b)]
    else:
        mid = (a + b) // 2
        parts = [(a, mid), (mid + 1, b)]
    parts = [p for p in parts if p[0] <= p[1]]
    parts.sort(key=lambda p: min(abs(p[0] - h), abs(p[1] - h)))
    for lo, hi in parts:
        if lo == hi:
            yield (lo, hi)
            continue
        mid = (lo + hi) // 2
        halves = [(lo, mid), (mid + 1, hi)]
        halves.sort(key=lambda p: min(abs(p[0] - h), abs(p[1] - h)))
        yield from halves


def solve(
    pc: PathCondition,
    budget: Optional[SolveBudget] = None,
    hint: Optional[Mapping[int, int]] = None,
) -> SolveResult:
    """Decide ``pc``. Models are as close to ``hint`` as the search finds cheaply."""
    budget = budget or SolveBudget()
    search = _Search(pc, budget, hint or {})
    vars_ = pc.vars
    if not vars_:
        ok = all(a.holds({}) for a in pc.atoms)
        return SolveResult(SAT if ok else UNSAT, {} if ok else None, 1)
    lo, hi = byte_domains(vars_)
    if not propagate(search.rows, lo, hi):
        return SolveResult(UNSAT, None, 1, "linear bounds")
    nl_vars = {v for a in pc.nonlinear_atoms for v in a.support if lo[v] < hi[v]}
    if len(nl_vars) > MAX_NONLINEAR_DIM:
        return SolveResult(UNKNOWN, None, 1, f"nonlinear support of {len(nl_vars)} variables")
    try:
        model = search.dfs(lo, hi)
    except _OutOfBudget as e:
        return SolveResult(UNKNOWN, None, search.steps, str(e))
    if model is None:
        return SolveResult(UNSAT, None, search.steps)
    if not pc.holds(model):  # pragma: no cover - grid evaluation checks every atom
        log.error("solver produced a model that does not satisfy its path condition")
        return SolveResult(UNKNOWN, None, search.steps, "model verification failed")
    return SolveResult(SAT, model, search.steps)
