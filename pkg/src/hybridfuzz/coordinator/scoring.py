"""Fuzzing difficulty and future reward of open branches."""

from __future__ import annotations

import math
from typing import Dict, FrozenSet, Iterable, Mapping, Sequence, Set, Tuple

import numpy as np

from ..ir.icfg import ICFG

REWARD_SCALE = 1000.0


def local_probability(cov_br: int, cov_opp: int) -> float:
    """Chance that random inputs reaching a conditional take ``br``.

    With no hits on ``br`` the rule of three gives ``1 / cov_opp``.
    """
    if cov_br > 0:
        return cov_br / (cov_br + cov_opp)
    if cov_opp <= 0:
        raise ValueError("branch never reached: both hit counts are zero")
    return 1.0 / cov_opp


def log_local_probability(cov_br: int, cov_opp: int) -> float:
    if cov_br > 0:
        # log1p keeps full relative accuracy when cov_opp << cov_br
        return -math.log1p(cov_opp / cov_br)
    if cov_opp <= 0:
        raise ValueError("branch never reached: both hit counts are zero")
    return -math.log(cov_opp)


def fuzzing_difficulty(path: Sequence[Tuple[int, int]]) -> float:
    """Product of local probabilities along ``(cov_br, cov_opp)`` pairs."""
    return math.exp(log_fuzzing_difficulty(path))


def log_fuzzing_difficulty(path: Sequence[Tuple[int, int]]) -> float:
    return math.fsum(log_local_probability(a, b) for a, b in path)


def normalize_difficulty(D: float, p_min: float) -> float:
    """``log D / log p_min``; 0 when ``p_min`` is 1 (every open branch is certain)."""
    if not 0.0 < p_min <= 1.0 or not 0.0 < D <= 1.0:
        raise ValueError("probabilities must lie in (0, 1]")
    return normalize_log_difficulty(math.log(D), math.log(p_min))


def normalize_log_difficulty(log_d: float, log_p_min: float) -> float:
    if log_p_min == 0.0:
        return 0.0
    return log_d / log_p_min


def normalize_reward(R: float) -> float:
    return R / REWARD_SCALE


def priority(norm_d: float, R: float, lam: float) -> float:
    return lam * norm_d + (1.0 - lam) * normalize_reward(R)


class BranchStats:
    """Per (site, direction) hit counts plus the set of covered blocks."""

    def __init__(self, hits: Mapping[Tuple[int, bool], int] = None, covered_blocks: Iterable[int] = ()):
        self.hits: Dict[Tuple[int, bool], int] = dict(hits or {})
        self.covered: Set[int] = set(covered_blocks)

    def cov(self, site: int, taken: bool) -> int:
        return self.hits.get((site, taken), 0)

    def log_p(self, site: int, taken: bool) -> float:
        return log_local_probability(self.cov(site, taken), self.cov(site, not taken))


class RewardIndex:
    """Uncovered-line reward of ICFG blocks, memoised per coverage snapshot."""

    def __init__(self, icfg: ICFG):
        self.icfg = icfg
        p = icfg.program
        self.program = p
        # function -> functions transitively callable from its entry (including itself)
        self.call_closure: Dict[str, FrozenSet[str]] = {}
        direct = {name: icfg.reachable_functions[fn.blocks[0].gid] for name, fn in p.functions.items()}
        for name in p.functions:
            seen = {name}
            stack = [name]
            while stack:
                f = stack.pop()
                for g in direct[f]:
                    if g not in seen:
                        seen.add(g)
                        stack.append(g)
            self.call_closure[name] = frozenset(seen)
        self._reach_gids: Dict[int, Tuple[int, ...]] = {}
        self._cache: Dict[int, int] = {}
        self._covered_version: FrozenSet[int] = frozenset()

    def reachable_blocks(self, gid: int) -> Tuple[int, ...]:
        """Blocks reachable from ``gid`` without returning to a caller."""
        out = self._reach_gids.get(gid)
        if out is not None:
            return out
        p, g = self.program, self.icfg
        b = p.blocks[gid]
        fn = p.functions[b.fn]
        blocks = {fn.blocks[j].gid for j in np.flatnonzero(g.reach[b.fn][b.index])}
        funcs: Set[str] = set()
        for callee in g.reachable_functions[gid]:
            funcs |= self.call_closure[callee]
        for f in funcs:
            callee = p.functions[f]
            blocks.update(callee.blocks[j].gid for j in np.flatnonzero(g.reach[f][0]))
        out = tuple(sorted(blocks))
        self._reach_gids[gid] = out
        return out

    def set_covered(self, covered: Iterable[int]) -> None:
        cov = frozenset(covered)
        if cov != self._covered_version:
            self._covered_version = cov
            self._cache.clear()

    def reward(self, gid: int) -> int:
        r = self._cache.get(gid)
        if r is None:
            cov = self._covered_version
            blocks = self.program.blocks
            r = sum(blocks[x].line_count for x in self.reachable_blocks(gid) if x not in cov)
            self._cache[gid] = r
        return r


def future_reward(icfg: ICFG, target_gid: int, covered_blocks: Iterable[int], index: RewardIndex = None) -> int:
    index = index or RewardIndex(icfg)
    index.set_covered(covered_blocks)
    return index.reward(target_gid)
