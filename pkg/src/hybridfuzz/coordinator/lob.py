"""Local-opposite-branch pruning baseline.

A branch is explored only if the bitmap cell of its taken edge gains a new
hit-count bucket in the filter's own bitmap. Exploring marks the taken edge
and the opposite edge with that bucket, so every later encounter of the same
branch (or of anything hashing to the same cells) is pruned regardless of
the path prefix that led there.
"""

from __future__ import annotations

from typing import Dict, List, Sequence, Tuple

from ..fuzzer.bitmap import CoverageBitmap, EdgeHasher, bucket_bit
from ..ir.icfg import ICFG

EXPLORE = "Explore"
PRUNE = "Prune"


class LobFilter:
    def __init__(self, icfg: ICFG, bitmap_size: int = 1 << 16):
        self.icfg = icfg
        self.hasher = EdgeHasher(icfg.program, bitmap_size)
        self.bitmap = CoverageBitmap(bitmap_size)

    def decide(self, site: int, taken: bool, count: int) -> str:
        """Filter one branch execution; ``count`` is the taken edge's hit count so far."""
        edge = (site, self.icfg.successor(site, taken))
        bit = bucket_bit(count)
        cell = self.hasher.cell(edge)
        if self.bitmap.cells[cell] & bit:
            return PRUNE
        opposite = (site, self.icfg.successor(site, not taken))
        self.bitmap.mark(cell, bit)
        self.bitmap.mark(self.hasher.cell(opposite), bit)
        return EXPLORE

    def filter_path(self, decisions: Sequence[Tuple[int, bool]]) -> List[str]:
        counts: Dict[Tuple[int, bool], int] = {}
        out: List[str] = []
        for site, taken in decisions:
            k = counts.get((site, taken), 0) + 1
            counts[(site, taken)] = k
            out.append(self.decide(site, taken, k))
        return out

    def explore_ordinals(self, decisions: Sequence[Tuple[int, bool]]) -> List[int]:
        return [i for i, d in enumerate(self.filter_path(decisions)) if d == EXPLORE]


def lob_mode_filter(lob: LobFilter, site: int, taken: bool, count: int = 1) -> str:
    return lob.decide(site, taken, count)
