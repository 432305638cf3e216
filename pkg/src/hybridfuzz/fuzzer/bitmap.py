"""Shared edge bitmap with AFL-style hit-count buckets."""

from __future__ import annotations

from collections import Counter
from typing import Dict, Iterable, Mapping, Tuple

import numpy as np

from ..ir.program import TargetProgram

DEFAULT_BITMAP_SIZE = 1 << 16

# representative hit counts of each bucket class
BUCKET_CLASSES = (1, 2, 3, 4, 8, 16, 32, 128)


def bucket_bit(count: int) -> int:
    """One-hot bucket bit for a positive hit count (0 for count 0)."""
    if count <= 0:
        return 0
    if count <= 3:
        return 1 << (count - 1)
    if count <= 7:
        return 8
    if count <= 15:
        return 16
    if count <= 31:
        return 32
    if count <= 127:
        return 64
    return 128


def edge_cell(src_loc: int, dst_loc: int, size: int) -> int:
    return ((src_loc >> 1) ^ dst_loc) % size


class CoverageBitmap:
    """Per-cell union of bucket bits seen so far.

    ``cells[i]`` is a bit set over the eight bucket classes, so a new bucket
    is any bit not yet present. Cells only ever gain bits.
    """

    def __init__(self, size: int = DEFAULT_BITMAP_SIZE):
        if size <= 0 or size & (size - 1):
            raise ValueError("bitmap size must be a power of two")
        self.size = size
        self.cells = np.zeros(size, dtype=np.uint8)

    def classify(self, cell_counts: Mapping[int, int]) -> Dict[int, int]:
        return {cell: bucket_bit(n) for cell, n in cell_counts.items()}

    def has_new_bits(self, cell_counts: Mapping[int, int]) -> bool:
        cells = self.cells
        for cell, n in cell_counts.items():
            if not cells[cell] & bucket_bit(n):
                return True
        return False

    def update(self, cell_counts: Mapping[int, int]) -> bool:
        """Merge one execution's counts; True iff any new bucket appeared."""
        new = False
        cells = self.cells
        for cell, n in cell_counts.items():
            bit = bucket_bit(n)
            if not cells[cell] & bit:
                cells[cell] |= bit
                new = True
        return new

    def mark(self, cell: int, bit: int = 1) -> None:
        self.cells[cell] |= bit

    def occupied(self) -> set:
        """Set of (cell, bucket bit) pairs seen so far."""
        out = set()
        for cell in np.flatnonzero(self.cells):
            v = int(self.cells[cell])
            for k in range(8):
                if v >> k & 1:
                    out.add((int(cell), 1 << k))
        return out

    def density(self) -> float:
        return float(np.count_nonzero(self.cells)) / self.size


class EdgeHasher:
    """Maps ICFG edges of one program to bitmap cells (memoised)."""

    def __init__(self, program: TargetProgram, size: int = DEFAULT_BITMAP_SIZE):
        self.locs = [b.loc for b in program.blocks]
        self.size = size
        self._cache: Dict[Tuple[int, int], int] = {}

    def cell(self, edge: Tuple[int, int]) -> int:
        c = self._cache.get(edge)
        if c is None:
            c = edge_cell(self.locs[edge[0]], self.locs[edge[1]], self.size)
            self._cache[edge] = c
        return c

    def cell_counts(self, edges_hit: Mapping[Tuple[int, int], int]) -> Dict[int, int]:
        out: Dict[int, int] = {}
        for edge, n in edges_hit.items():
            c = self.cell(edge)
            out[c] = out.get(c, 0) + n
        return out
