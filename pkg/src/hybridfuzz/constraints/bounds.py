"""Interval bounds propagation over linear byte constraints."""

from __future__ import annotations

from collections import deque
from typing import Dict, Iterable, List, Sequence, Tuple

from .linear import BYTE_MAX, Atom

# sum(c * x) + const <= 0
Row = Tuple[Tuple[int, ...], Tuple[int, ...], int]


def _row(coeffs: Dict[int, int], const: int) -> Row:
    return tuple(coeffs), tuple(coeffs.values()), const


def atom_rows(atom: Atom) -> List[Row]:
    """Translate one linear atom into ``<= 0`` rows. ``!=`` yields none."""
    lhs = atom.lhs
    pos, neg = dict(lhs.coeffs), {v: -c for v, c in lhs.coeffs.items()}
    rel = atom.rel
    if rel == "<=":
        return [_row(pos, lhs.const)]
    if rel == "<":
        return [_row(pos, lhs.const + 1)]
    if rel == ">=":
        return [_row(neg, -lhs.const)]
    if rel == ">":
        return [_row(neg, -lhs.const + 1)]
    if rel == "==":
        return [_row(pos, lhs.const), _row(neg, -lhs.const)]
    return []


def linear_rows(atoms: Iterable[Atom]) -> List[Row]:
    rows: List[Row] = []
    for a in atoms:
        if a.is_linear:
            rows.extend(atom_rows(a))
    return rows


def _floordiv(a: int, b: int) -> int:
    return a // b


def _ceildiv(a: int, b: int) -> int:
    return -((-a) // b)


def propagate(rows: Sequence[Row], lo: Dict[int, int], hi: Dict[int, int], max_rounds: int = 100_000) -> bool:
    """Tighten ``lo``/``hi`` in place to bounds consistency. False on contradiction."""
    watch: Dict[int, List[int]] = {}
    for i, (vs, _, _) in enumerate(rows):
        for v in vs:
            watch.setdefault(v, []).append(i)
    pending = deque(range(len(rows)))
    queued = [True] * len(rows)
    rounds = 0
    while pending:
        rounds += 1
        if rounds > max_rounds:
            break
        i = pending.popleft()
        queued[i] = False
        vs, cs, k = rows[i]
        mins = [c * lo[v] if c > 0 else c * hi[v] for v, c in zip(vs, cs)]
        total = k + sum(mins)
        if total > 0:
            return False
        for v, c, m in zip(vs, cs, mins):
            slack = -(total - m)  # c * x_v <= slack
            if c > 0:
                nb = _floordiv(slack, c)
                if nb < hi[v]:
                    if nb < lo[v]:
                        return False
                    hi[v] = nb
                    changed = True
                else:
                    changed = False
            else:
                nb = _ceildiv(slack, c)
                if nb > lo[v]:
                    if nb > hi[v]:
                        return False
                    lo[v] = nb
                    changed = True
                else:
                    changed = False
            if changed:
                for j in watch[v]:
                    if j != i and not queued[j]:
                        queued[j] = True
                        pending.append(j)
    return True


def byte_domains(vars_: Iterable[int]) -> Tuple[Dict[int, int], Dict[int, int]]:
    vs = list(vars_)
    return {v: 0 for v in vs}, {v: BYTE_MAX for v in vs}
