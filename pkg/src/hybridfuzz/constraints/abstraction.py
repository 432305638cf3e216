"""Geometric over-approximations of a path condition's solution set.

``Polytope`` keeps every linear inequality (equalities as pairs) plus byte
bounds; ``Box`` keeps only per-variable intervals obtained by propagation.
Both drop ``!=`` and nonlinear atoms, so neither ever excludes a solution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

from .bounds import Row, atom_rows, byte_domains, propagate
from .linear import BYTE_MAX, PathCondition


def _tighten(row: Row) -> Row:
    """Divide an integer row by the gcd of its coefficients (floor on the bound)."""
    vs, cs, k = row
    g = reduce(math.gcd, (abs(c) for c in cs), 0)
    if g <= 1:
        return row
    # sum(c x) <= -k  ->  sum(c/g x) <= floor(-k / g)
    return vs, tuple(c // g for c in cs), -((-k) // g)


@dataclass
class Polytope:
    """``{x : A x <= b}`` over ``vars`` with integer rows kept exactly."""

    vars: Tuple[int, ...]
    rows: List[Row] = field(default_factory=list)
    eq_rows: List[Row] = field(default_factory=list)
    feasible: bool = True

    @property
    def dim(self) -> int:
        return len(self.vars)

    def _all_rows(self) -> List[Row]:
        out = list(self.rows)
        for vs, cs, k in self.eq_rows:
            out.append((vs, cs, k))
            out.append((vs, tuple(-c for c in cs), -k))
        for v in self.vars:
            out.append(((v,), (-1,), 0))
            out.append(((v,), (1,), -BYTE_MAX))
        return out

    @property
    def A(self) -> np.ndarray:
        col = {v: i for i, v in enumerate(self.vars)}
        rows = self._all_rows()
        A = np.zeros((len(rows), len(self.vars)))
        for r, (vs, cs, _) in enumerate(rows):
            for v, c in zip(vs, cs):
                A[r, col[v]] += c
        return A

    @property
    def b(self) -> np.ndarray:
        return np.array([-float(k) for _, _, k in self._all_rows()])

    def contains(self, point: Mapping[int, float], tol: float = 0.0) -> bool:
        for vs, cs, k in self._all_rows():
            if sum(c * point[v] for v, c in zip(vs, cs)) + k > tol:
                return False
        return True


@dataclass
class Box:
    vars: Tuple[int, ...]
    lo: Dict[int, int] = field(default_factory=dict)
    hi: Dict[int, int] = field(default_factory=dict)
    feasible: bool = True

    @property
    def dim(self) -> int:
        return len(self.vars)

    def contains(self, point: Mapping[int, int]) -> bool:
        return all(self.lo[v] <= point[v] <= self.hi[v] for v in self.vars)

    def volume(self) -> int:
        out = 1
        for v in self.vars:
            out *= self.hi[v] - self.lo[v] + 1
        return out


def polyhedral_abstraction(pc: PathCondition) -> Polytope:
    vars_ = pc.vars
    poly = Polytope(vars_)
    for atom in pc.linear_atoms:
        if atom.rel == "==":
            lhs = atom.lhs
            g = reduce(math.gcd, (abs(c) for c in lhs.coeffs.values()), 0)
            if (g > 1 and lhs.const % g) or (g == 0 and lhs.const != 0):
                poly.feasible = False
            poly.eq_rows.append((tuple(lhs.coeffs), tuple(lhs.coeffs.values()), lhs.const))
        else:
            poly.rows.extend(_tighten(r) for r in atom_rows(atom))
    if not poly.feasible or not vars_:
        return poly
    lo, hi = byte_domains(vars_)
    if not propagate(poly._all_rows(), lo, hi):
        poly.feasible = False
        return poly
    res = linprog(np.zeros(len(vars_)), A_ub=poly.A, b_ub=poly.b, bounds=(None, None), method="highs")
    poly.feasible = res.status == 0
    return poly


def interval_abstraction(pc: PathCondition) -> Box:
    vars_ = pc.vars
    lo, hi = byte_domains(vars_)
    rows: List[Row] = []
    for atom in pc.linear_atoms:
        rows.extend(atom_rows(atom))
    ok = propagate(rows, lo, hi)
    return Box(vars_, lo, hi, feasible=ok)
