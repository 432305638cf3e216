"""Approximately uniform sampling from polytopes and boxes.

The polytope sampler first removes equality constraints and fixed variables
by substitution, then runs hit-and-run inside the remaining full-dimensional
body. Each step length is capped by the Dikin ellipsoid at the current point
and Metropolis-corrected, so the uniform distribution stays stationary while
steps near the boundary remain short. Every sample is the endpoint of its own
chain started at the Chebyshev centre; the chains run side by side as one
vectorised walk, so samples are independent.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import linprog

from .abstraction import Box, Polytope
from .bounds import byte_domains, propagate
from .linear import BYTE_MAX

log = logging.getLogger(__name__)

DEFAULT_POLY_SAMPLES = 300
DEFAULT_BOX_SAMPLES = 150
DIKIN_RADIUS = 3.0
# moves per chain; every returned point ends its own chain
WALK_BASE_STEPS = 100
MIN_INTERIOR_RADIUS = 1e-7


class DegeneratePolytope(ValueError):
    """The polytope has no interior to walk in."""


class InfeasibleAbstraction(ValueError):
    pass


@dataclass
class SampleBatch:
    # points before rounding, one row per walk sample, columns = polytope vars
    raw: np.ndarray
    points: List[Dict[int, int]] = field(default_factory=list)
    rejected: int = 0

    def __len__(self) -> int:
        return len(self.points)


# affine map: dependent var -> (const, {free var: coeff})
Affine = Tuple[Fraction, Dict[int, Fraction]]


def _eliminate(poly: Polytope) -> Tuple[List[int], Dict[int, Affine], List[Tuple[Dict[int, Fraction], Fraction]]]:
    """Substitute away equalities and fixed vars.

    Returns (free vars, dependent definitions, inequality rows over free vars
    as ``(coeffs, const)`` meaning ``sum + const <= 0``).
    """
    lo, hi = byte_domains(poly.vars)
    if not propagate(poly._all_rows(), lo, hi):
        raise InfeasibleAbstraction("bounds propagation refuted the polytope")
    deps: Dict[int, Affine] = {}

    def subst(coeffs: Dict[int, Fraction], const: Fraction) -> Tuple[Dict[int, Fraction], Fraction]:
        out: Dict[int, Fraction] = {}
        for v, c in coeffs.items():
            if v in deps:
                k0, terms = deps[v]
                const += c * k0
                for u, cu in terms.items():
                    out[u] = out.get(u, Fraction(0)) + c * cu
            else:
                out[v] = out.get(v, Fraction(0)) + c
        return {v: c for v, c in out.items() if c != 0}, const

    for v in poly.vars:
        if lo[v] == hi[v]:
            deps[v] = (Fraction(lo[v]), {})
    pending = [({v: Fraction(c) for v, c in zip(vs, cs)}, Fraction(k)) for vs, cs, k in poly.eq_rows]
    for coeffs, const in pending:
        coeffs, const = subst(coeffs, const)
        if not coeffs:
            if const != 0:
                raise InfeasibleAbstraction("contradictory equalities")
            continue
        # prefer a unit pivot so dependents stay integral
        pivot = min(coeffs, key=lambda v: (abs(coeffs[v]) != 1, abs(coeffs[v]), v))
        cp = coeffs.pop(pivot)
        definition = (-const / cp, {u: -c / cp for u, c in coeffs.items()})
        # rewrite earlier definitions that mention the pivot
        for d, (k0, terms) in list(deps.items()):
            if pivot in terms:
                cd = terms.pop(pivot)
                k0 = k0 + cd * definition[0]
                for u, cu in definition[1].items():
                    terms[u] = terms.get(u, Fraction(0)) + cd * cu
                deps[d] = (k0, {u: c for u, c in terms.items() if c != 0})
        deps[pivot] = definition
    free = [v for v in poly.vars if v not in deps]
    rows: List[Tuple[Dict[int, Fraction], Fraction]] = []
    for vs, cs, k in poly.rows:
        rows.append(subst({v: Fraction(c) for v, c in zip(vs, cs)}, Fraction(k)))
    for v in poly.vars:
        rows.append(subst({v: Fraction(-1)}, Fraction(0)))
        rows.append(subst({v: Fraction(1)}, Fraction(-BYTE_MAX)))
    for coeffs, const in rows:
        if not coeffs and const > 0:
            raise InfeasibleAbstraction("constant row violated after substitution")
    return free, deps, [(c, k) for c, k in rows if c]


def _chebyshev(A: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, float]:
    norms = np.linalg.norm(A, axis=1)
    n = A.shape[1]
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A_ub = np.hstack([A, norms[:, None]])
    res = linprog(c, A_ub=A_ub, b_ub=b, bounds=[(None, None)] * n + [(0, None)], method="highs")
    if res.status != 0:
        raise DegeneratePolytope("no Chebyshev centre")
    return res.x[:n], float(res.x[-1])


def _walk(A: np.ndarray, b: np.ndarray, x0: np.ndarray, count: int, steps: int, rng: np.random.Generator) -> np.ndarray:
    """Run ``count`` independent chains from ``x0`` for ``steps`` moves; returns the endpoints."""
    X = np.repeat(x0[None, :], count, axis=0)

    def interval(X: np.ndarray, D: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        slack = b[None, :] - X @ A.T
        AD = D @ A.T
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = slack / AD
        hi = np.where(AD > 1e-12, ratio, np.inf).min(axis=1)
        lo = np.where(AD < -1e-12, ratio, -np.inf).max(axis=1)
        dikin = DIKIN_RADIUS / np.sqrt(((AD / np.maximum(slack, 1e-300)) ** 2).sum(axis=1))
        return np.maximum(lo, -dikin), np.minimum(hi, dikin)

    for _ in range(steps):
        D = rng.standard_normal(X.shape)
        D /= np.linalg.norm(D, axis=1, keepdims=True)
        lo, hi = interval(X, D)
        t = rng.uniform(lo, hi)
        Y = X + t[:, None] * D
        inside = (Y @ A.T < b[None, :]).all(axis=1)
        ylo, yhi = interval(Y, D)
        # the reverse move must be proposable; then correct for interval length
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = (hi - lo) / (yhi - ylo)
        accept = inside & (ylo <= -t) & (-t <= yhi) & (rng.random(count) < np.minimum(1.0, ratio))
        X[accept] = Y[accept]
    return X


def sample_polytope(poly: Polytope, n: int = DEFAULT_POLY_SAMPLES, rng: Optional[np.random.Generator] = None, dedup: bool = True) -> SampleBatch:
    """Draw ``n`` walk points in ``poly`` and round them to byte assignments.

    Rounded points outside the polytope are rejected. Raises
    ``DegeneratePolytope`` when the body left after eliminating equalities has
    no interior.
    """
    if not poly.feasible:
        raise InfeasibleAbstraction("polytope marked infeasible")
    rng = rng if rng is not None else np.random.default_rng()
    free, deps, rows = _eliminate(poly)
    col = {v: i for i, v in enumerate(poly.vars)}
    if not free:
        point = {v: deps[v][0] for v in poly.vars}
        if any(p.denominator != 1 for p in point.values()):
            raise DegeneratePolytope("single real point is not integral")
        ipoint = {v: int(p) for v, p in point.items()}
        if not poly.contains(ipoint):
            raise DegeneratePolytope("single point violates the polytope")
        raw = np.array([[float(point[v]) for v in poly.vars]])
        return SampleBatch(raw, [ipoint])
    fcol = {v: i for i, v in enumerate(free)}
    A = np.zeros((len(rows), len(free)))
    b = np.zeros(len(rows))
    for r, (coeffs, const) in enumerate(rows):
        for v, c in coeffs.items():
            A[r, fcol[v]] = float(c)
        b[r] = -float(const)
    center, radius = _chebyshev(A, b)
    if radius < MIN_INTERIOR_RADIUS:
        raise DegeneratePolytope(f"interior radius {radius:g}")
    ys = _walk(A, b, center, n, steps=WALK_BASE_STEPS + 10 * len(free), rng=rng)

    raw = np.empty((n, len(poly.vars)))
    for v in free:
        raw[:, col[v]] = ys[:, fcol[v]]
    for v, (k0, terms) in deps.items():
        acc = np.full(n, float(k0))
        for u, cu in terms.items():
            acc += float(cu) * ys[:, fcol[u]]
        raw[:, col[v]] = acc

    batch = SampleBatch(raw)
    seen = set()
    rounded = np.clip(np.rint(ys), 0, BYTE_MAX).astype(np.int64)
    for row in rounded:
        point = {v: int(row[fcol[v]]) for v in free}
        ok = True
        for v, (k0, terms) in deps.items():
            val = k0 + sum((cu * point[u] for u, cu in terms.items()), Fraction(0))
            if val.denominator != 1 or not 0 <= val <= BYTE_MAX:
                ok = False
                break
            point[v] = int(val)
        if not ok or not poly.contains(point):
            batch.rejected += 1
            continue
        if dedup:
            key = tuple(point[v] for v in poly.vars)
            if key in seen:
                continue
            seen.add(key)
        batch.points.append({v: point[v] for v in poly.vars})
    return batch


def sample_box(box: Box, n: int = DEFAULT_BOX_SAMPLES, rng: Optional[np.random.Generator] = None, dedup: bool = True) -> List[Dict[int, int]]:
    """Independent uniform integer draws per dimension."""
    if not box.feasible:
        raise InfeasibleAbstraction("box marked infeasible")
    rng = rng if rng is not None else np.random.default_rng()
    if not box.vars:
        return [{}]
    lo = np.array([box.lo[v] for v in box.vars])
    hi = np.array([box.hi[v] for v in box.vars])
    draws = rng.integers(lo, hi + 1, size=(n, len(box.vars)))
    out: List[Dict[int, int]] = []
    seen = set()
    for row in draws:
        key = tuple(int(x) for x in row)
        if dedup:
            if key in seen:
                continue
            seen.add(key)
        out.append(dict(zip(box.vars, key)))
    return out
