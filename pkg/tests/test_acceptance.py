"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line."""

from __future__ import annotations

import math
import random
import statistics
from decimal import Decimal, localcontext
from fractions import Fraction

import numpy as np
import pytest
from scipy.stats import chisquare

from criteria import TRIAL_SEEDS, campaign, record
from hybridfuzz.constraints import (
    SAT,
    UNSAT,
    Atom,
    LinExpr,
    PathCondition,
    interval_abstraction,
    parse_path_condition,
    polyhedral_abstraction,
    sample_polytope,
    solve,
)
from hybridfuzz.coordinator.report import dumps
from hybridfuzz.coordinator.scoring import (
    fuzzing_difficulty,
    future_reward,
    log_fuzzing_difficulty,
    normalize_difficulty,
    normalize_log_difficulty,
)
from hybridfuzz.harness.targets import bundled_targets
from hybridfuzz.ir import build_icfg
from progen import bfs_reward, random_program

pytestmark = pytest.mark.acceptance

SLEEP_FIXTURES = ("twopaths", "doctype", "b3", "loopy")
SLEEP_BUDGET = 60.0
SHORT_BUDGET = 30.0
REL_TOL = 1e-12
CHI2_ALPHA = 0.01


def _arms(report: dict) -> int:
    return sum(1 for b in report["covered_blocks"] if b in ("main:arm1", "main:arm2", "main:arm3", "main:arm4"))


# 1 --------------------------------------------------------------------------------


def test_criterion_01_sleeping_fraction():
    ok = True
    parts = []
    for fx in SLEEP_FIXTURES:
        full = [campaign(fx, "FULL", s, SLEEP_BUDGET)["sleeping_fraction"] for s in TRIAL_SEEDS]
        lob = [campaign(fx, "LOB", s, SLEEP_BUDGET)["sleeping_fraction"] for s in TRIAL_SEEDS]
        applies = statistics.median(lob) > 0.20
        wins = sum(f < l for f, l in zip(full, lob))
        fx_ok = wins >= 4 if applies else True
        ok &= fx_ok
        parts.append(
            f"{fx}: FULL {statistics.median(full):.5f} vs LOB {statistics.median(lob):.5f} "
            f"(median), FULL<LOB {wins}/5{'' if applies else ' n/a'}"
        )
        print(fx, "FULL", [round(x, 6) for x in full], "LOB", [round(x, 6) for x in lob])
    record(1, ok, "; ".join(parts))
    assert ok


# 2 --------------------------------------------------------------------------------


def _check_solves(report: dict, high_prefix: bool) -> list:
    """Events that flip main:check toward 'inside' under the given entry direction."""
    prefix = [["main:entry", not high_prefix]]
    return [
        e for e in report["branch_events"]
        if e["site"] == "main:check" and not e["taken"] and e.get("prefix") == prefix
    ]


def test_criterion_02_over_pruning_retrieval():
    lob_never = 0
    full_ok = 0
    for s in TRIAL_SEEDS:
        lob = campaign("twopaths", "LOB", s, SHORT_BUDGET)
        full = campaign("twopaths", "FULL", s, SHORT_BUDGET)
        lob_never += not _check_solves(lob, high_prefix=True)
        solved_low = any(e["outcome"] == SAT for e in _check_solves(full, high_prefix=False))
        solved_high = any(e["outcome"] == SAT for e in _check_solves(full, high_prefix=True))
        full_ok += solved_low and solved_high and "main:second" in full["covered_blocks"]
    ok = lob_never == 5 and full_ok >= 4
    record(2, ok, f"LOB never solved second-prefix branch {lob_never}/5; FULL solved both and covered region {full_ok}/5")
    assert ok


# 3 --------------------------------------------------------------------------------


def test_criterion_03_hard_branch():
    fuzz_missed = 0
    full_hit = 0
    for s in TRIAL_SEEDS:
        fo = campaign("doctype", "FuzzOnly", s, 3600.0, max_execs=200_000)
        assert fo["fuzzer"]["execs"] == 200_000
        fuzz_missed += "main:doctype" not in fo["covered_blocks"]
        full_hit += "main:doctype" in campaign("doctype", "FULL", s, SHORT_BUDGET)["covered_blocks"]
    ok = fuzz_missed >= 4 and full_hit == 5
    record(3, ok, f"FuzzOnly missed guard in 200k execs {fuzz_missed}/5; FULL covered it in 30s {full_hit}/5")
    assert ok


# 4 --------------------------------------------------------------------------------


def test_criterion_04_sampling_value():
    full_ok = 0
    ns_fewer = 0
    arms = []
    for s in TRIAL_SEEDS:
        full = campaign("b3", "FULL", s, SHORT_BUDGET)
        ns = campaign("b3", "NS", s, SHORT_BUDGET)
        sampled = any(e["site"] == "main:guard" and e["action"] == "SAMPLE" for e in full["branch_events"])
        fa, na = _arms(full), _arms(ns)
        arms.append((fa, na))
        full_ok += sampled and fa >= 3
        ns_fewer += na < fa
    ok = full_ok >= 4 and ns_fewer >= 3
    record(4, ok, f"FULL sampled guard and reached >=3 arms {full_ok}/5; NS fewer arms {ns_fewer}/5; (FULL,NS) arms {arms}")
    assert ok


# 5 --------------------------------------------------------------------------------

ABLATIONS = (("FULL", "NS"), ("FULL", "AllS"), ("NS", "NQ-NS"))


def test_criterion_05_ablation_ordering():
    ok = True
    failures = []
    for fx in bundled_targets():
        cov = {m: [campaign(fx, m, s, SHORT_BUDGET)["final_edge_coverage"] for s in TRIAL_SEEDS]
               for m in ("FULL", "NS", "AllS", "NQ-NS")}
        for a, b in ABLATIONS:
            wins = sum(x >= y for x, y in zip(cov[a], cov[b]))
            good = statistics.median(cov[a]) >= statistics.median(cov[b]) and wins >= 3
            if not good:
                failures.append(f"{fx} {a}>={b} wins {wins}/5 medians {cov[a]} vs {cov[b]}")
            ok &= good
        print(fx, {m: v for m, v in cov.items()})
    record(5, ok, f"{len(bundled_targets())} fixtures x 3 orderings" + ("" if ok else "; " + "; ".join(failures)))
    assert ok


# 6 --------------------------------------------------------------------------------


def _oracle_difficulty(path) -> Fraction:
    d = Fraction(1)
    for br, opp in path:
        d *= Fraction(br, br + opp) if br > 0 else Fraction(1, opp)
    return d


def _oracle_log(fr: Fraction) -> Decimal:
    with localcontext() as ctx:
        ctx.prec = 60
        return Decimal(fr.numerator).ln() - Decimal(fr.denominator).ln()


def _decimal_normalize(d: float, p_min: float) -> float:
    with localcontext() as ctx:
        ctx.prec = 40
        lp = Decimal(p_min).ln()
        return float(Decimal(d).ln() / lp) if lp != 0 else 0.0


def test_criterion_06_difficulty_oracle():
    rng = random.Random(6)
    worst = {"D": 0.0, "normD": 0.0, "log pipeline": 0.0}
    for _ in range(1000):
        path = []
        for _ in range(rng.randint(1, 40)):
            br = 0 if rng.random() < 0.2 else int(10 ** rng.uniform(0, 6))
            opp = int(10 ** rng.uniform(0, 6)) if br == 0 or rng.random() < 0.8 else 0
            path.append((br, opp))
        other = [(0, int(10 ** rng.uniform(0, 6))) for _ in range(rng.randint(1, 40))]
        d_exact = _oracle_difficulty(path)
        p_exact = min(d_exact, _oracle_difficulty(other))
        d = fuzzing_difficulty(path)
        worst["D"] = max(worst["D"], abs(d - float(d_exact)) / float(d_exact))
        # normalisation evaluated on identical float inputs
        d_in, p_in = float(d_exact), float(p_exact)
        want = _decimal_normalize(d_in, p_in)
        got = normalize_difficulty(d_in, p_in)
        worst["normD"] = max(worst["normD"], abs(got - want) / abs(want) if want else abs(got))
        # the log-space path used by the scheduler, against exact rationals
        log_p = min(log_fuzzing_difficulty(path), log_fuzzing_difficulty(other))
        got = normalize_log_difficulty(log_fuzzing_difficulty(path), log_p)
        want = float(_oracle_log(d_exact) / _oracle_log(p_exact)) if p_exact != 1 else 0.0
        worst["log pipeline"] = max(worst["log pipeline"], abs(got - want) / abs(want) if want else abs(got))
    ok = max(worst.values()) <= REL_TOL
    record(6, ok, "1000 instances, max relative error " +
           ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f" (tol {REL_TOL:g})")
    assert ok


# 7 --------------------------------------------------------------------------------


def test_criterion_07_reward_oracle():
    rng = random.Random(7)
    checked = 0
    mismatches = 0
    for _ in range(200):
        prog = random_program(rng, max_blocks=30, max_functions=3)
        icfg = build_icfg(prog)
        covered = {b.gid for b in prog.blocks if rng.random() < 0.4}
        for b in prog.blocks:
            checked += 1
            mismatches += future_reward(icfg, b.gid, covered) != bfs_reward(prog, b.gid, covered)
    ok = mismatches == 0
    record(7, ok, f"200 random ICFGs, {checked} blocks, {mismatches} mismatches")
    assert ok


# 8 and 9 --------------------------------------------------------------------------

_RELS = ("==", "!=", "<", "<=", ">", ">=")
_PY_REL = {
    "==": np.equal, "!=": np.not_equal, "<": np.less,
    "<=": np.less_equal, ">": np.greater, ">=": np.greater_equal,
}


def random_instance(rng: random.Random):
    """A path condition of dim <= 2 over bytes plus a truth-table evaluator for it."""
    vs = rng.sample(range(8), rng.randint(1, 2))
    atoms = []
    checks = []
    for _ in range(rng.randint(1, 4)):
        if len(vs) == 2 and rng.random() < 0.2:
            k = rng.randint(0, 400)
            a, b = vs
            tag = ("op", "eq", ("op", "mul", ("lin", LinExpr.var(a)), ("lin", LinExpr.var(b))), ("const", k))
            want = rng.random() < 0.5
            atoms.append(Atom.nonlinear(tag, nonzero=want))
            checks.append(lambda X, a=a, b=b, k=k, want=want: (X[a] * X[b] == k) == want)
            continue
        coeffs = {v: rng.choice([c for c in range(-5, 6) if c]) for v in vs}
        pivot = {v: rng.randint(0, 255) for v in vs}
        const = -sum(c * pivot[v] for v, c in coeffs.items()) + rng.randint(-3, 3)
        rel = rng.choice(_RELS)
        atoms.append(Atom(LinExpr(coeffs, const), rel))
        checks.append(lambda X, coeffs=coeffs, const=const, rel=rel:
                      _PY_REL[rel](sum(c * X[v] for v, c in coeffs.items()) + const, 0))
    return PathCondition(atoms), vs, checks


def _grid(vs):
    axes = np.meshgrid(*[np.arange(256, dtype=np.int64)] * len(vs), indexing="ij")
    return {v: ax.ravel() for v, ax in zip(vs, axes)}


def _instances():
    rng = random.Random(8)
    return [random_instance(rng) for _ in range(1000)]


def test_criterion_08_solver_oracle():
    disagreements = 0
    bad_models = 0
    sat = 0
    for pc, vs, checks in _instances():
        X = _grid(vs)
        truth = np.ones(256 ** len(vs), dtype=bool)
        for chk in checks:
            truth &= chk(X)
        res = solve(pc)
        expected = SAT if truth.any() else UNSAT
        disagreements += res.status != expected
        if res.status == SAT:
            sat += 1
            model_ok = all(chk({v: np.array([res.model[v]]) for v in vs})[0] for chk in checks)
            bad_models += not model_ok
    ok = disagreements == 0 and bad_models == 0
    record(8, ok, f"1000 instances ({sat} Sat), {disagreements} status disagreements, {bad_models} invalid models")
    assert ok


def test_criterion_09_abstraction_soundness():
    escaped = 0
    not_nested = 0
    for pc, vs, checks in _instances():
        X = _grid(vs)
        truth = np.ones(256 ** len(vs), dtype=bool)
        for chk in checks:
            truth &= chk(X)
        poly = polyhedral_abstraction(pc)
        box = interval_abstraction(pc)
        pts = np.stack([X[v] for v in poly.vars])
        if poly.feasible:
            in_poly = (poly.A @ pts <= poly.b[:, None] + 1e-9).all(axis=0)
        else:
            in_poly = np.zeros(pts.shape[1], dtype=bool)
        if box.feasible:
            in_box = np.ones(pts.shape[1], dtype=bool)
            for v in box.vars:
                in_box &= (X[v] >= box.lo[v]) & (X[v] <= box.hi[v])
        else:
            in_box = np.zeros(pts.shape[1], dtype=bool)
        escaped += int((truth & ~(in_poly & in_box)).any())
        not_nested += int((in_poly & ~in_box).any())
    ok = escaped == 0 and not_nested == 0
    record(9, ok, f"1000 instances, {escaped} with solutions outside an abstraction, {not_nested} with Polytope not within Box")
    assert ok


# 10 -------------------------------------------------------------------------------


def _chi2_once(seed: int) -> float:
    poly = polyhedral_abstraction(parse_path_condition("x0 >= 0\nx1 >= 0"))
    batch = sample_polytope(poly, 300, np.random.default_rng(seed), dedup=False)
    assert len(batch.points) == 300
    pts = np.array([[p[0], p[1]] for p in batch.points])
    hist, _, _ = np.histogram2d(pts[:, 0], pts[:, 1], bins=4, range=[[0, 256], [0, 256]])
    return float(chisquare(hist.ravel()).pvalue)


def test_criterion_10_sampler_uniformity():
    p = _chi2_once(10)
    tries = 1
    if p <= CHI2_ALPHA:
        p = _chi2_once(11)
        tries = 2
    rng = np.random.default_rng(10)
    outside = 0
    total = 0
    for text in ("x0 + x1 <= 300\nx0 - x1 >= -20", "3*x0 + 2*x1 + x2 <= 400\nx2 >= 100",
                 "x4 + 2*x5 + 3*x6 + 5*x7 + x8 == 1400"):
        poly = polyhedral_abstraction(parse_path_condition(text))
        batch = sample_polytope(poly, 300, rng)
        # equalities are met exactly by construction; inequality rows are checked on raw walk points
        total += batch.raw.shape[0]
        outside += int((~(poly.A @ batch.raw.T <= poly.b[:, None] + 1e-7).all(axis=0)).sum())
    ok = p > CHI2_ALPHA and outside == 0
    record(10, ok, f"chi-square p={p:.3f} after {tries} attempt(s); {outside}/{total} raw points outside Ax<=b")
    assert ok


# 11 -------------------------------------------------------------------------------


def test_criterion_11_determinism():
    from hybridfuzz.config import EngineConfig
    from hybridfuzz.coordinator import run_campaign
    from criteria import program

    same = []
    for fx, mode, budget in (("loopy", "FULL", 30.0), ("b3", "FULL", 10.0), ("twopaths", "LOB", 30.0)):
        cfg = EngineConfig(mode=mode, budget=budget, seed=11, lockstep=True)
        a = dumps(run_campaign(program(fx), cfg).report).encode()
        b = dumps(run_campaign(program(fx), cfg).report).encode()
        same.append(a == b)
    ok = all(same)
    record(11, ok, f"byte-identical reports for {sum(same)}/{len(same)} configurations")
    assert ok


# 12 -------------------------------------------------------------------------------


def test_criterion_12_lob_collision():
    lob_pruned = 0
    full_explored = 0
    for s in TRIAL_SEEDS:
        lob = campaign("collide", "LOB", s, SHORT_BUDGET)
        full = campaign("collide", "FULL", s, SHORT_BUDGET)
        lob_pruned += not any(e["site"] == "main:guard" for e in lob["branch_events"])
        full_explored += any(e["site"] == "main:guard" and e["outcome"] == SAT for e in full["branch_events"])
    ok = lob_pruned == 5 and full_explored == 5
    record(12, ok, f"LOB pruned the guard {lob_pruned}/5; FULL explored it {full_explored}/5")
    assert ok
