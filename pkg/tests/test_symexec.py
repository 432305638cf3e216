from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridfuzz.constraints import SAT, UNKNOWN, UNSAT, LinExpr, parse_atom, solve
from hybridfuzz.harness.targets import load_target
from hybridfuzz.ir import execute
from hybridfuzz.symexec import (
    SAMPLE,
    SKIP,
    SOLVE,
    ActionList,
    CostModel,
    SymConfig,
    concolic_with_sampling,
    path_condition_at,
)


def ordinal_of(prog, seed: bytes, fn: str, block: str) -> int:
    site = prog.gid(fn, block)
    res = concolic_with_sampling(prog, seed, ActionList())
    return next(b.ordinal for b in res.branches if b.site == site)


def test_doctype_solve_once():
    p = load_target("doctype")
    seed = b"A" * 12
    res = concolic_with_sampling(p, seed, ActionList.from_list([SOLVE]))
    assert res.solver_outcomes == {0: SAT}
    [gen] = res.generated
    assert gen.data[:9] == b"<!DOCTYPE" and gen.data[9:] == seed[9:]
    assert gen.origin == "Solve" and gen.site == p.gid("main", "entry")


def test_doctype_skip():
    p = load_target("doctype")
    res = concolic_with_sampling(p, b"A" * 12, ActionList.from_list([SKIP]))
    assert res.generated == [] and res.prefix_len == 1


def test_b3_sample_reaches_distinct_arms():
    p = load_target("b3")
    seed = bytes([0xEF, 0xBB, 0xBF, 23, 0, 0, 0, 0, 0])
    k = ordinal_of(p, seed, "main", "guard")
    arm_ids = {p.gid("main", f"arm{i}") for i in range(1, 5)}
    for attempt in range(2):
        res = concolic_with_sampling(p, seed, ActionList({k: SAMPLE}), rng=np.random.default_rng(attempt))
        hashes = set()
        arms = set()
        for g in res.generated:
            tr = execute(p, g.data)
            hashes.add(tr.path_hash)
            arms.update(b for _, b in tr.edges if b in arm_ids)
        if len(hashes) >= 2 and len(arms) >= 2:
            break
    assert len(hashes) >= 2 and len(arms) >= 2


def test_generated_inputs_have_program_length():
    p = load_target("b3")
    seed = bytes([0xEF, 0xBB, 0xBF, 23, 0, 0, 0, 0, 0])
    k = ordinal_of(p, seed, "main", "guard")
    res = concolic_with_sampling(p, seed, ActionList({k: SAMPLE}))
    assert res.generated and all(len(g.data) == p.input_len for g in res.generated)


def test_path_condition_examples():
    c = parse_atom("x0 >= 128")
    assert path_condition_at([], c, True).serialize() == "x0 < 128"
    pc = path_condition_at([parse_atom("x0 == 1")], parse_atom("x1 <= 5"), True)
    assert pc.serialize() == "x0 == 1\nx1 > 5"
    assert pc.vars == (0, 1)


def test_mulgate_nonlinear_solve_crosschecked():
    p = load_target("mulgate")
    res = concolic_with_sampling(p, bytes(3), ActionList.from_list([SOLVE]))
    assert res.solver_outcomes[0] in (SAT, UNKNOWN)
    truth = {(a, b) for a in range(256) for b in range(256) if a * b == 12}
    assert truth
    for g in res.generated:
        assert (g.data[0], g.data[1]) in truth
        assert execute(p, g.data).branch_decisions[0][1]


def test_concrete_branch_has_no_alternatives():
    p = load_target("b3")
    res = concolic_with_sampling(p, bytes(9), ActionList({0: SOLVE}))
    rec = res.branches[0]
    assert not rec.symbolic and rec.outcome == UNSAT and res.generated == []


def test_per_seed_budget_aborts():
    p = load_target("doctype")
    cfg = SymConfig(per_seed_budget=0.0, cost=CostModel())
    res = concolic_with_sampling(p, b"A" * 12, ActionList.from_list([SOLVE]), cfg)
    assert res.budget_exceeded
    # the branch that crossed the budget still reports its result
    assert len(res.branches) == 1 and res.generated


def test_seed_length_checked():
    with pytest.raises(ValueError):
        concolic_with_sampling(load_target("doctype"), b"short", ActionList())


def test_skip_everything_matches_concrete_decisions():
    p = load_target("loopy")
    seed = bytes(range(p.input_len))
    res = concolic_with_sampling(p, seed, ActionList())
    tr = execute(p, seed)
    assert [(b.site, b.taken) for b in res.branches] == tr.branch_decisions


@settings(max_examples=25, deadline=None)
@given(st.binary(min_size=8, max_size=8))
def test_negation_soundness(seed):
    p = load_target("loopy")
    base = execute(p, seed).branch_decisions
    res = concolic_with_sampling(p, seed, ActionList({i: SOLVE for i in range(min(len(base), 12))}))
    for g in res.generated:
        i = g.ordinal
        got = execute(p, g.data).branch_decisions
        assert got[:i] == base[:i]
        assert got[i] == (base[i][0], not base[i][1])
