from __future__ import annotations

from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridfuzz.harness.targets import bundled_targets, load_target
from hybridfuzz.ir import (
    BUDGET,
    CRASH,
    NORMAL,
    InputLengthError,
    ParseError,
    SemanticError,
    build_icfg,
    execute,
    parse_program,
    replay_edges,
)

DOCTYPE = load_target("doctype")


def test_minimal_program():
    p = parse_program("fn main { b0: halt }")
    assert len(p.functions) == 1
    assert len(p.blocks) == 1
    assert p.blocks[0].line_count >= 1


def test_undefined_block_is_named():
    text = "input 1\nfn main {\nb0:\n  load r1 0\n  br r1 b1 nowhere\nb1:\n  halt\n}\n"
    with pytest.raises(SemanticError, match="nowhere"):
        parse_program(text)


def test_syntax_error_has_position():
    with pytest.raises(ParseError) as exc:
        parse_program("input 1\nfn main {\nb0:\n  frobnicate r1 r2\n  halt\n}\n")
    assert exc.value.line == 4


def test_unknown_opcode_rejected():
    with pytest.raises(ParseError):
        parse_program("fn main { b0: bogus r1 r1 r1\n halt }")


def test_register_out_of_range():
    with pytest.raises(SemanticError, match="r99"):
        parse_program("input 1\nfn main {\nb0:\n  load r99 0\n  halt\n}\n")


def test_doctype_has_nine_conjunct_guard():
    guard = DOCTYPE.block("main", "entry")
    eqs = [i for i in guard.instructions if i.op == "eq"]
    assert len(eqs) == 9
    assert guard.is_conditional


def test_straight_line_icfg():
    p = parse_program("fn main {\na: jmp b\nb: jmp c\nc: halt\n}")
    g = build_icfg(p)
    assert len(g.edges) == 2
    assert int(g.adjacency["main"].sum()) == 2


def test_diamond_icfg():
    p = parse_program("input 1\nfn main {\na:\n load r1 0\n br r1 l r\nl: jmp j\nr: jmp j\nj: halt\n}")
    assert len(build_icfg(p).edges) == 4


def test_call_and_return_edges():
    p = load_target("callee")
    g = build_icfg(p)
    m0, m1, h0 = p.gid("main", "m0"), p.gid("main", "m1"), p.gid("helper", "h0")
    assert g.edge_kind((m0, h0)) == "call"
    assert g.edge_kind((h0, m1)) == "return"
    assert len(g.edges) == 2


def test_doctype_guard_taken():
    site = DOCTYPE.gid("main", "entry")
    t = execute(DOCTYPE, b"<!DOCTYPEAAA")
    assert (site, True) in t.branch_decisions
    t = execute(DOCTYPE, b"A" * 12)
    assert t.branch_decisions == [(site, False)]


def test_divcrash_one_frame():
    p = load_target("divcrash")
    t = execute(p, bytes([0, 0, 0, 0]))
    assert t.outcome == CRASH
    assert t.crash_kind == "DivByZero"
    assert t.call_stack == ("main",)


def test_divcrash_three_frames():
    p = load_target("divcrash")
    t = execute(p, bytes([200, 0, 0, 0]))
    assert t.call_stack == ("main", "parse", "decode")
    assert t.crash_key() == ("DivByZero", ("main", "parse", "decode"))


def test_buffer_overflow_crash():
    p = load_target("samplecrash")
    assert execute(p, bytes([255, 255, 0x5A])).crash_kind == "BufOverflow"
    assert execute(p, bytes([255, 254, 0x5A])).outcome == NORMAL


def test_step_budget_not_a_crash():
    p = load_target("b3")
    t = execute(p, bytes(p.input_len), step_budget=100)
    assert t.outcome == BUDGET
    assert t.call_stack is None
    assert not t.crashed


def test_input_length_checked():
    with pytest.raises(InputLengthError):
        execute(DOCTYPE, b"short")


def test_every_fixture_loads():
    names = bundled_targets()
    assert len(names) >= 8
    for n in names:
        p = load_target(n)
        assert all(b.line_count >= 1 for b in p.blocks)


FIXTURES = {n: load_target(n) for n in bundled_targets()}


@settings(max_examples=60, deadline=None)
@given(name=st.sampled_from(sorted(FIXTURES)), data=st.data())
def test_execution_properties(name, data):
    p = FIXTURES[name]
    inp = data.draw(st.binary(min_size=p.input_len, max_size=p.input_len))
    t1 = execute(p, inp)
    t2 = execute(p, inp)
    # determinism
    assert t1 == t2
    # coverage soundness
    g = build_icfg(p)
    assert all(e in g.edges for e in t1.edges_hit)
    # branch/trace consistency
    assert Counter(replay_edges(p, t1.branch_decisions, len(t1.edges))) == t1.edges_hit
    # call stack present iff crash
    assert (t1.call_stack is not None) == t1.crashed
    assert len(t1.branch_decisions) == sum(1 for s, _ in t1.edges if p.blocks[s].is_conditional)
