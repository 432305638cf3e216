"""Concrete interpreter recording edge coverage, branch decisions and crashes.

Each basic block is compiled once into a small Python function; the driver
loop handles terminators, the call stack and trace recording. The word
semantics (64-bit wrapping, unsigned division, signed compares) come from
``OP_TEMPLATES`` which is also what :func:`alu` evaluates, so the symbolic
executor and the compiled blocks cannot drift apart.
"""

from __future__ import annotations

import hashlib
import struct
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .program import (
    WORD_MASK,
    Call,
    CondBranch,
    Crash,
    Halt,
    Imm,
    Jump,
    Reg,
    Return,
    TargetProgram,
)

DEFAULT_STEP_BUDGET = 1_000_000
MAX_CALL_DEPTH = 4096

NORMAL = "Normal"
CRASH = "Crash"
BUDGET = "StepBudgetExceeded"

_SIGN = 1 << 63

OP_TEMPLATES = {
    "add": "(A + B) & M",
    "sub": "(A - B) & M",
    "mul": "(A * B) & M",
    "div": "A // B",
    "mod": "A % B",
    "and": "A & B",
    "or": "A | B",
    "xor": "A ^ B",
    "shl": "(A << (B & 63)) & M",
    "shr": "A >> (B & 63)",
    "eq": "int(A == B)",
    "ne": "int(A != B)",
    "ltu": "int(A < B)",
    "leu": "int(A <= B)",
    "gtu": "int(A > B)",
    "geu": "int(A >= B)",
    "lts": "int((A ^ S) < (B ^ S))",
    "les": "int((A ^ S) <= (B ^ S))",
    "gts": "int((A ^ S) > (B ^ S))",
    "ges": "int((A ^ S) >= (B ^ S))",
}

_ALU = {
    op: eval(f"lambda A, B: {tmpl}", {"M": WORD_MASK, "S": _SIGN, "int": int})
    for op, tmpl in OP_TEMPLATES.items()
}


def alu(op: str, a: int, b: int) -> int:
    """Evaluate one binary/compare opcode on two words.

    Raises ZeroDivisionError for ``div``/``mod`` by zero.
    """
    return _ALU[op](a, b)


class InputLengthError(ValueError):
    pass


class _Fault(Exception):
    def __init__(self, kind: str, index: int):
        self.kind = kind
        self.index = index


@dataclass
class Trace:
    edges: List[Tuple[int, int]]
    branch_decisions: List[Tuple[int, bool]]
    outcome: str
    steps: int
    crash_kind: Optional[str] = None
    call_stack: Optional[Tuple[str, ...]] = None
    final_block: int = 0
    _path_hash: Optional[str] = field(default=None, repr=False, compare=False)

    @property
    def edges_hit(self) -> Counter:
        return Counter(self.edges)

    @property
    def crashed(self) -> bool:
        return self.outcome == CRASH

    @property
    def path_hash(self) -> str:
        if self._path_hash is None:
            h = hashlib.blake2b(digest_size=12)
            for site, taken in self.branch_decisions:
                h.update(struct.pack("<I?", site, taken))
            h.update(self.outcome.encode())
            self._path_hash = h.hexdigest()
        return self._path_hash

    def crash_key(self) -> Optional[Tuple[str, Tuple[str, ...]]]:
        """(kind, innermost three frames) used to deduplicate crashes."""
        if not self.crashed:
            return None
        return (self.crash_kind, tuple(self.call_stack[-3:]))

    def blocks_visited(self, entry: int) -> set:
        seen = {entry}
        for _, dst in self.edges:
            seen.add(dst)
        return seen


# block compilation ---------------------------------------------------------

_K_JMP, _K_BR, _K_CALL, _K_RET, _K_HALT, _K_CRASH = range(6)


def _operand(o) -> str:
    if isinstance(o, Reg):
        return f"R[{o.index}]"
    assert isinstance(o, Imm)
    return str(o.value)


def _compile_block(prog: TargetProgram, block) -> tuple:
    lines = ["def _blk(R, I, B):"]
    for k, ins in enumerate(block.instructions):
        op, a = ins.op, ins.args
        if op == "load":
            lines.append(f"    R[{a[0]}] = I[{a[1]}]")
        elif op == "const":
            lines.append(f"    R[{a[0]}] = {a[1]}")
        elif op == "mov":
            lines.append(f"    R[{a[0]}] = {_operand(a[1])}")
        elif op in OP_TEMPLATES:
            rhs = _operand(a[2])
            if op in ("div", "mod"):
                if isinstance(a[2], Imm) and a[2].value == 0:
                    lines.append(f"    raise _Fault('DivByZero', {k})")
                    continue
                if isinstance(a[2], Reg):
                    lines.append(f"    if {rhs} == 0: raise _Fault('DivByZero', {k})")
            expr = OP_TEMPLATES[op].replace("A", f"R[{a[1]}]").replace("B", rhs)
            expr = expr.replace("M", str(WORD_MASK)).replace("S", str(_SIGN))
            lines.append(f"    R[{a[0]}] = {expr}")
        elif op == "bufwrite":
            size = prog.buffers[a[0]]
            lines.append(f"    _i = R[{a[1]}]")
            lines.append(f"    if _i >= {size}: raise _Fault('BufOverflow', {k})")
            lines.append(f"    B[{a[0]!r}][_i] = {_operand(a[2])}")
        elif op == "bufread":
            size = prog.buffers[a[1]]
            lines.append(f"    _i = R[{a[2]}]")
            lines.append(f"    if _i >= {size}: raise _Fault('BufOverflow', {k})")
            lines.append(f"    R[{a[0]}] = B[{a[1]!r}][_i]")
        elif op == "assert":
            lines.append(f"    if R[{a[0]}] == 0: raise _Fault('AssertFail', {k})")
        else:  # pragma: no cover - parser rejects unknown opcodes
            raise ValueError(f"unknown opcode {op}")
    term = block.terminator
    fn = prog.functions[block.fn]
    if isinstance(term, CondBranch):
        lines.append(f"    return R[{term.reg}]")
        info = (_K_BR, fn.block(term.true_target).gid, fn.block(term.false_target).gid)
    else:
        lines.append("    return 0")
        if isinstance(term, Jump):
            info = (_K_JMP, fn.block(term.target).gid, None)
        elif isinstance(term, Call):
            callee = prog.functions[term.fn]
            info = (_K_CALL, callee.blocks[0].gid, (fn.block(term.return_block).gid, term.fn))
        elif isinstance(term, Return):
            info = (_K_RET, None, None)
        elif isinstance(term, Halt):
            info = (_K_HALT, None, None)
        else:
            assert isinstance(term, Crash)
            info = (_K_CRASH, term.kind, None)
    ns = {"_Fault": _Fault, "int": int}
    exec("\n".join(lines), ns)
    return (ns["_blk"], len(block.instructions) + 1) + info


def compiled_blocks(prog: TargetProgram) -> list:
    cache = prog.__dict__.get("_compiled")
    if cache is None:
        cache = [_compile_block(prog, b) for b in prog.blocks]
        prog.__dict__["_compiled"] = cache
    return cache


def execute(prog: TargetProgram, data: Sequence[int], step_budget: int = DEFAULT_STEP_BUDGET) -> Trace:
    """Run ``prog`` on ``data`` and return its trace. Deterministic."""
    if len(data) != prog.input_len:
        raise InputLengthError(f"input has {len(data)} bytes, program expects {prog.input_len}")
    if step_budget <= 0:
        raise ValueError("step budget must be positive")
    blocks = compiled_blocks(prog)
    regs = [0] * prog.num_regs
    bufs = {name: [0] * size for name, size in prog.buffers.items()}
    inp = bytes(data)
    edges: List[Tuple[int, int]] = []
    decisions: List[Tuple[int, bool]] = []
    ret_stack: List[int] = []
    frames: List[str] = [prog.entry]
    cur = prog.entry_block().gid
    steps = 0
    add_edge = edges.append
    add_dec = decisions.append
    while True:
        fn, cost, kind, a, b = blocks[cur]
        if steps + cost > step_budget:
            return Trace(edges, decisions, BUDGET, steps, final_block=cur)
        try:
            v = fn(regs, inp, bufs)
        except _Fault as f:
            return Trace(edges, decisions, CRASH, steps + f.index + 1, f.kind, tuple(frames), cur)
        steps += cost
        if kind == _K_BR:
            taken = v != 0
            add_dec((cur, taken))
            nxt = a if taken else b
        elif kind == _K_JMP:
            nxt = a
        elif kind == _K_CALL:
            if len(ret_stack) >= MAX_CALL_DEPTH:
                return Trace(edges, decisions, CRASH, steps, "StackOverflow", tuple(frames), cur)
            ret_stack.append(b[0])
            frames.append(b[1])
            nxt = a
        elif kind == _K_RET:
            if not ret_stack:
                return Trace(edges, decisions, NORMAL, steps, final_block=cur)
            nxt = ret_stack.pop()
            frames.pop()
        elif kind == _K_HALT:
            return Trace(edges, decisions, NORMAL, steps, final_block=cur)
        else:
            return Trace(edges, decisions, CRASH, steps, a, tuple(frames), cur)
        add_edge((cur, nxt))
        cur = nxt


def replay_edges(prog: TargetProgram, decisions: Sequence[Tuple[int, bool]], max_edges: int) -> List[Tuple[int, int]]:
    """Walk the ICFG driven only by recorded branch decisions."""
    blocks = compiled_blocks(prog)
    it = iter(decisions)
    ret_stack: List[int] = []
    cur = prog.entry_block().gid
    out: List[Tuple[int, int]] = []
    while len(out) < max_edges:
        _, _, kind, a, b = blocks[cur]
        if kind == _K_BR:
            try:
                site, taken = next(it)
            except StopIteration:
                break
            if site != cur:
                raise ValueError(f"decision for block {site} replayed at block {cur}")
            nxt = a if taken else b
        elif kind == _K_JMP:
            nxt = a
        elif kind == _K_CALL:
            ret_stack.append(b[0])
            nxt = a
        elif kind == _K_RET and ret_stack:
            nxt = ret_stack.pop()
        else:
            break
        out.append((cur, nxt))
        cur = nxt
    return out
