"""Single-path concolic executor with per-branch solve/sample actions.

One seed is executed concretely while every register also carries a symbolic
shadow:

* ``None``      concrete only (input independent)
* ``LinExpr``   exact integer form whose value mod 2**64 is the register word
* ``Opaque``    expression tree for values the linear layer cannot express
* ``Cond``      0/1 result that is 1 iff every atom in the conjunction holds

At each conditional branch the executor knows the constraint of the taken
direction and the alternatives that would flip it. The caller's action list
decides, per branch ordinal, whether to solve for the flip, sample around it,
or just record the taken constraint.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .constraints.abstraction import interval_abstraction, polyhedral_abstraction
from .constraints.linear import Atom, LinExpr, PathCondition
from .constraints.sampling import (
    DEFAULT_BOX_SAMPLES,
    DEFAULT_POLY_SAMPLES,
    DegeneratePolytope,
    InfeasibleAbstraction,
    sample_box,
    sample_polytope,
)
from .constraints.solver import SAT, UNKNOWN, UNSAT, SolveBudget, solve
from .ir.interp import DEFAULT_STEP_BUDGET, MAX_CALL_DEPTH, alu
from .ir.program import (
    COMPARE_OPS,
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

log = logging.getLogger(__name__)

SOLVE = "SOLVE"
SAMPLE = "SAMPLE"
SKIP = "SKIP"
ACTIONS = (SOLVE, SAMPLE, SKIP)

DEFAULT_K = 10
_TWO64 = 1 << 64
_TWO63 = 1 << 63


@dataclass(frozen=True)
class Opaque:
    tag: tuple


@dataclass(frozen=True)
class Cond:
    atoms: Tuple[Atom, ...]


Shadow = Union[None, LinExpr, Opaque, Cond]


def _signed(v: int) -> int:
    return v - _TWO64 if v >= _TWO63 else v


def _as_lin(shadow: Shadow, value: int) -> Optional[LinExpr]:
    if shadow is None:
        return LinExpr.constant(_signed(value))
    if isinstance(shadow, LinExpr):
        return shadow
    return None


def to_tag(shadow: Shadow, value: int) -> tuple:
    if shadow is None:
        return ("const", value)
    if isinstance(shadow, LinExpr):
        return ("lin", shadow)
    if isinstance(shadow, Opaque):
        return shadow.tag
    tag = ("atom", shadow.atoms[0])
    for a in shadow.atoms[1:]:
        tag = ("op", "and", tag, ("atom", a))
    return tag


def _compare_atom(op: str, la: LinExpr, lb: LinExpr) -> Optional[Atom]:
    """Linear atom equivalent to the word compare, or None if ranges forbid it."""
    diff = la - lb
    if op in ("eq", "ne"):
        lo, hi = diff.bounds()
        if -_TWO64 < lo and hi < _TWO64:
            return Atom(diff, "==" if op == "eq" else "!=")
        return None
    alo, ahi = la.bounds()
    blo, bhi = lb.bounds()
    if op.endswith("u"):
        lim_lo, lim_hi = 0, _TWO64
    else:
        lim_lo, lim_hi = -_TWO63, _TWO63
    if not (lim_lo <= alo and ahi < lim_hi and lim_lo <= blo and bhi < lim_hi):
        return None
    rel = {"lt": "<", "le": "<=", "gt": ">", "ge": ">="}[op[:2]]
    return Atom(diff, rel)


def binary_shadow(op: str, sa: Shadow, va: int, sb: Shadow, vb: int) -> Shadow:
    """Symbolic shadow of ``op(a, b)``; concrete values are those before the op."""
    if sa is None and sb is None:
        return None
    la, lb = _as_lin(sa, va), _as_lin(sb, vb)
    if op in COMPARE_OPS:
        if la is not None and lb is not None:
            atom = _compare_atom(op, la, lb)
            if atom is not None:
                if atom.lhs.is_constant():
                    return None
                return Cond((atom,))
        return Opaque(("op", op, to_tag(sa, va), to_tag(sb, vb)))
    if la is not None and lb is not None:
        if op == "add":
            return la + lb
        if op == "sub":
            return la - lb
        if op == "mul" and (sa is None or sb is None):
            k = _signed(va) if sa is None else _signed(vb)
            lin = lb.scale(k) if sa is None else la.scale(k)
            return lin if not lin.is_constant() else None
        if op == "shl" and sb is None:
            return la.scale(1 << (vb & 63))
    if op == "and" and isinstance(sa, Cond) and isinstance(sb, Cond):
        return Cond(sa.atoms + sb.atoms)
    return Opaque(("op", op, to_tag(sa, va), to_tag(sb, vb)))


def branch_constraints(shadow: Shadow, value: int, assignment: Mapping[int, int]) -> Tuple[List[Atom], List[List[Atom]]]:
    """(atoms implied by the taken direction, alternatives that flip it).

    An empty alternative list means the branch cannot be flipped (input
    independent). When a false conjunction is kept, only its first false
    atom is recorded for the prefix: an under-approximation of the path.
    """
    taken = value != 0
    if shadow is None:
        return [], []
    if isinstance(shadow, LinExpr):
        lo, hi = shadow.bounds()
        if -_TWO64 < lo and hi < _TWO64:
            nz = Atom(shadow, "!=")
            return ([nz], [[nz.negate()]]) if taken else ([nz.negate()], [[nz]])
        shadow = Opaque(("lin", shadow))
    if isinstance(shadow, Opaque):
        nz = Atom.nonlinear(shadow.tag, nonzero=True)
        return ([nz], [[nz.negate()]]) if taken else ([nz.negate()], [[nz]])
    atoms = list(shadow.atoms)
    if taken:
        return atoms, [[a.negate()] for a in atoms]
    first_false = next((a for a in atoms if not a.holds(assignment)), None)
    return ([first_false.negate()] if first_false is not None else []), [atoms]


def path_condition_at(prefix: Sequence[Atom], constraint: Atom, negate: bool) -> PathCondition:
    return PathCondition(list(prefix) + [constraint.negate() if negate else constraint])


# configuration ----------------------------------------------------------------


@dataclass(frozen=True)
class CostModel:
    """Virtual-second charges used by the deterministic lockstep scheduler."""

    fuzz_exec: float = 2e-4
    fuzz_step: float = 3e-7
    concolic_base: float = 5e-3
    concolic_instr: float = 2e-5
    solve_base: float = 1e-3
    solve_step: float = 1e-7
    poly_build: float = 2e-3
    poly_point: float = 1e-4
    box_build: float = 5e-4
    box_point: float = 1e-5
    tree_decision: float = 1e-6
    strategy_entry: float = 2e-5
    poll: float = 1e-2

    def exec_cost(self, steps: int) -> float:
        return self.fuzz_exec + self.fuzz_step * steps


@dataclass
class SymConfig:
    k_dim: int = DEFAULT_K
    sample_poly: int = DEFAULT_POLY_SAMPLES
    sample_box: int = DEFAULT_BOX_SAMPLES
    per_seed_budget: float = 2.0
    solve_seconds: float = 0.05
    solve_max_steps: int = 1 << 24
    step_budget: int = DEFAULT_STEP_BUDGET
    # virtual time: charge the cost model instead of measuring wall time
    virtual: bool = True
    cost: CostModel = field(default_factory=CostModel)
    record_pc: bool = False

    def solve_budget(self) -> SolveBudget:
        if self.virtual:
            steps = min(self.solve_max_steps, int(self.solve_seconds / self.cost.solve_step))
            return SolveBudget(max_steps=steps, max_seconds=None)
        return SolveBudget(max_steps=self.solve_max_steps, max_seconds=self.solve_seconds)


# results ----------------------------------------------------------------------


@dataclass
class ActionList:
    """Sparse per-ordinal actions; ordinals not listed are SKIP."""

    actions: Dict[int, str] = field(default_factory=dict)

    @classmethod
    def from_list(cls, seq: Sequence[str]) -> "ActionList":
        return cls({i: a for i, a in enumerate(seq) if a != SKIP})

    def get(self, ordinal: int) -> str:
        return self.actions.get(ordinal, SKIP)

    def __len__(self) -> int:
        return len(self.actions)


@dataclass
class GeneratedInput:
    data: bytes
    origin: str  # "Solve" or "Sample"
    site: int
    ordinal: int


@dataclass
class BranchRecord:
    ordinal: int
    site: int
    taken: bool
    action: str
    outcome: Optional[str] = None
    generated: int = 0
    pc_text: Optional[str] = None
    # False when the condition does not depend on the input
    symbolic: bool = True


@dataclass
class ConcolicResult:
    generated: List[GeneratedInput] = field(default_factory=list)
    solver_outcomes: Dict[int, str] = field(default_factory=dict)
    branches: List[BranchRecord] = field(default_factory=list)
    timing: Dict[str, float] = field(default_factory=lambda: {"execute": 0.0, "solve": 0.0, "sample": 0.0})
    cost: float = 0.0
    budget_exceeded: bool = False
    outcome: str = "Normal"
    prefix_len: int = 0
    instructions: int = 0

    def charge(self, phase: str, amount: float) -> None:
        self.timing[phase] = self.timing.get(phase, 0.0) + amount
        self.cost += amount


class BudgetExceeded(Exception):
    pass


# executor ---------------------------------------------------------------------


class _Machine:
    def __init__(self, prog: TargetProgram, data: bytes):
        self.prog = prog
        self.data = data
        self.regs = [0] * prog.num_regs
        self.sym: List[Shadow] = [None] * prog.num_regs
        self.bufs = {n: [0] * s for n, s in prog.buffers.items()}
        self.bufsym: Dict[str, Dict[int, Shadow]] = {n: {} for n in prog.buffers}

    def operand(self, o) -> Tuple[Shadow, int]:
        if isinstance(o, Reg):
            return self.sym[o.index], self.regs[o.index]
        return None, o.value

    def step(self, ins) -> Optional[str]:
        """Execute one instruction; returns a crash kind or None."""
        op, a = ins.op, ins.args
        regs, sym = self.regs, self.sym
        if op == "load":
            regs[a[0]] = self.data[a[1]]
            sym[a[0]] = LinExpr.var(a[1])
        elif op == "const":
            regs[a[0]] = a[1]
            sym[a[0]] = None
        elif op == "mov":
            sym[a[0]], regs[a[0]] = self.operand(a[1])
        elif op == "bufwrite":
            idx = regs[a[1]]
            if idx >= self.prog.buffers[a[0]]:
                return "BufOverflow"
            s, v = self.operand(a[2])
            self.bufs[a[0]][idx] = v
            self.bufsym[a[0]][idx] = s
        elif op == "bufread":
            idx = regs[a[2]]
            if idx >= self.prog.buffers[a[1]]:
                return "BufOverflow"
            regs[a[0]] = self.bufs[a[1]][idx]
            sym[a[0]] = self.bufsym[a[1]].get(idx)
        elif op == "assert":
            if regs[a[0]] == 0:
                return "AssertFail"
        else:
            sa, va = sym[a[1]], regs[a[1]]
            sb, vb = self.operand(a[2])
            if op in ("div", "mod") and vb == 0:
                return "DivByZero"
            regs[a[0]] = alu(op, va, vb)
            sym[a[0]] = binary_shadow(op, sa, va, sb, vb)
        return None


def _complete(seed: bytes, model: Mapping[int, int]) -> bytes:
    out = bytearray(seed)
    for v, x in model.items():
        out[v] = x
    return bytes(out)


def concolic_with_sampling(
    prog: TargetProgram,
    seed: bytes,
    actions: ActionList,
    cfg: Optional[SymConfig] = None,
    rng: Optional[np.random.Generator] = None,
) -> ConcolicResult:
    """Run ``seed`` concolically, applying ``actions`` at each conditional."""
    cfg = cfg or SymConfig()
    rng = rng if rng is not None else np.random.default_rng(0)
    cost = cfg.cost
    res = ConcolicResult()
    seed = bytes(seed)
    if len(seed) != prog.input_len:
        raise ValueError("seed length does not match the program")
    hint = {i: b for i, b in enumerate(seed)}
    m = _Machine(prog, seed)
    prefix: List[Atom] = []
    budget = cfg.solve_budget()
    wall0 = time.perf_counter()
    res.charge("execute", cost.concolic_base if cfg.virtual else 0.0)

    def spent() -> float:
        return res.cost if cfg.virtual else time.perf_counter() - wall0

    def timed(phase: str, virtual_cost_fn, fn):
        t0 = time.perf_counter()
        out = fn()
        if cfg.virtual:
            res.charge(phase, virtual_cost_fn(out))
        else:
            res.charge(phase, time.perf_counter() - t0)
        return out

    def do_solve(alts: List[List[Atom]]) -> Tuple[str, Optional[Dict[int, int]]]:
        status = UNSAT
        for alt in alts:
            pc = PathCondition(prefix + alt)
            r = timed("solve", lambda r: cost.solve_base + cost.solve_step * r.steps,
                      lambda: solve(pc, budget, hint))
            if r.status == SAT:
                return SAT, r.model
            if r.status == UNKNOWN:
                status = UNKNOWN
        return status, None

    def do_sample(alts: List[List[Atom]]) -> Tuple[str, List[Dict[int, int]]]:
        status = UNSAT
        for alt in alts:
            pc = PathCondition(prefix + alt)
            if pc.dim < cfg.k_dim:
                poly = timed("sample", lambda p: cost.poly_build, lambda: polyhedral_abstraction(pc))
                if not poly.feasible:
                    continue
                try:
                    batch = timed("sample", lambda b: cost.poly_point * cfg.sample_poly,
                                  lambda: sample_polytope(poly, cfg.sample_poly, rng))
                except DegeneratePolytope:
                    st, model = do_solve([alt])
                    if st == SAT:
                        return SAT, [model]
                    status = UNKNOWN if st == UNKNOWN else status
                    continue
                except InfeasibleAbstraction:
                    continue
                if batch.points:
                    return SAT, batch.points
            else:
                box = timed("sample", lambda b: cost.box_build, lambda: interval_abstraction(pc))
                if not box.feasible:
                    continue
                pts = timed("sample", lambda p: cost.box_point * cfg.sample_box,
                            lambda: sample_box(box, cfg.sample_box, rng))
                if pts:
                    return SAT, pts
        return status, []

    frames: List[Tuple[str, Optional[int]]] = []
    fn = prog.functions[prog.entry]
    block = fn.blocks[0]
    steps = 0
    ordinal = 0
    try:
        while True:
            n_ins = len(block.instructions) + 1
            if steps + n_ins > cfg.step_budget:
                res.outcome = "StepBudgetExceeded"
                break
            crash = None
            for ins in block.instructions:
                crash = m.step(ins)
                if crash:
                    break
            steps += n_ins
            if crash:
                res.outcome = "Crash"
                break
            term = block.terminator
            if isinstance(term, CondBranch):
                value = m.regs[term.reg]
                taken = value != 0
                taken_atoms, alts = branch_constraints(m.sym[term.reg], value, hint)
                act = actions.get(ordinal)
                rec = BranchRecord(ordinal, block.gid, taken, act, symbolic=bool(alts))
                if act != SKIP:
                    if cfg.virtual:
                        res.charge("execute", cost.concolic_instr * (steps - res.instructions))
                        res.instructions = steps
                    if cfg.record_pc:
                        rec.pc_text = "\n".join(
                            PathCondition(prefix + alt).serialize() for alt in alts
                        ) if alts else ""
                    if not alts:
                        rec.outcome = UNSAT
                    elif act == SOLVE:
                        rec.outcome, model = do_solve(alts)
                        if model is not None:
                            res.generated.append(GeneratedInput(_complete(seed, model), "Solve", block.gid, ordinal))
                            rec.generated = 1
                    else:
                        rec.outcome, points = do_sample(alts)
                        for pt in points:
                            res.generated.append(GeneratedInput(_complete(seed, pt), "Sample", block.gid, ordinal))
                        rec.generated = len(points)
                    res.solver_outcomes[ordinal] = rec.outcome
                res.branches.append(rec)
                if act != SKIP and spent() > cfg.per_seed_budget:
                    res.budget_exceeded = True
                    log.debug("per-seed budget exhausted at branch %d", ordinal)
                    raise BudgetExceeded
                prefix.extend(taken_atoms)
                ordinal += 1
                block = fn.block(term.true_target if taken else term.false_target)
            elif isinstance(term, Jump):
                block = fn.block(term.target)
            elif isinstance(term, Call):
                if len(frames) >= MAX_CALL_DEPTH:
                    res.outcome = "Crash"
                    break
                frames.append((fn.id, fn.block(term.return_block).index))
                fn = prog.functions[term.fn]
                block = fn.blocks[0]
            elif isinstance(term, Return):
                if not frames:
                    break
                name, idx = frames.pop()
                fn = prog.functions[name]
                block = fn.blocks[idx]
            elif isinstance(term, Halt):
                break
            else:
                assert isinstance(term, Crash)
                res.outcome = "Crash"
                break
    except BudgetExceeded:
        pass
    if cfg.virtual:
        res.charge("execute", cost.concolic_instr * (steps - res.instructions))
    else:
        total = time.perf_counter() - wall0
        res.timing["execute"] = max(0.0, total - res.timing["solve"] - res.timing["sample"])
        res.cost = total
    res.instructions = steps
    res.prefix_len = len(prefix)
    return res
