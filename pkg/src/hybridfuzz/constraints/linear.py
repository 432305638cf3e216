"""Linear expressions, atoms and path conditions over input bytes.

Variables are input byte indices; ``x3`` is the fourth input byte and always
ranges over 0..255. A linear atom relates an exact integer ``LinExpr`` to
zero. Atoms that could not be normalised to linear form carry an expression
tree instead (``tag``) and compare its 64-bit value against zero.

Expression tree nodes are plain tuples so they hash and compare cheaply:

* ``("lin", LinExpr)``   value of the expression reduced mod 2**64
* ``("const", v)``       a word constant
* ``("op", name, a, b)`` binary/compare opcode applied with the interpreter ALU
* ``("atom", Atom)``     1 if the linear atom holds, else 0
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..ir.interp import alu
from ..ir.program import WORD_MASK

BYTE_MAX = 255
RELS = ("==", "!=", "<", "<=", ">", ">=")
NEGATE = {"==": "!=", "!=": "==", "<": ">=", ">=": "<", "<=": ">", ">": "<="}


class LinExpr:
    """Integer affine form ``sum(c_i * x_i) + const`` with no zero coefficients."""

    __slots__ = ("coeffs", "const", "_hash")

    def __init__(self, coeffs: Optional[Mapping[int, int]] = None, const: int = 0):
        self.coeffs: Dict[int, int] = {v: c for v, c in sorted((coeffs or {}).items()) if c != 0}
        self.const = int(const)
        self._hash: Optional[int] = None

    @classmethod
    def var(cls, index: int, coeff: int = 1) -> "LinExpr":
        return cls({index: coeff})

    @classmethod
    def constant(cls, value: int) -> "LinExpr":
        return cls(None, value)

    @property
    def vars(self) -> Tuple[int, ...]:
        return tuple(self.coeffs)

    def is_constant(self) -> bool:
        return not self.coeffs

    def __add__(self, other) -> "LinExpr":
        if isinstance(other, int):
            return LinExpr(self.coeffs, self.const + other)
        out = dict(self.coeffs)
        for v, c in other.coeffs.items():
            out[v] = out.get(v, 0) + c
        return LinExpr(out, self.const + other.const)

    def __neg__(self) -> "LinExpr":
        return LinExpr({v: -c for v, c in self.coeffs.items()}, -self.const)

    def __sub__(self, other) -> "LinExpr":
        if isinstance(other, int):
            return LinExpr(self.coeffs, self.const - other)
        return self + (-other)

    def scale(self, k: int) -> "LinExpr":
        return LinExpr({v: c * k for v, c in self.coeffs.items()}, self.const * k)

    def evaluate(self, assignment: Mapping[int, int]) -> int:
        return self.const + sum(c * assignment[v] for v, c in self.coeffs.items())

    def bounds(self, lo: Mapping[int, int] = None, hi: Mapping[int, int] = None) -> Tuple[int, int]:
        """Exact min/max over the given per-variable intervals (bytes by default)."""
        mn = mx = self.const
        for v, c in self.coeffs.items():
            a = lo[v] if lo is not None else 0
            b = hi[v] if hi is not None else BYTE_MAX
            if c > 0:
                mn += c * a
                mx += c * b
            else:
                mn += c * b
                mx += c * a
        return mn, mx

    def __eq__(self, other) -> bool:
        return isinstance(other, LinExpr) and self.coeffs == other.coeffs and self.const == other.const

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((tuple(self.coeffs.items()), self.const))
        return self._hash

    def __repr__(self) -> str:
        return f"LinExpr({self})"

    def __str__(self) -> str:
        return _fmt_terms(self.coeffs, self.const)


def _fmt_terms(coeffs: Mapping[int, int], const: int) -> str:
    parts: List[str] = []
    for v, c in coeffs.items():
        mag = abs(c)
        term = f"x{v}" if mag == 1 else f"{mag}*x{v}"
        if not parts:
            parts.append(term if c > 0 else f"-{term}")
        else:
            parts.append(("+ " if c > 0 else "- ") + term)
    if const or not parts:
        if not parts:
            parts.append(str(const))
        else:
            parts.append(("+ " if const > 0 else "- ") + str(abs(const)))
    return " ".join(parts)


# expression trees -------------------------------------------------------------


def expr_vars(node) -> Iterator[int]:
    kind = node[0]
    if kind == "lin":
        yield from node[1].coeffs
    elif kind == "op":
        yield from expr_vars(node[2])
        yield from expr_vars(node[3])
    elif kind == "atom":
        yield from node[1].support


def eval_expr(node, assignment: Mapping[int, int]) -> int:
    """Word value of an expression tree. Raises ZeroDivisionError like the CPU would."""
    kind = node[0]
    if kind == "lin":
        return node[1].evaluate(assignment) & WORD_MASK
    if kind == "const":
        return node[1]
    if kind == "op":
        return alu(node[1], eval_expr(node[2], assignment), eval_expr(node[3], assignment))
    if kind == "atom":
        return int(node[1].holds(assignment))
    raise ValueError(f"bad expression node {node!r}")


_SIGN = np.uint64(1 << 63)
_SHIFT_MASK = np.uint64(63)


def eval_expr_np(node, cols: Mapping[int, np.ndarray], valid: np.ndarray) -> np.ndarray:
    """Vectorised :func:`eval_expr` over uint64 columns.

    ``valid`` is cleared in place wherever a division by zero occurs.
    """
    kind = node[0]
    n = valid.shape[0]
    if kind == "const":
        return np.full(n, node[1], dtype=np.uint64)
    if kind == "lin":
        lin = node[1]
        out = np.full(n, lin.const & WORD_MASK, dtype=np.uint64)
        for v, c in lin.coeffs.items():
            out += cols[v] * np.uint64(c & WORD_MASK)
        return out
    if kind == "atom":
        return eval_atom_np(node[1], cols, valid).astype(np.uint64)
    op = node[1]
    a = eval_expr_np(node[2], cols, valid)
    b = eval_expr_np(node[3], cols, valid)
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op in ("div", "mod"):
        zero = b == 0
        valid &= ~zero
        safe = np.where(zero, np.uint64(1), b)
        return a // safe if op == "div" else a % safe
    if op == "and":
        return a & b
    if op == "or":
        return a | b
    if op == "xor":
        return a ^ b
    if op == "shl":
        return a << (b & _SHIFT_MASK)
    if op == "shr":
        return a >> (b & _SHIFT_MASK)
    if op in ("lts", "les", "gts", "ges"):
        a, b, op = a ^ _SIGN, b ^ _SIGN, op[:2] + "u"
    cmp = {
        "eq": np.equal, "ne": np.not_equal,
        "ltu": np.less, "leu": np.less_equal, "gtu": np.greater, "geu": np.greater_equal,
    }[op]
    return cmp(a, b).astype(np.uint64)


def fmt_expr(node) -> str:
    kind = node[0]
    if kind == "lin":
        return f"[{node[1]}]"
    if kind == "const":
        return str(node[1])
    if kind == "atom":
        return f"[{node[1].format()}]"
    return f"{node[1]}({fmt_expr(node[2])}, {fmt_expr(node[3])})"


# atoms ------------------------------------------------------------------------


@dataclass(frozen=True)
class Atom:
    """``lhs rel 0`` for linear atoms; ``value(tag) rel 0`` when ``tag`` is set."""

    lhs: LinExpr
    rel: str
    tag: Optional[tuple] = None

    def __post_init__(self):
        if self.rel not in RELS:
            raise ValueError(f"unknown relation {self.rel!r}")
        if self.tag is not None and self.rel not in ("==", "!="):
            raise ValueError("nonlinear atoms compare with == or != only")

    @classmethod
    def compare(cls, a: LinExpr, rel: str, b) -> "Atom":
        return cls(a - b, rel)

    @classmethod
    def nonlinear(cls, tag: tuple, nonzero: bool = True) -> "Atom":
        return cls(LinExpr(), "!=" if nonzero else "==", tag)

    @property
    def is_linear(self) -> bool:
        return self.tag is None

    @property
    def support(self) -> Tuple[int, ...]:
        if self.tag is None:
            return self.lhs.vars
        return tuple(sorted(set(expr_vars(self.tag))))

    def negate(self) -> "Atom":
        return Atom(self.lhs, NEGATE[self.rel], self.tag)

    def holds(self, assignment: Mapping[int, int]) -> bool:
        if self.tag is None:
            val = self.lhs.evaluate(assignment)
        else:
            try:
                val = eval_expr(self.tag, assignment)
            except ZeroDivisionError:
                return False
        return _REL_FN[self.rel](val)

    def format(self) -> str:
        if self.tag is not None:
            return f"{fmt_expr(self.tag)} {self.rel} 0"
        const = -self.lhs.const
        left = _fmt_terms(self.lhs.coeffs, 0) if self.lhs.coeffs else "0"
        return f"{left} {self.rel} {const}"

    def __str__(self) -> str:
        return self.format()


_REL_FN = {
    "==": lambda v: v == 0,
    "!=": lambda v: v != 0,
    "<": lambda v: v < 0,
    "<=": lambda v: v <= 0,
    ">": lambda v: v > 0,
    ">=": lambda v: v >= 0,
}

_REL_NP = {
    "==": np.equal, "!=": np.not_equal, "<": np.less,
    "<=": np.less_equal, ">": np.greater, ">=": np.greater_equal,
}


def eval_atom_np(atom: Atom, cols: Mapping[int, np.ndarray], valid: np.ndarray) -> np.ndarray:
    """Vectorised :meth:`Atom.holds`. ``cols`` hold byte values as uint64."""
    if atom.tag is not None:
        val = eval_expr_np(atom.tag, cols, valid)
        out = (val != 0) if atom.rel == "!=" else (val == 0)
        return out & valid
    lo, hi = atom.lhs.bounds()
    n = valid.shape[0]
    if -(1 << 62) < lo and hi < (1 << 62):
        acc = np.full(n, atom.lhs.const, dtype=np.int64)
        for v, c in atom.lhs.coeffs.items():
            acc += cols[v].astype(np.int64) * np.int64(c)
    else:
        acc = np.full(n, atom.lhs.const, dtype=object)
        for v, c in atom.lhs.coeffs.items():
            acc = acc + cols[v].astype(object) * c
    return _REL_NP[atom.rel](acc, 0).astype(bool)


# path conditions --------------------------------------------------------------


@dataclass
class PathCondition:
    atoms: List[Atom] = field(default_factory=list)

    @property
    def vars(self) -> Tuple[int, ...]:
        seen = set()
        for a in self.atoms:
            seen.update(a.support)
        return tuple(sorted(seen))

    @property
    def dim(self) -> int:
        return len(self.vars)

    @property
    def linear_atoms(self) -> List[Atom]:
        return [a for a in self.atoms if a.is_linear]

    @property
    def nonlinear_atoms(self) -> List[Atom]:
        return [a for a in self.atoms if not a.is_linear]

    def conj(self, *atoms: Atom) -> "PathCondition":
        return PathCondition(self.atoms + list(atoms))

    def holds(self, assignment: Mapping[int, int]) -> bool:
        return all(a.holds(assignment) for a in self.atoms)

    def serialize(self) -> str:
        return "\n".join(a.format() for a in self.atoms)

    def __len__(self) -> int:
        return len(self.atoms)

    def __iter__(self):
        return iter(self.atoms)


# text form --------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(\d+)|x(\d+)|([A-Za-z_]+)|(\[|\]|\(|\)|,|\*|\+|-|==|!=|<=|>=|<|>))")


class _Tokens:
    def __init__(self, text: str):
        self.items: List[Tuple[str, str]] = []
        pos = 0
        text = text.rstrip()
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if not m or m.end() == pos:
                raise ValueError(f"cannot parse atom near {text[pos:]!r}")
            num, var, word, sym = m.groups()
            if num is not None:
                self.items.append(("num", num))
            elif var is not None:
                self.items.append(("var", var))
            elif word is not None:
                self.items.append(("word", word))
            else:
                self.items.append(("sym", sym))
            pos = m.end()
        self.i = 0

    def peek(self) -> Optional[Tuple[str, str]]:
        return self.items[self.i] if self.i < len(self.items) else None

    def take(self, expect: Optional[str] = None) -> Tuple[str, str]:
        tok = self.peek()
        if tok is None or (expect is not None and tok[1] != expect):
            raise ValueError(f"expected {expect or 'token'}, got {tok}")
        self.i += 1
        return tok


def _parse_lin(t: _Tokens) -> LinExpr:
    out = LinExpr()
    sign = 1
    first = True
    while True:
        tok = t.peek()
        if tok is None:
            break
        if tok[1] in ("+", "-"):
            t.take()
            sign = 1 if tok[1] == "+" else -1
            tok = t.peek()
        elif not first:
            break
        if tok is None:
            raise ValueError("dangling operator")
        if tok[0] == "num":
            t.take()
            val = int(tok[1])
            nxt = t.peek()
            if nxt is not None and nxt[1] == "*":
                t.take()
                _, v = t.take()
                out = out + LinExpr.var(int(v), sign * val)
            else:
                out = out + sign * val
        elif tok[0] == "var":
            t.take()
            out = out + LinExpr.var(int(tok[1]), sign)
        else:
            break
        sign = 1
        first = False
    return out


def _parse_expr(t: _Tokens):
    tok = t.take()
    if tok[1] == "[":
        start = t.i
        depth = 0
        # an inner atom contains a relation; a plain linear form does not
        while True:
            k = t.items[t.i]
            if k[1] == "[":
                depth += 1
            if k[1] == "]":
                if depth == 0:
                    break
                depth -= 1
            t.i += 1
        inner = _Tokens("")
        inner.items = t.items[start : t.i]
        t.take("]")
        if any(k[1] in RELS for k in inner.items):
            return ("atom", _parse_atom_tokens(inner))
        return ("lin", _parse_lin(inner))
    if tok[0] == "num":
        return ("const", int(tok[1]))
    if tok[0] == "word":
        t.take("(")
        a = _parse_expr(t)
        t.take(",")
        b = _parse_expr(t)
        t.take(")")
        return ("op", tok[1], a, b)
    raise ValueError(f"unexpected token {tok}")


def _parse_atom_tokens(t: _Tokens) -> Atom:
    tok = t.peek()
    if tok is not None and (tok[0] == "word" or tok[1] == "["):
        tag = _parse_expr(t)
        _, rel = t.take()
        t.take("0")
        if tag[0] == "lin":
            return Atom(tag[1], rel)
        return Atom(LinExpr(), rel, tag)
    lhs = _parse_lin(t)
    _, rel = t.take()
    if rel not in RELS:
        raise ValueError(f"expected relation, got {rel!r}")
    rhs = _parse_lin(t)
    return Atom(lhs - rhs, rel)


def parse_atom(text: str) -> Atom:
    t = _Tokens(text)
    atom = _parse_atom_tokens(t)
    if t.peek() is not None:
        raise ValueError(f"trailing input in atom {text!r}")
    return atom


def parse_path_condition(text: str) -> PathCondition:
    return PathCondition([parse_atom(line) for line in text.splitlines() if line.strip()])


def assignment_from_bytes(data: Sequence[int], vars_: Iterable[int]) -> Dict[int, int]:
    return {v: data[v] for v in vars_}
