"""Parser for the ``.tgt`` textual program format.

Grammar (whitespace, newlines and ``;`` separate tokens; ``#`` starts a
comment that runs to the end of the line)::

    program     := header* function+
    header      := "input" INT | "regs" INT | "buffer" NAME INT | "entry" NAME
    function    := "fn" NAME "{" block+ "}"
    block       := LABEL ":" attribute* instruction* terminator
    attribute   := "lines" INT | "loc" INT
    instruction := "load" REG INT
                 | "const" REG INT
                 | "mov" REG OPERAND
                 | BINOP REG REG OPERAND          # add sub mul div mod and or xor shl shr
                 | CMPOP REG REG OPERAND          # eq ne lt{u,s} le{u,s} gt{u,s} ge{u,s}
                 | "bufwrite" NAME REG OPERAND
                 | "bufread" REG NAME REG
                 | "assert" REG
    terminator  := "jmp" LABEL | "br" REG LABEL LABEL | "call" NAME LABEL
                 | "ret" | "halt" | "crash" NAME
    OPERAND     := REG | INT
    INT         := decimal | 0x-hex | 'c' (character literal) , optionally negative

The first function block is its entry block. The program entry is ``main``
unless an ``entry`` header names another function. ``lines`` defaults to the
number of instructions in the block (at least 1); ``loc`` pins the block's
edge-hash location (otherwise derived from the block id).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from .program import (
    BINARY_OPS,
    COMPARE_OPS,
    WORD_MASK,
    BasicBlock,
    Call,
    CondBranch,
    Crash,
    Function,
    Halt,
    Imm,
    Instruction,
    Jump,
    Reg,
    Return,
    TargetProgram,
    default_loc,
)


class ProgramError(ValueError):
    """Base class for errors reported while loading a program."""


class ParseError(ProgramError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


class SemanticError(ProgramError):
    pass


@dataclass
class Token:
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(r"'(?:\\.|[^'\\])'|[{}:]|[^\s{}:;#]+")

_TERMINATORS = {"jmp", "br", "call", "ret", "halt", "crash"}
_CMP_ALIASES = {"lt": "ltu", "le": "leu", "gt": "gtu", "ge": "geu"}


def tokenize(text: str) -> List[Token]:
    tokens = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        for m in _TOKEN_RE.finditer(line):
            tokens.append(Token(m.group(0), lineno, m.start() + 1))
    return tokens


def _strip_comment(raw: str) -> str:
    in_char = False
    for i, ch in enumerate(raw):
        if ch == "'":
            in_char = not in_char
        elif ch == "#" and not in_char:
            return raw[:i]
    return raw


class _Parser:
    def __init__(self, tokens: List[Token]):
        self.toks = tokens
        self.pos = 0

    # token helpers
    def peek(self, offset: int = 0) -> Optional[Token]:
        i = self.pos + offset
        return self.toks[i] if i < len(self.toks) else None

    def next(self, what: str) -> Token:
        tok = self.peek()
        if tok is None:
            last = self.toks[-1] if self.toks else Token("", 1, 1)
            raise ParseError(f"unexpected end of input, expected {what}", last.line, last.col)
        self.pos += 1
        return tok

    def expect(self, text: str) -> Token:
        tok = self.next(repr(text))
        if tok.text != text:
            raise ParseError(f"expected {text!r}, got {tok.text!r}", tok.line, tok.col)
        return tok

    def ident(self, what: str) -> Token:
        tok = self.next(what)
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_.]*", tok.text):
            raise ParseError(f"expected {what}, got {tok.text!r}", tok.line, tok.col)
        return tok

    def integer(self, what: str = "integer") -> int:
        tok = self.next(what)
        value = parse_int(tok.text)
        if value is None:
            raise ParseError(f"expected {what}, got {tok.text!r}", tok.line, tok.col)
        return value

    def reg(self) -> int:
        tok = self.next("register")
        m = re.fullmatch(r"r(\d+)", tok.text)
        if not m:
            raise ParseError(f"expected register, got {tok.text!r}", tok.line, tok.col)
        return int(m.group(1))

    def operand(self):
        tok = self.peek()
        if tok is not None and re.fullmatch(r"r\d+", tok.text):
            return Reg(self.reg())
        return Imm(self.integer("register or integer") & WORD_MASK)

    # grammar
    def program(self, name: str) -> TargetProgram:
        input_len = 0
        num_regs = 16
        entry = "main"
        buffers: Dict[str, int] = {}
        funcs: Dict[str, Function] = {}
        while self.peek() is not None:
            tok = self.next("declaration")
            if tok.text == "input":
                input_len = self.integer()
            elif tok.text == "regs":
                num_regs = self.integer()
            elif tok.text == "entry":
                entry = self.ident("function name").text
            elif tok.text == "buffer":
                bname = self.ident("buffer name").text
                buffers[bname] = self.integer("buffer size")
            elif tok.text == "fn":
                fn = self.function()
                if fn.id in funcs:
                    raise ParseError(f"duplicate function {fn.id!r}", tok.line, tok.col)
                funcs[fn.id] = fn
            else:
                raise ParseError(f"unknown declaration {tok.text!r}", tok.line, tok.col)
        if not funcs:
            raise SemanticError("program defines no functions")
        prog = TargetProgram(funcs, entry, input_len, num_regs, buffers, source_name=name)
        validate(prog)
        return prog

    def function(self) -> Function:
        fname = self.ident("function name").text
        self.expect("{")
        blocks: List[BasicBlock] = []
        while True:
            tok = self.peek()
            if tok is None:
                raise ParseError("unterminated function body", self.toks[-1].line, self.toks[-1].col)
            if tok.text == "}":
                self.pos += 1
                break
            blocks.append(self.block(fname, len(blocks)))
        if not blocks:
            raise ParseError(f"function {fname!r} has no blocks", tok.line, tok.col)
        fn = Function(fname, blocks)
        for b in blocks:
            if b.label in fn.label_index:
                raise SemanticError(f"duplicate block label {b.label!r} in function {fname!r}")
            fn.label_index[b.label] = b.index
        return fn

    def block(self, fname: str, index: int) -> BasicBlock:
        label_tok = self.ident("block label")
        self.expect(":")
        lines: Optional[int] = None
        loc: Optional[int] = None
        while self.peek() is not None and self.peek().text in ("lines", "loc"):
            attr = self.next("attribute").text
            if attr == "lines":
                lines = self.integer("line count")
                if lines < 1:
                    raise ParseError("line count must be >= 1", label_tok.line, label_tok.col)
            else:
                loc = self.integer("location id")
        instrs: List[Instruction] = []
        while True:
            tok = self.next("instruction or terminator")
            op = tok.text
            if op in _TERMINATORS:
                term = self.terminator(op)
                break
            instrs.append(self.instruction(tok))
        return BasicBlock(
            fn=fname,
            index=index,
            label=label_tok.text,
            instructions=instrs,
            terminator=term,
            line_count=lines if lines is not None else max(1, len(instrs)),
            loc=loc if loc is not None else default_loc(fname, index),
        )

    def instruction(self, tok: Token) -> Instruction:
        op = _CMP_ALIASES.get(tok.text, tok.text)
        if op == "load":
            return Instruction(op, (self.reg(), self.integer("byte index")))
        if op == "const":
            return Instruction(op, (self.reg(), self.integer("constant") & WORD_MASK))
        if op == "mov":
            return Instruction(op, (self.reg(), self.operand()))
        if op in BINARY_OPS or op in COMPARE_OPS:
            return Instruction(op, (self.reg(), self.reg(), self.operand()))
        if op == "bufwrite":
            return Instruction(op, (self.ident("buffer name").text, self.reg(), self.operand()))
        if op == "bufread":
            return Instruction(op, (self.reg(), self.ident("buffer name").text, self.reg()))
        if op == "assert":
            return Instruction(op, (self.reg(),))
        raise ParseError(f"unknown opcode {tok.text!r}", tok.line, tok.col)

    def terminator(self, op: str):
        if op == "jmp":
            return Jump(self.ident("block label").text)
        if op == "br":
            return CondBranch(self.reg(), self.ident("block label").text, self.ident("block label").text)
        if op == "call":
            return Call(self.ident("function name").text, self.ident("block label").text)
        if op == "ret":
            return Return()
        if op == "halt":
            return Halt()
        return Crash(self.ident("crash kind").text)


def parse_int(text: str) -> Optional[int]:
    if len(text) >= 3 and text[0] == "'" and text[-1] == "'":
        body = text[1:-1]
        if body.startswith("\\"):
            esc = {"n": 10, "t": 9, "0": 0, "\\": 92, "'": 39}
            return esc.get(body[1:])
        return ord(body) if len(body) == 1 else None
    try:
        return int(text, 0)
    except ValueError:
        return None


def _regs_of(instr: Instruction) -> List[int]:
    regs = []
    for a in instr.args:
        if isinstance(a, Reg):
            regs.append(a.index)
    op = instr.op
    if op in ("load", "const", "mov", "bufread") or op in BINARY_OPS or op in COMPARE_OPS:
        regs.append(instr.args[0])
    if op in BINARY_OPS or op in COMPARE_OPS:
        regs.append(instr.args[1])
    if op == "bufwrite":
        regs.append(instr.args[1])
    if op == "bufread":
        regs.append(instr.args[2])
    if op == "assert":
        regs.append(instr.args[0])
    return regs


def validate(prog: TargetProgram) -> None:
    """Check cross references and build per-function adjacency matrices."""
    if prog.entry not in prog.functions:
        raise SemanticError(f"entry function {prog.entry!r} is not defined")
    if prog.input_len < 0 or prog.num_regs < 1:
        raise SemanticError("input length must be >= 0 and register count >= 1")
    for fn in prog.functions.values():
        n = len(fn.blocks)
        fn.cfg = [[0] * n for _ in range(n)]
        fn.callees_per_block = {}
        for b in fn.blocks:
            where = f"{fn.id}:{b.label}"
            for instr in b.instructions:
                for r in _regs_of(instr):
                    if not 0 <= r < prog.num_regs:
                        raise SemanticError(f"{where}: register r{r} out of range (regs {prog.num_regs})")
                if instr.op == "load" and not 0 <= instr.args[1] < prog.input_len:
                    raise SemanticError(f"{where}: input byte {instr.args[1]} out of range (input {prog.input_len})")
                if instr.op in ("bufwrite", "bufread"):
                    bname = instr.args[0] if instr.op == "bufwrite" else instr.args[1]
                    if bname not in prog.buffers:
                        raise SemanticError(f"{where}: undefined buffer {bname!r}")
            term = b.terminator
            targets: List[str] = []
            if isinstance(term, Jump):
                targets = [term.target]
            elif isinstance(term, CondBranch):
                if not 0 <= term.reg < prog.num_regs:
                    raise SemanticError(f"{where}: register r{term.reg} out of range (regs {prog.num_regs})")
                if term.true_target == term.false_target:
                    raise SemanticError(f"{where}: conditional branch targets must be distinct")
                targets = [term.true_target, term.false_target]
            elif isinstance(term, Call):
                if term.fn not in prog.functions:
                    raise SemanticError(f"{where}: call to undefined function {term.fn!r}")
                targets = [term.return_block]
                fn.callees_per_block[b.index] = frozenset([term.fn])
            for t in targets:
                if t not in fn.label_index:
                    raise SemanticError(f"{where}: undefined block {t!r}")
                fn.cfg[b.index][fn.label_index[t]] = 1
        # every block must be reachable from the function entry
        seen = {0}
        stack = [0]
        while stack:
            i = stack.pop()
            for j in fn.successors(i):
                if j not in seen:
                    seen.add(j)
                    stack.append(j)
        unreachable = [fn.blocks[i].label for i in range(n) if i not in seen]
        if unreachable:
            raise SemanticError(f"function {fn.id!r}: unreachable blocks {unreachable}")


def parse_program(text: str, name: str = "<string>") -> TargetProgram:
    """Parse and validate a program in the ``.tgt`` format."""
    return _Parser(tokenize(text)).program(name)


def load_program(path) -> TargetProgram:
    from pathlib import Path

    p = Path(path)
    return parse_program(p.read_text(encoding="utf-8"), name=p.name)
