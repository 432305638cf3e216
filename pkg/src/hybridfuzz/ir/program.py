"""Data model for the miniature target language.

A program is a set of functions made of basic blocks. Blocks hold a list of
word-sized register instructions and exactly one terminator. Every block is
also given a flat global id (``gid``) so that traces, bitmaps and the
coordinator can refer to it with a single integer.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

WORD_BITS = 64
WORD_MASK = (1 << WORD_BITS) - 1

BINARY_OPS = ("add", "sub", "mul", "div", "mod", "and", "or", "xor", "shl", "shr")
COMPARE_OPS = (
    "eq", "ne",
    "ltu", "leu", "gtu", "geu",
    "lts", "les", "gts", "ges",
)


@dataclass(frozen=True)
class Reg:
    index: int

    def __str__(self) -> str:
        return f"r{self.index}"


@dataclass(frozen=True)
class Imm:
    value: int

    def __str__(self) -> str:
        return str(self.value)


Operand = Union[Reg, Imm]


@dataclass(frozen=True)
class Instruction:
    """One non-terminating instruction.

    ``op`` is the opcode mnemonic; ``args`` layout depends on it:

    * ``load``     (dst: int, byte_index: int)
    * ``const``    (dst: int, value: int)
    * ``mov``      (dst: int, src: Operand)
    * binary/compare ops (dst: int, a: int, b: Operand)
    * ``bufwrite`` (buffer: str, index_reg: int, value: Operand)
    * ``bufread``  (dst: int, buffer: str, index_reg: int)
    * ``assert``   (reg: int,)
    """

    op: str
    args: tuple

    def __str__(self) -> str:
        return " ".join([self.op] + [_fmt_arg(a) for a in self.args])


def _fmt_arg(a) -> str:
    if isinstance(a, (Reg, Imm)):
        return str(a)
    return str(a)


# Terminators ---------------------------------------------------------------


@dataclass(frozen=True)
class Jump:
    target: str


@dataclass(frozen=True)
class CondBranch:
    reg: int
    true_target: str
    false_target: str


@dataclass(frozen=True)
class Call:
    fn: str
    return_block: str


@dataclass(frozen=True)
class Return:
    pass


@dataclass(frozen=True)
class Halt:
    pass


@dataclass(frozen=True)
class Crash:
    kind: str


Terminator = Union[Jump, CondBranch, Call, Return, Halt, Crash]


@dataclass
class BasicBlock:
    fn: str
    index: int
    label: str
    instructions: List[Instruction]
    terminator: Terminator
    line_count: int
    loc: int
    gid: int = -1

    @property
    def id(self) -> Tuple[str, int]:
        return (self.fn, self.index)

    @property
    def name(self) -> str:
        return f"{self.fn}:{self.label}"

    @property
    def is_conditional(self) -> bool:
        return isinstance(self.terminator, CondBranch)


@dataclass
class Function:
    id: str
    blocks: List[BasicBlock]
    # cfg[i][j] == 1 iff control can pass from block i to block j inside the
    # function (call sites link to their return block).
    cfg: List[List[int]] = field(default_factory=list)
    callees_per_block: Dict[int, frozenset] = field(default_factory=dict)
    label_index: Dict[str, int] = field(default_factory=dict)

    def block(self, label: str) -> BasicBlock:
        return self.blocks[self.label_index[label]]

    def successors(self, index: int) -> List[int]:
        return [j for j, bit in enumerate(self.cfg[index]) if bit]


@dataclass
class TargetProgram:
    functions: Dict[str, Function]
    entry: str
    input_len: int
    num_regs: int = 16
    buffers: Dict[str, int] = field(default_factory=dict)
    source_name: str = "<string>"
    blocks: List[BasicBlock] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.blocks:
            self._index_blocks()

    def _index_blocks(self) -> None:
        self.blocks = []
        for fn in self.functions.values():
            for b in fn.blocks:
                b.gid = len(self.blocks)
                self.blocks.append(b)

    def block(self, fn: str, label: str) -> BasicBlock:
        return self.functions[fn].block(label)

    def gid(self, fn: str, label: str) -> int:
        return self.block(fn, label).gid

    def resolve(self, fn: str, label: str) -> BasicBlock:
        return self.functions[fn].block(label)

    def entry_block(self, fn: Optional[str] = None) -> BasicBlock:
        return self.functions[fn or self.entry].blocks[0]

    @property
    def conditional_sites(self) -> List[int]:
        return [b.gid for b in self.blocks if b.is_conditional]

    @property
    def total_lines(self) -> int:
        return sum(b.line_count for b in self.blocks)


def default_loc(fn: str, index: int) -> int:
    """Deterministic pseudo-random location id used for edge hashing."""
    return zlib.crc32(f"{fn}/{index}".encode()) & 0xFFFF
