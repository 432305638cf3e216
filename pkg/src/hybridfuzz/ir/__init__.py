from .icfg import ICFG, build_icfg
from .interp import (
    BUDGET,
    CRASH,
    DEFAULT_STEP_BUDGET,
    NORMAL,
    InputLengthError,
    Trace,
    alu,
    execute,
    replay_edges,
)
from .parser import ParseError, ProgramError, SemanticError, load_program, parse_program
from .program import BasicBlock, Function, Instruction, TargetProgram

__all__ = [
    "BUDGET",
    "CRASH",
    "DEFAULT_STEP_BUDGET",
    "NORMAL",
    "BasicBlock",
    "Function",
    "ICFG",
    "InputLengthError",
    "Instruction",
    "ParseError",
    "ProgramError",
    "SemanticError",
    "TargetProgram",
    "Trace",
    "alu",
    "build_icfg",
    "execute",
    "load_program",
    "parse_program",
    "replay_edges",
]
