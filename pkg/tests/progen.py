"""Random well-formed target programs and a brute-force reward oracle."""

from __future__ import annotations

import random
from collections import deque
from typing import Set

from hybridfuzz.ir import TargetProgram, parse_program
from hybridfuzz.ir.program import Call, CondBranch, Jump


def random_program_text(rng: random.Random, max_blocks: int = 30, max_functions: int = 3) -> str:
    n_fn = rng.randint(1, max_functions)
    total = rng.randint(n_fn, max_blocks)
    sizes = [1] * n_fn
    for _ in range(total - n_fn):
        sizes[rng.randrange(n_fn)] += 1
    names = ["main"] + [f"f{i}" for i in range(1, n_fn)]
    out = ["input 1"]
    for fi, (name, n) in enumerate(zip(names, sizes)):
        out.append(f"fn {name} {{")
        for i in range(n):
            out.append(f"b{i}: lines {rng.randint(1, 9)}")
            out.append("  load r1 0")
            last = i == n - 1
            r = rng.random()
            if last:
                out.append("  halt" if fi == 0 or r < 0.3 else "  ret")
            elif r < 0.3:
                out.append(f"  jmp b{i + 1}")
            elif r < 0.7 and n > 1:
                other = rng.choice([j for j in range(n) if j != i + 1])
                a, b = (f"b{i + 1}", f"b{other}") if rng.random() < 0.5 else (f"b{other}", f"b{i + 1}")
                out.append(f"  br r1 {a} {b}")
            elif r < 0.9 and n_fn > 1:
                out.append(f"  call {rng.choice(names[1:])} b{i + 1}")
            else:
                out.append(f"  jmp b{i + 1}")
        out.append("}")
    return "\n".join(out) + "\n"


def random_program(rng: random.Random, max_blocks: int = 30, max_functions: int = 3) -> TargetProgram:
    return parse_program(random_program_text(rng, max_blocks, max_functions), "random")


def bfs_reward(prog: TargetProgram, start: int, covered: Set[int]) -> int:
    """Lines of uncovered blocks reachable from ``start`` by plain graph search.

    Follows jumps, both branch targets, calls into the callee entry and the
    call's continuation block. Never follows a return into a caller.
    """
    seen = {start}
    queue = deque([start])
    while queue:
        b = prog.blocks[queue.popleft()]
        fn = prog.functions[b.fn]
        term = b.terminator
        succ = []
        if isinstance(term, Jump):
            succ = [fn.block(term.target).gid]
        elif isinstance(term, CondBranch):
            succ = [fn.block(term.true_target).gid, fn.block(term.false_target).gid]
        elif isinstance(term, Call):
            succ = [prog.functions[term.fn].blocks[0].gid, fn.block(term.return_block).gid]
        for s in succ:
            if s not in seen:
                seen.add(s)
                queue.append(s)
    return sum(prog.blocks[g].line_count for g in seen if g not in covered)
