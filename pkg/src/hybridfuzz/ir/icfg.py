"""Interprocedural control-flow graph.

Edges are keyed by global block ids. Three kinds exist:

* ``flow``   - jump / conditional branch targets inside a function
* ``call``   - call site to callee entry block
* ``return`` - callee ``ret`` block back to the call site's return block

The per-function adjacency matrices additionally contain the call-site to
return-block summary link so that intra-function reachability flows past
calls. That summary link is not an executable edge and is not in ``edges``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Set, Tuple

import numpy as np

from .program import Call, CondBranch, Jump, Return, TargetProgram

Edge = Tuple[int, int]


@dataclass
class ICFG:
    program: TargetProgram
    edges: Dict[Edge, str] = field(default_factory=dict)
    adjacency: Dict[str, np.ndarray] = field(default_factory=dict)
    # transitive-reflexive closure of ``adjacency`` per function
    reach: Dict[str, np.ndarray] = field(default_factory=dict)
    # block gid -> functions called from blocks reachable from it (same function)
    reachable_functions: Dict[int, FrozenSet[str]] = field(default_factory=dict)
    # branch site gid -> (true target gid, false target gid)
    branch_targets: Dict[int, Tuple[int, int]] = field(default_factory=dict)

    def edge_kind(self, edge: Edge) -> str:
        return self.edges[edge]

    def __contains__(self, edge: Edge) -> bool:
        return edge in self.edges

    def successor(self, site: int, taken: bool) -> int:
        t, f = self.branch_targets[site]
        return t if taken else f

    def describe(self, edge: Edge) -> str:
        src, dst = edge
        return f"{self.program.blocks[src].name}->{self.program.blocks[dst].name}"


def _closure(adj: np.ndarray) -> np.ndarray:
    n = adj.shape[0]
    reach = adj.astype(bool) | np.eye(n, dtype=bool)
    # Warshall over boolean matrices
    for k in range(n):
        reach |= reach[:, k : k + 1] & reach[k : k + 1, :]
    return reach


def build_icfg(p: TargetProgram) -> ICFG:
    g = ICFG(p)
    ret_blocks: Dict[str, List[int]] = {
        name: [b.gid for b in fn.blocks if isinstance(b.terminator, Return)]
        for name, fn in p.functions.items()
    }
    for name, fn in p.functions.items():
        g.adjacency[name] = np.array(fn.cfg, dtype=np.uint8).reshape(len(fn.blocks), len(fn.blocks))
        for b in fn.blocks:
            term = b.terminator
            if isinstance(term, Jump):
                g.edges[(b.gid, fn.block(term.target).gid)] = "flow"
            elif isinstance(term, CondBranch):
                t = fn.block(term.true_target).gid
                f = fn.block(term.false_target).gid
                g.edges[(b.gid, t)] = "flow"
                g.edges[(b.gid, f)] = "flow"
                g.branch_targets[b.gid] = (t, f)
            elif isinstance(term, Call):
                callee = p.functions[term.fn]
                ret_gid = fn.block(term.return_block).gid
                g.edges[(b.gid, callee.blocks[0].gid)] = "call"
                for r in ret_blocks[term.fn]:
                    g.edges[(r, ret_gid)] = "return"
    for name, fn in p.functions.items():
        reach = _closure(g.adjacency[name])
        g.reach[name] = reach
        for b in fn.blocks:
            called: Set[str] = set()
            for j in np.flatnonzero(reach[b.index]):
                called |= fn.callees_per_block.get(int(j), frozenset())
            g.reachable_functions[b.gid] = frozenset(called)
    return g
