"""Lightweight execution tree.

A node stands for one conditional execution reached by a particular prefix of
branch decisions. It keeps only its two successor links and the ICFG branch
site it executes. Ownership, depth and bookkeeping live in side tables so the
nodes themselves stay small.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

log = logging.getLogger(__name__)

UNEXPLORED = -1
# the path ended (halt, crash or budget) right after this decision
TERMINAL = -2
# the path continued past the depth bound and was not tracked further
TRUNCATED = -3

DEFAULT_DEPTH_BOUND = 15_000


class TreeNode:
    __slots__ = ("site", "succ")

    def __init__(self, site: int):
        self.site = site
        # succ[0] = false child, succ[1] = true child
        self.succ = [UNEXPLORED, UNEXPLORED]


@dataclass(frozen=True)
class OpenBranch:
    node: int
    taken: bool  # direction that is still unexplored
    site: int
    owner: int
    ordinal: int

    @property
    def id(self) -> int:
        return self.node * 2 + int(self.taken)


class DivergentPath(RuntimeError):
    """A seed's decisions disagree with the tree's recorded branch sites."""


@dataclass
class ExecutionTree:
    depth_bound: int = DEFAULT_DEPTH_BOUND
    nodes: List[TreeNode] = field(default_factory=list)
    root: int = UNEXPLORED
    # node id -> seed id that created it (and therefore owns its open branch)
    seed_of_node: List[int] = field(default_factory=list)
    depth: List[int] = field(default_factory=list)
    truncations: int = 0
    merged_seeds: int = 0

    def _new_node(self, site: int, owner: int, depth: int) -> int:
        self.nodes.append(TreeNode(site))
        self.seed_of_node.append(owner)
        self.depth.append(depth)
        return len(self.nodes) - 1

    def __len__(self) -> int:
        return len(self.nodes)

    def add_path(self, seed_id: int, decisions: Sequence[Tuple[int, bool]]) -> List[OpenBranch]:
        """Merge one decision sequence; returns the open branches it created."""
        self.merged_seeds += 1
        if not decisions:
            return []
        bound = min(len(decisions), self.depth_bound)
        if len(decisions) > self.depth_bound:
            self.truncations += 1
            log.info("path of seed %d truncated at depth %d", seed_id, self.depth_bound)
        created: List[OpenBranch] = []
        if self.root == UNEXPLORED:
            self.root = self._new_node(decisions[0][0], seed_id, 0)
            created.append(self._open_of(self.root, decisions[0][1]))
        node = self.root
        for d in range(bound):
            site, taken = decisions[d]
            n = self.nodes[node]
            if n.site != site:
                raise DivergentPath(f"depth {d}: tree has site {n.site}, seed {seed_id} executed {site}")
            nxt = n.succ[taken]
            if d + 1 >= bound:
                if nxt == UNEXPLORED:
                    n.succ[taken] = TERMINAL if bound == len(decisions) else TRUNCATED
                break
            if nxt < 0:
                nxt = self._new_node(decisions[d + 1][0], seed_id, d + 1)
                n.succ[taken] = nxt
                created.append(self._open_of(nxt, decisions[d + 1][1]))
            node = nxt
        return created

    def _open_of(self, node: int, taken_now: bool) -> OpenBranch:
        """The open branch a fresh node exposes: the side not just taken."""
        return OpenBranch(node, not taken_now, self.nodes[node].site, self.seed_of_node[node], self.depth[node])

    def is_open(self, node: int, taken: bool) -> bool:
        succ = self.nodes[node].succ
        return succ[taken] == UNEXPLORED and succ[not taken] != UNEXPLORED

    def open_branches(self) -> Iterator[OpenBranch]:
        for i, n in enumerate(self.nodes):
            for t in (False, True):
                if n.succ[t] == UNEXPLORED and n.succ[not t] != UNEXPLORED:
                    yield OpenBranch(i, t, n.site, self.seed_of_node[i], self.depth[i])

    def walk(self, decisions: Sequence[Tuple[int, bool]]) -> List[int]:
        """Node ids visited by a decision sequence (stops where the tree ends)."""
        out: List[int] = []
        node = self.root
        for site, taken in decisions[: self.depth_bound]:
            if node < 0 or self.nodes[node].site != site:
                break
            out.append(node)
            node = self.nodes[node].succ[taken]
        return out

    def prefix_log_probs(self, log_p) -> List[float]:
        """Sum of ``log_p(site, taken)`` over the decisions leading to each node."""
        acc = [0.0] * len(self.nodes)
        if self.root < 0:
            return acc
        stack = [self.root]
        while stack:
            i = stack.pop()
            n = self.nodes[i]
            for t in (False, True):
                c = n.succ[t]
                if c >= 0:
                    acc[c] = acc[i] + log_p(n.site, t)
                    stack.append(c)
        return acc

    def nodes_for_site(self, site: int) -> List[int]:
        return [i for i, n in enumerate(self.nodes) if n.site == site]
