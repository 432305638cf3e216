"""Scoring open branches into two priority queues and serving seeds from them."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from ..symexec import SAMPLE, SKIP, SOLVE, ActionList
from .scoring import BranchStats, RewardIndex, normalize_log_difficulty, priority
from .tree import ExecutionTree, OpenBranch

HIGH = "high"
LOW = "low"


@dataclass
class OpenBranchEntry:
    ob: int
    node: int
    taken: bool
    site: int
    log_d: float
    R: int
    S: float
    action: str
    owner_seed: int
    branch_index_on_path: int
    demoted: bool = False

    @property
    def D(self) -> float:
        return math.exp(self.log_d)

    @property
    def id(self) -> int:
        return self.ob


class EmptyQueues(LookupError):
    pass


class BranchQueues:
    """Two max-priority queues ordered by (S, R, lower id first)."""

    def __init__(self):
        self.q_high: List[Tuple[float, int, int]] = []
        self.q_low: List[Tuple[float, int, int]] = []
        self.entries: Dict[int, OpenBranchEntry] = {}
        self.tier: Dict[int, str] = {}
        self.by_seed: Dict[Tuple[int, str], Set[int]] = {}

    def push(self, entry: OpenBranchEntry, tier: str) -> None:
        if entry.ob in self.tier:
            raise ValueError(f"entry {entry.ob} already queued")
        heap = self.q_high if tier == HIGH else self.q_low
        heapq.heappush(heap, (-entry.S, -entry.R, entry.ob))
        self.entries[entry.ob] = entry
        self.tier[entry.ob] = tier
        self.by_seed.setdefault((entry.owner_seed, tier), set()).add(entry.ob)

    def remove(self, ob: int) -> Optional[OpenBranchEntry]:
        entry = self.entries.pop(ob, None)
        if entry is None:
            return None
        tier = self.tier.pop(ob)
        self.by_seed[(entry.owner_seed, tier)].discard(ob)
        return entry

    def _top(self, heap) -> Optional[OpenBranchEntry]:
        while heap:
            _, _, ob = heap[0]
            if ob in self.entries and self.tier[ob] == (HIGH if heap is self.q_high else LOW):
                return self.entries[ob]
            heapq.heappop(heap)
        return None

    def peek(self, tier: str) -> Optional[OpenBranchEntry]:
        return self._top(self.q_high if tier == HIGH else self.q_low)

    def size(self, tier: str) -> int:
        return sum(1 for t in self.tier.values() if t == tier)

    def sizes(self) -> Tuple[int, int]:
        hi = sum(1 for t in self.tier.values() if t == HIGH)
        return hi, len(self.tier) - hi

    def high_empty(self) -> bool:
        return self.peek(HIGH) is None

    def __len__(self) -> int:
        return len(self.entries)

    def in_tier(self, seed: int, tier: str) -> List[OpenBranchEntry]:
        return [self.entries[ob] for ob in sorted(self.by_seed.get((seed, tier), ()))]


@dataclass(frozen=True)
class StrategyParams:
    lam: float = 0.1
    log_delta: float = -150.0 * math.log(10.0)
    gamma: float = 80.0
    # ablations: force every action to SOLVE or to SAMPLE
    force_action: Optional[str] = None


def score_open_branches(
    obs: Sequence[OpenBranch],
    tree: ExecutionTree,
    stats: BranchStats,
    rewards: RewardIndex,
    params: StrategyParams,
) -> List[OpenBranchEntry]:
    """Compute D, R, S and the action of each open branch."""
    prefix = tree.prefix_log_probs(stats.log_p)
    scored = []
    for ob in obs:
        log_d = prefix[ob.node] + stats.log_p(ob.site, ob.taken)
        target = rewards.icfg.successor(ob.site, ob.taken)
        scored.append((ob, log_d, rewards.reward(target)))
    log_p_min = min((d for _, d, _ in scored), default=0.0)
    out: List[OpenBranchEntry] = []
    for ob, log_d, R in scored:
        norm_d = normalize_log_difficulty(log_d, log_p_min)
        if params.force_action is not None:
            action = params.force_action
        else:
            action = SAMPLE if (log_d < params.log_delta and R > params.gamma) else SOLVE
        out.append(OpenBranchEntry(ob.id, ob.node, ob.taken, ob.site, log_d, R,
                                   priority(norm_d, R, params.lam), action, ob.owner, ob.ordinal))
    return out


def apply_loop_rule(entries: Iterable[OpenBranchEntry]) -> None:
    """Demote all but the first and last unrolled occurrences of a site on one seed path."""
    groups: Dict[Tuple[int, int], List[OpenBranchEntry]] = {}
    for e in entries:
        groups.setdefault((e.owner_seed, e.site), []).append(e)
    for group in groups.values():
        group.sort(key=lambda e: e.branch_index_on_path)
        for e in group[1:-1]:
            e.demoted = True


def build_queues(entries: Sequence[OpenBranchEntry]) -> BranchQueues:
    apply_loop_rule(entries)
    q = BranchQueues()
    for e in entries:
        q.push(e, HIGH if e.R > 0 and not e.demoted else LOW)
    return q


def search_and_sample_strategy(
    obs: Sequence[OpenBranch],
    tree: ExecutionTree,
    stats: BranchStats,
    rewards: RewardIndex,
    params: StrategyParams,
) -> BranchQueues:
    return build_queues(score_open_branches(obs, tree, stats, rewards, params))


def most_prioritized_seed(queues: BranchQueues) -> Tuple[int, ActionList, List[OpenBranchEntry], List[OpenBranchEntry]]:
    """Pop the best seed and the actions for every entry it owns in the served tier.

    Returns (seed id, actions, served entries, skipped entries).
    """
    tier = HIGH
    top = queues.peek(HIGH)
    if top is None:
        tier = LOW
        top = queues.peek(LOW)
    if top is None:
        raise EmptyQueues("both queues are empty")
    seed = top.owner_seed
    served = queues.in_tier(seed, tier)
    actions = ActionList({e.branch_index_on_path: e.action for e in served})
    skipped = queues.in_tier(seed, LOW) if tier == HIGH else []
    for e in skipped:
        actions.actions[e.branch_index_on_path] = SKIP
    for e in served:
        queues.remove(e.ob)
    return seed, actions, served, skipped
