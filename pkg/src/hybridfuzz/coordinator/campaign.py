"""Campaign driver: one fuzzer and one coordinator sharing a clock.

In lockstep mode both sides run on a virtual clock: every coordinator
operation is charged from the cost model, then the fuzzer executes mutants
until it has caught up with the coordinator's time. This makes campaigns
bit-for-bit reproducible. Without lockstep the fuzzer runs in its own thread
and all times are wall-clock.
"""

from __future__ import annotations

import logging
import math
import threading
import time
from collections import Counter, deque
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Deque, Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from ..config import TREE_MODES, EngineConfig
from ..fuzzer.corpus import CorpusDir
from ..fuzzer.engine import Fuzzer, Seed
from ..ir.icfg import ICFG, build_icfg
from ..ir.interp import execute
from ..ir.program import TargetProgram
from ..symexec import SAMPLE, SKIP, SOLVE, ActionList, ConcolicResult, CostModel, SymConfig, concolic_with_sampling
from .lob import LobFilter
from .scoring import BranchStats, RewardIndex
from .strategy import (
    BranchQueues,
    EmptyQueues,
    StrategyParams,
    build_queues,
    most_prioritized_seed,
    score_open_branches,
)
from .tree import DivergentPath, ExecutionTree, OpenBranch

log = logging.getLogger(__name__)

PREFIX_RECORD_LIMIT = 16


# clocks and fuzzer handles ----------------------------------------------------


class VirtualClock:
    virtual = True

    def __init__(self):
        self.t = 0.0

    def now(self) -> float:
        return self.t

    def advance(self, dt: float) -> None:
        self.t += dt


class WallClock:
    virtual = False

    def __init__(self):
        self.t0 = time.perf_counter()

    def now(self) -> float:
        return time.perf_counter() - self.t0

    def advance(self, dt: float) -> None:
        pass


class _FuzzerHandleBase:
    def __init__(self, fuzzer: Fuzzer, cost: CostModel, budget: float, period: float, max_execs: Optional[int]):
        self.fuzzer = fuzzer
        self.cost = cost
        self.budget = budget
        self.period = period
        self.max_execs = max_execs
        self.mark = -1
        self.timeline: List[Tuple[float, int]] = [(0.0, 0)]
        self._next_sample = period

    @property
    def exhausted(self) -> bool:
        return self.max_execs is not None and self.fuzzer.stats.execs >= self.max_execs

    def _sample(self, now: float) -> None:
        while now >= self._next_sample and self._next_sample <= self.budget + 1e-9:
            self.timeline.append((round(self._next_sample, 9), self.fuzzer.edge_coverage))
            self._next_sample += self.period

    def _drain(self) -> List[Seed]:
        new = self.fuzzer.seeds_since(self.mark)
        self.mark = self.fuzzer.note_sync()
        return new

    def _covered_blocks(self) -> Set[int]:
        out = {self.fuzzer.program.entry_block().gid}
        out.update(dst for _, dst in self.fuzzer.covered_edges)
        return out


class LockstepFuzzer(_FuzzerHandleBase):
    """Fuzzer driven synchronously up to the coordinator's virtual time."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.time = 0.0

    def now(self) -> float:
        return self.time

    def add_initial(self, data: bytes) -> Seed:
        seed = self.fuzzer.add_initial(data)
        self.time += self.cost.fuzz_exec
        return seed

    def advance_to(self, t: float) -> None:
        t = min(t, self.budget)
        fz = self.fuzzer
        cost = self.cost
        while self.time < t and not self.exhausted:
            r = fz.fuzz_step()
            self.time += cost.fuzz_exec + cost.fuzz_step * r.trace.steps
            if self.time >= self._next_sample:
                self._sample(self.time)

    def import_input(self, data: bytes, origin: str, parent: int, site: int, retrieved: bool) -> bool:
        admitted, trace = self.fuzzer.import_seed(data, origin, parent, site, retrieved)
        self.time += self.cost.exec_cost(trace.steps)
        self._sample(self.time)
        return admitted

    def drain(self) -> List[Seed]:
        return self._drain()

    def hit_counts(self) -> Dict[Tuple[int, bool], int]:
        return self.fuzzer.hit_counts()

    def covered_blocks(self) -> Set[int]:
        return self._covered_blocks()

    def finish(self) -> None:
        self.advance_to(self.budget)
        self._sample(self.budget)
        if self.timeline[-1][0] < self.budget:
            self.timeline.append((self.budget, self.fuzzer.edge_coverage))


class ThreadedFuzzer(_FuzzerHandleBase):
    """Fuzzer running in a background thread; the coordinator talks to it under a lock."""

    def __init__(self, *args, clock: WallClock, **kwargs):
        super().__init__(*args, **kwargs)
        self.clock = clock
        self.lock = threading.Lock()
        self.stop = threading.Event()
        self.thread = threading.Thread(target=self._loop, name="fuzzer", daemon=True)

    def now(self) -> float:
        return self.clock.now()

    def add_initial(self, data: bytes) -> Seed:
        with self.lock:
            return self.fuzzer.add_initial(data)

    def start(self) -> None:
        self.thread.start()

    def _loop(self) -> None:
        while not self.stop.is_set() and self.clock.now() < self.budget and not self.exhausted:
            with self.lock:
                self.fuzzer.fuzz_step()
                self._sample(self.clock.now())
            time.sleep(0)

    def advance_to(self, t: float) -> None:
        pass

    def import_input(self, data: bytes, origin: str, parent: int, site: int, retrieved: bool) -> bool:
        with self.lock:
            admitted, _ = self.fuzzer.import_seed(data, origin, parent, site, retrieved)
            return admitted

    def drain(self) -> List[Seed]:
        with self.lock:
            return self._drain()

    def hit_counts(self) -> Dict[Tuple[int, bool], int]:
        with self.lock:
            return self.fuzzer.hit_counts()

    def covered_blocks(self) -> Set[int]:
        with self.lock:
            return self._covered_blocks()

    def finish(self) -> None:
        remaining = self.budget - self.clock.now()
        if remaining > 0 and not self.exhausted:
            self.thread.join(remaining)
        self.stop.set()
        self.thread.join()
        with self.lock:
            end = min(self.clock.now(), self.budget)
            self._sample(end)
            self.timeline.append((round(end, 6), self.fuzzer.edge_coverage))


# coordinator ------------------------------------------------------------------


class Coordinator:
    def __init__(
        self,
        program: TargetProgram,
        icfg: ICFG,
        cfg: EngineConfig,
        handle,
        clock,
        cost: CostModel,
        rng: np.random.Generator,
        record_pc: bool = False,
    ):
        self.program = program
        self.icfg = icfg
        self.cfg = cfg
        self.mode = cfg.mode
        self.handle = handle
        self.clock = clock
        self.cost = cost
        self.rng = rng
        self.virtual = clock.virtual
        self.sym_cfg = SymConfig(
            k_dim=cfg.k_dim,
            sample_poly=cfg.sample_poly,
            sample_box=cfg.sample_box,
            per_seed_budget=cfg.per_seed_budget,
            solve_seconds=cfg.solve_seconds,
            step_budget=cfg.step_budget,
            virtual=self.virtual,
            cost=cost,
            record_pc=record_pc,
        )
        force = {"NS": SOLVE, "AllS": SAMPLE}.get(self.mode)
        self.params = StrategyParams(cfg.lam, cfg.log_delta, cfg.gamma_for(program.total_lines), force)
        self.tree = ExecutionTree(cfg.depth_bound) if self.mode in TREE_MODES else None
        self.rewards = RewardIndex(icfg)
        self.queues = BranchQueues()
        self.lob = LobFilter(icfg, cfg.bitmap_size)
        self.pending: Dict[int, OpenBranch] = {}
        self.owned: Dict[int, Set[int]] = {}
        self.seeds: Dict[int, Seed] = {}
        self.prefixes: Dict[int, List[Tuple[int, bool]]] = {}
        self.lob_explore: Dict[int, Set[int]] = {}
        self.decision_counts: Dict[int, int] = {}
        self.fifo: Deque[int] = deque()
        self.actions = Counter()
        self.outcomes = Counter()
        self.phase_times = Counter()
        self.events: List[dict] = []
        self.queue_timeline: List[Tuple[float, int, int]] = []
        self.pc_dump: List[str] = []
        self.first_half_times: List[float] = []
        self.work = 0.0
        self.sleep = 0.0
        self.last_first_half = -math.inf
        self._stale_scores = False

    # time accounting ------------------------------------------------------------

    @contextmanager
    def _work(self, phase: str):
        """Account one unit of coordinator work; the body yields a virtual cost."""
        box = [0.0]
        t0 = self.clock.now()
        yield box
        if self.virtual:
            self.clock.advance(box[0])
            self.handle.advance_to(self.clock.now())
            spent = box[0]
        else:
            spent = self.clock.now() - t0
        self.work += spent
        self.phase_times[phase] += spent

    def _wait(self) -> None:
        if self.virtual:
            self.clock.advance(self.cfg.poll)
            self.handle.advance_to(self.clock.now())
            self.sleep += self.cfg.poll
        else:
            t0 = self.clock.now()
            time.sleep(self.cfg.poll)
            self.sleep += self.clock.now() - t0

    # main loop --------------------------------------------------------------------

    def run(self) -> None:
        budget = self.cfg.budget
        period = self.cfg.period
        fifo_mode = self.mode in ("LOB", "NQ-NS")
        while self.clock.now() < budget:
            now = self.clock.now()
            if fifo_mode:
                if now - self.last_first_half >= period or not self.fifo:
                    self.first_half()
                if self.fifo:
                    self.serve_fifo()
                    continue
            else:
                if now - self.last_first_half >= period or self.queues.high_empty():
                    self.first_half()
                if len(self.queues):
                    self.serve_queue()
                    continue
            self._wait()

    def first_half(self) -> None:
        period_due = self.clock.now() - self.last_first_half >= self.cfg.period
        self.first_half_times.append(self.clock.now())
        with self._work("sync") as box:
            new = self.handle.drain()
            for seed in new:
                box[0] += self._sync_seed(seed)
        if self.mode in ("FULL", "NS", "AllS") and (new or period_due or self._stale_scores):
            with self._work("strategy") as box:
                box[0] += self._rescore()
        self.last_first_half = self.clock.now()
        hi, lo = self.queues.sizes() if self.mode in ("FULL", "NS", "AllS") else (len(self.fifo), 0)
        self.queue_timeline.append((round(self.clock.now(), 9), hi, lo))

    def _sync_seed(self, seed: Seed) -> float:
        trace = execute(self.program, seed.data, self.cfg.step_budget)
        decisions = trace.branch_decisions
        cost = self.cost.exec_cost(trace.steps) + self.cost.tree_decision * len(decisions)
        self.seeds[seed.id] = seed
        self.prefixes[seed.id] = decisions[:PREFIX_RECORD_LIMIT]
        self.decision_counts[seed.id] = len(decisions)
        # the LOB filter runs for real in LOB mode and as a shadow oracle otherwise
        self.lob_explore[seed.id] = set(self.lob.explore_ordinals(decisions))
        if self.tree is not None:
            try:
                created = self.tree.add_path(seed.id, decisions)
            except DivergentPath as e:
                log.error("%s", e)
                created = []
            for ob in created:
                self.pending[ob.id] = ob
                self.owned.setdefault(ob.owner, set()).add(ob.id)
            self._stale_scores = self._stale_scores or bool(created)
        if self.mode in ("LOB", "NQ-NS"):
            self.fifo.append(seed.id)
        return cost

    def _rescore(self) -> float:
        tree = self.tree
        for ob_id in [i for i, ob in self.pending.items() if not tree.is_open(ob.node, ob.taken)]:
            self._drop_pending(ob_id)
        stats = BranchStats(self.handle.hit_counts())
        self.rewards.set_covered(self.handle.covered_blocks())
        obs = [self.pending[i] for i in sorted(self.pending)]
        entries = score_open_branches(obs, tree, stats, self.rewards, self.params)
        self.queues = build_queues(entries)
        self._stale_scores = False
        return self.cost.strategy_entry * len(entries)

    def _drop_pending(self, ob_id: int) -> None:
        ob = self.pending.pop(ob_id, None)
        if ob is not None:
            self.owned.get(ob.owner, set()).discard(ob_id)

    # second half --------------------------------------------------------------------

    def serve_queue(self) -> None:
        try:
            seed_id, actions, served, skipped = most_prioritized_seed(self.queues)
        except EmptyQueues:
            return
        for e in served:
            self._drop_pending(e.ob)
            if not self.tree.is_open(e.node, e.taken):
                actions.actions[e.branch_index_on_path] = SKIP
                self.actions["closed"] += 1
        self.actions["skip"] += len(skipped)
        self._concolic(seed_id, actions)

    def serve_fifo(self) -> None:
        seed_id = self.fifo.popleft()
        if self.mode == "LOB":
            explore = self.lob_explore[seed_id]
            actions = ActionList({o: SOLVE for o in sorted(explore)})
            n_dec = self._decision_count(seed_id)
            self.actions["pruned"] += max(0, n_dec - len(explore))
        else:
            actions = ActionList()
            for ob_id in sorted(self.owned.get(seed_id, ())):
                ob = self.pending[ob_id]
                if self.tree.is_open(ob.node, ob.taken):
                    actions.actions[ob.ordinal] = SOLVE
            for ob_id in list(self.owned.get(seed_id, ())):
                self._drop_pending(ob_id)
        self._concolic(seed_id, actions)

    def _decision_count(self, seed_id: int) -> int:
        return self.decision_counts.get(seed_id, 0)

    def _concolic(self, seed_id: int, actions: ActionList) -> None:
        seed = self.seeds[seed_id]
        with self._work("concolic") as box:
            res = concolic_with_sampling(self.program, seed.data, actions, self.sym_cfg, self.rng)
            box[0] += res.cost
        explore = self.lob_explore.get(seed_id, set())
        admitted_by_ordinal: Counter = Counter()
        for g in res.generated:
            retrieved = self.mode != "LOB" and g.ordinal not in explore
            if self.handle.import_input(g.data, g.origin, seed.id, g.site, retrieved):
                admitted_by_ordinal[g.ordinal] += 1
        if not self.virtual:
            self.handle.advance_to(self.clock.now())
        self._record(seed, res, admitted_by_ordinal, explore)

    def _record(self, seed: Seed, res: ConcolicResult, admitted: Counter, explore: Set[int]) -> None:
        blocks = self.program.blocks
        prefix = self.prefixes.get(seed.id, [])
        for rec in res.branches:
            if rec.action == SKIP:
                continue
            self.actions[rec.action.lower()] += 1
            if rec.pc_text is not None:
                self.pc_dump.append(
                    f"# seed {seed.id} branch {rec.ordinal} {blocks[rec.site].name} "
                    f"taken={rec.taken} action={rec.action} outcome={rec.outcome}\n{rec.pc_text}"
                )
            if not rec.symbolic:
                self.actions["concrete"] += 1
                continue
            self.outcomes[rec.outcome or "none"] += 1
            ev = {
                "t": round(self.clock.now(), 9),
                "seed": seed.id,
                "site": blocks[rec.site].name,
                "taken": rec.taken,
                "ordinal": rec.ordinal,
                "action": rec.action,
                "outcome": rec.outcome,
                "generated": rec.generated,
                "admitted": admitted.get(rec.ordinal, 0),
                "retrieved": self.mode != "LOB" and rec.ordinal not in explore,
            }
            if rec.ordinal <= len(prefix) and rec.ordinal <= PREFIX_RECORD_LIMIT:
                ev["prefix"] = [[blocks[s].name, t] for s, t in prefix[: rec.ordinal]]
            self.events.append(ev)
        if res.budget_exceeded:
            self.actions["budget_exceeded"] += 1


# entry point --------------------------------------------------------------------


@dataclass
class CampaignResult:
    report: dict
    fuzzer: Fuzzer
    tree: Optional[ExecutionTree]
    pc_dump: List[str] = field(default_factory=list)
    coordinator: Optional[Coordinator] = None


def run_campaign(
    program: TargetProgram,
    cfg: EngineConfig,
    initial_seeds: Optional[Sequence[bytes]] = None,
    corpus_dir: Optional[str] = None,
    record_pc: bool = False,
    cost: Optional[CostModel] = None,
) -> CampaignResult:
    """Run one campaign to its budget and return the report plus live state."""
    from .report import build_report

    cost = cost or CostModel(poll=cfg.poll)
    icfg = build_icfg(program)
    clock = VirtualClock() if cfg.lockstep else WallClock()
    corpus = CorpusDir(corpus_dir) if corpus_dir else None
    holder: list = []
    fuzzer = Fuzzer(program, rng_seed=cfg.seed, bitmap_size=cfg.bitmap_size, step_budget=cfg.step_budget,
                    clock=lambda: holder[0].now(), corpus=corpus)
    common = (fuzzer, cost, cfg.budget, cfg.period, cfg.max_execs)
    handle = LockstepFuzzer(*common) if cfg.lockstep else ThreadedFuzzer(*common, clock=clock)
    holder.append(handle)
    seeds = list(initial_seeds) if initial_seeds else [bytes(program.input_len)]
    for data in seeds:
        handle.add_initial(bytes(data))
    handle.timeline[0] = (0.0, fuzzer.edge_coverage)

    coord = None
    if cfg.mode == "FuzzOnly":
        if cfg.lockstep:
            handle.finish()
        else:
            handle.start()
            handle.finish()
    else:
        rng = np.random.default_rng([cfg.seed, 1])
        coord = Coordinator(program, icfg, cfg, handle, clock, cost, rng, record_pc=record_pc)
        if not cfg.lockstep:
            handle.start()
        coord.run()
        handle.finish()
    report = build_report(program, icfg, cfg, fuzzer, handle, coord)
    log.info("campaign %s on %s: %d edges, %d crashes", cfg.mode, program.source_name,
             report["final_edge_coverage"], len(report["crashes"]))
    return CampaignResult(report, fuzzer, coord.tree if coord else None,
                          coord.pc_dump if coord else [], coord)
