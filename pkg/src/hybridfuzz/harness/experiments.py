"""Mode comparison matrix: several modes times several trials on one target."""

from __future__ import annotations

import csv
import io
import logging
import statistics
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

from ..config import EngineConfig
from ..coordinator import run_campaign
from ..ir import TargetProgram

log = logging.getLogger(__name__)


@dataclass
class TrialSummary:
    mode: str
    seed: int
    edges: int
    total_edges: int
    sleeping_fraction: Optional[float]
    crashes: int
    execs: int


@dataclass
class Comparison:
    target: str
    trials: Dict[str, List[TrialSummary]] = field(default_factory=dict)

    def median_edges(self, mode: str) -> float:
        return statistics.median(t.edges for t in self.trials[mode])

    def median_sleep(self, mode: str) -> Optional[float]:
        vals = [t.sleeping_fraction for t in self.trials[mode] if t.sleeping_fraction is not None]
        return statistics.median(vals) if vals else None


def summarize(report: dict) -> TrialSummary:
    return TrialSummary(
        mode=report["mode"],
        seed=report["config"]["seed"],
        edges=report["final_edge_coverage"],
        total_edges=report["total_edges"],
        sleeping_fraction=report["sleeping_fraction"],
        crashes=len(report["crashes"]),
        execs=report["fuzzer"]["execs"],
    )


def compare_modes(
    program: TargetProgram,
    base: EngineConfig,
    modes: Sequence[str],
    trials: int,
    first_seed: Optional[int] = None,
) -> Comparison:
    """Trial ``i`` of every mode uses rng seed ``first_seed + i`` so modes are paired."""
    first_seed = base.seed if first_seed is None else first_seed
    out = Comparison(program.source_name)
    for mode in modes:
        out.trials[mode] = []
        for i in range(trials):
            cfg = base.replace(mode=mode, seed=first_seed + i)
            cfg.validate()
            report = run_campaign(program, cfg).report
            out.trials[mode].append(summarize(report))
            log.info("%s trial %d: %d edges", mode, i, report["final_edge_coverage"])
    return out


def _fmt_frac(v: Optional[float]) -> str:
    return "-" if v is None else f"{v:.4f}"


def format_table(cmp: Comparison) -> str:
    header = f"{'mode':<9} {'trials':>6} {'edges(med)':>10} {'edges/trial':<24} {'sleep(med)':>10} {'crashes':>7}"
    lines = [f"target: {cmp.target}", header, "-" * len(header)]
    for mode, rows in cmp.trials.items():
        per = ",".join(str(r.edges) for r in rows)
        crashes = statistics.median(r.crashes for r in rows)
        lines.append(
            f"{mode:<9} {len(rows):>6} {cmp.median_edges(mode):>10g} {per:<24} "
            f"{_fmt_frac(cmp.median_sleep(mode)):>10} {crashes:>7g}"
        )
    return "\n".join(lines)


def to_csv(cmp: Comparison) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["target", "mode", "seed", "edges", "total_edges", "sleeping_fraction", "crashes", "execs"])
    for mode, rows in cmp.trials.items():
        for r in rows:
            w.writerow([cmp.target, mode, r.seed, r.edges, r.total_edges,
                        "" if r.sleeping_fraction is None else f"{r.sleeping_fraction:.6f}", r.crashes, r.execs])
    return buf.getvalue()
