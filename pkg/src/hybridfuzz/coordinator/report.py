"""JSON campaign report."""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any, Dict, Optional

from ..config import EngineConfig
from ..fuzzer.corpus import atomic_write
from ..fuzzer.engine import Fuzzer
from ..harness.labels import label_crash
from ..ir.icfg import ICFG
from ..ir.program import TargetProgram

SCHEMA_VERSION = 1


def _crashes(fuzzer: Fuzzer) -> list:
    out = []
    for rec in sorted(fuzzer.crash_index.values(), key=lambda r: r.seed_id):
        seed = fuzzer.lineage[rec.seed_id]
        out.append({
            "kind": rec.kind,
            "frames": list(rec.frames),
            "seed": seed.id,
            "origin": seed.origin,
            "found_at": round(rec.found_at, 9),
            "labels": sorted(label_crash(seed, fuzzer.lineage)),
            "input": seed.data.hex(),
        })
    return out


def build_report(program: TargetProgram, icfg: ICFG, cfg: EngineConfig, fuzzer: Fuzzer, handle, coord=None) -> Dict[str, Any]:
    blocks = program.blocks
    covered_blocks = handle.covered_blocks()
    origins: Dict[str, int] = {}
    for s in fuzzer.lineage.values():
        if s.in_pool:
            origins[s.origin] = origins.get(s.origin, 0) + 1
    st = fuzzer.stats
    report: Dict[str, Any] = {
        "schema": SCHEMA_VERSION,
        "target": os.path.basename(program.source_name),
        "mode": cfg.mode,
        "clock": "virtual" if cfg.lockstep else "wall",
        "config": cfg.as_dict(),
        "coverage_timeline": [[t, c] for t, c in handle.timeline],
        "final_edge_coverage": fuzzer.edge_coverage,
        "total_edges": len(icfg.edges),
        "covered_edges": sorted([blocks[a].name, blocks[b].name] for a, b in fuzzer.covered_edges),
        "covered_blocks": sorted(blocks[g].name for g in covered_blocks),
        "crashes": _crashes(fuzzer),
        "fuzzer": {
            "execs": st.execs,
            "seeds_admitted": st.seeds_admitted,
            "imported": st.imported,
            "imports_admitted": st.imports_admitted,
            "budget_exceeded": st.budget_exceeded,
            "pool_size": len(fuzzer.pool),
            "pool_origins": dict(sorted(origins.items())),
        },
    }
    if coord is None:
        report.update({
            "sleeping_fraction": None,
            "sleep_s": None,
            "work_s": None,
            "phase_times": {},
            "actions": {},
            "outcomes": {},
            "queue_timeline": [],
            "first_half_times": [],
            "tree": None,
            "branch_events": [],
        })
        return report
    total = coord.sleep + coord.work
    report.update({
        "sleeping_fraction": coord.sleep / total if total > 0 else 0.0,
        "sleep_s": round(coord.sleep, 9),
        "work_s": round(coord.work, 9),
        "phase_times": {k: round(v, 9) for k, v in sorted(coord.phase_times.items())},
        "actions": dict(sorted(coord.actions.items())),
        "outcomes": dict(sorted(coord.outcomes.items())),
        "queue_timeline": [list(x) for x in coord.queue_timeline],
        "first_half_times": [round(t, 9) for t in coord.first_half_times],
        "tree": None if coord.tree is None else {
            "nodes": len(coord.tree.nodes),
            "open_branches": sum(1 for _ in coord.tree.open_branches()),
            "truncations": coord.tree.truncations,
        },
        "branch_events": coord.events,
    })
    return report


def dumps(report: Dict[str, Any]) -> str:
    return json.dumps(report, sort_keys=True, indent=1)


def write_report(report: Dict[str, Any], path: str) -> None:
    atomic_write(Path(path), dumps(report).encode())


def load_report(path: str) -> Dict[str, Any]:
    with open(path) as fh:
        data = json.load(fh)
    if data.get("schema") != SCHEMA_VERSION:
        raise ValueError(f"unsupported report schema {data.get('schema')!r}")
    return data
