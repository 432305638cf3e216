"""Command-line front end."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from ..config import MODES, ConfigError, EngineConfig, parse_config_text, parse_duration
from ..coordinator import run_campaign
from ..coordinator.report import dumps, load_report, write_report
from ..ir import ProgramError, execute
from ..symexec import SAMPLE, SOLVE, ActionList, SymConfig, concolic_with_sampling
from .experiments import compare_modes, format_table, to_csv
from .targets import load_target

log = logging.getLogger("hybridfuzz")

# CLI flag -> EngineConfig field
_OVERRIDES = {
    "mode": "mode",
    "budget": "budget",
    "seed": "seed",
    "lam": "lam",
    "delta_log10": "delta_log10",
    "gamma": "gamma",
    "k_dim": "k_dim",
    "period": "period",
    "sample_poly": "sample_poly",
    "sample_box": "sample_box",
    "max_execs": "max_execs",
}


def _add_engine_flags(p: argparse.ArgumentParser, with_mode: bool = True) -> None:
    p.add_argument("--target", required=True, help="bundled fixture name or path to a .tgt file")
    p.add_argument("--config", help="key = value config file; command-line flags win")
    if with_mode:
        p.add_argument("--mode", choices=MODES)
    p.add_argument("--budget", help="campaign budget, e.g. 30s, 2m")
    p.add_argument("--seed", type=int, help="rng seed")
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--delta-log10", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--k-dim", type=int)
    p.add_argument("--period", help="first-half period, e.g. 5s")
    p.add_argument("--sample-poly", type=int)
    p.add_argument("--sample-box", type=int)
    p.add_argument("--max-execs", type=int)
    p.add_argument("--lockstep", action=argparse.BooleanOptionalAction, default=None,
                   help="single-threaded virtual-clock run (reproducible); default runs the fuzzer in a thread")


def build_config(args: argparse.Namespace) -> EngineConfig:
    values = {}
    if args.config:
        values.update(parse_config_text(Path(args.config).read_text()))
    for flag, key in _OVERRIDES.items():
        v = getattr(args, flag, None)
        if v is None:
            continue
        if key in ("budget", "period"):
            v = parse_duration(v)
        values[key] = v
    if args.lockstep is not None:
        values["lockstep"] = args.lockstep
    elif "lockstep" not in values:
        values["lockstep"] = False
    return EngineConfig.from_dict(values)


def cmd_run(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    program = load_target(args.target)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(cfg.to_text())
    res = run_campaign(program, cfg, corpus_dir=str(out / "corpus"), record_pc=args.dump_pc)
    write_report(res.report, str(out / "report.json"))
    if args.dump_pc:
        (out / "pc_dump.txt").write_text("\n\n".join(res.pc_dump) + "\n")
    print(render_text(res.report))
    print(f"report written to {out / 'report.json'}")
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    program = load_target(args.target)
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    bad = [m for m in modes if m not in MODES]
    if bad:
        raise ConfigError(f"unknown modes: {', '.join(bad)}")
    cmp = compare_modes(program, cfg, modes, args.trials)
    print(format_table(cmp))
    if args.csv:
        Path(args.csv).write_text(to_csv(cmp))
    return 0


def cmd_dump_pc(args: argparse.Namespace) -> int:
    program = load_target(args.target)
    data = Path(args.input).read_bytes() if args.input else bytes(program.input_len)
    if len(data) != program.input_len:
        raise ConfigError(f"input has {len(data)} bytes, target expects {program.input_len}")
    trace = execute(program, data)
    action = SAMPLE if args.action == "SAMPLE" else SOLVE
    ordinals = range(len(trace.branch_decisions)) if args.ordinal is None else [args.ordinal]
    res = concolic_with_sampling(program, data, ActionList({o: action for o in ordinals}),
                                 SymConfig(record_pc=True), np.random.default_rng(args.seed))
    blocks = program.blocks
    for rec in res.branches:
        if rec.pc_text is None:
            continue
        print(f"# branch {rec.ordinal} at {blocks[rec.site].name} taken={rec.taken} "
              f"{rec.action} -> {rec.outcome} ({rec.generated} inputs)")
        print(rec.pc_text if rec.pc_text else "(input-independent)")
    return 0


def cmd_replay(args: argparse.Namespace) -> int:
    program = load_target(args.target)
    data = Path(args.input).read_bytes()
    trace = execute(program, data)
    if trace.crashed:
        print(f"outcome: Crash({trace.crash_kind})")
        print(f"stack ({len(trace.call_stack)} frames): {' > '.join(trace.call_stack)}")
    else:
        print(f"outcome: {trace.outcome}")
    names = program.blocks
    print(f"steps: {trace.steps}")
    print(f"branches: {len(trace.branch_decisions)}")
    if args.verbose:
        for site, taken in trace.branch_decisions:
            print(f"  {names[site].name} {'T' if taken else 'F'}")
    return 1 if trace.crashed and args.fail_on_crash else 0


def render_text(report: dict) -> str:
    sf = report["sleeping_fraction"]
    lines = [
        f"target {report['target']}  mode {report['mode']}  clock {report['clock']}  seed {report['config']['seed']}",
        f"edge coverage {report['final_edge_coverage']}/{report['total_edges']}",
        f"execs {report['fuzzer']['execs']}  pool {report['fuzzer']['pool_size']}  "
        f"imports {report['fuzzer']['imports_admitted']}/{report['fuzzer']['imported']}",
        "sleeping fraction " + ("-" if sf is None else f"{sf:.4f}"),
    ]
    if report["actions"]:
        lines.append("actions " + " ".join(f"{k}={v}" for k, v in report["actions"].items()))
    for c in report["crashes"]:
        labels = ",".join(c["labels"]) or "-"
        lines.append(f"crash {c['kind']} at {'>'.join(c['frames'])} seed {c['seed']} ({c['origin']}) labels {labels}")
    return "\n".join(lines)


def render_csv(report: dict) -> str:
    rows = ["t,edges"] + [f"{t},{c}" for t, c in report["coverage_timeline"]]
    return "\n".join(rows)


def cmd_report(args: argparse.Namespace) -> int:
    report = load_report(args.report)
    if args.format == "json":
        print(dumps(report))
    elif args.format == "csv":
        print(render_csv(report))
    else:
        print(render_text(report))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hybridfuzz", description="Hybrid fuzzing on toy bytecode targets.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one campaign")
    _add_engine_flags(p)
    p.add_argument("--out", default="out", help="output directory for report and corpus")
    p.add_argument("--dump-pc", action="store_true", help="also write every queried path condition")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run a mode matrix and print a table")
    _add_engine_flags(p, with_mode=False)
    p.add_argument("--modes", default="FULL,LOB")
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--csv", help="also write per-trial rows to this CSV file")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("dump-pc", help="print path conditions along one input's path")
    p.add_argument("--target", required=True)
    p.add_argument("--input", help="input file; zero bytes when omitted")
    p.add_argument("--action", choices=("SOLVE", "SAMPLE"), default="SOLVE")
    p.add_argument("--ordinal", type=int, help="only this branch ordinal")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_dump_pc)

    p = sub.add_parser("replay", help="re-execute a saved input")
    p.add_argument("input")
    p.add_argument("--target", required=True)
    p.add_argument("--fail-on-crash", action="store_true")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("report", help="render a report JSON")
    p.add_argument("report")
    p.add_argument("--format", choices=("text", "csv", "json"), default="text")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ProgramError, FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
