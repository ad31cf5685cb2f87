"""Command-line entry points: `cfsim simulate` and `cfsim selftest`."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .association import assign_pilots_fixed, build_conflict_graph, export_conflict_edges, form_clusters
from .config import ConfigError, SCHEDULER_ALIASES, SimConfig, parse_config_file
from .geometry import build_network
from .harness import export_report, run_simulation
from .ratectl import export_windows

import numpy as np


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfsim",
        description="Cell-free massive MIMO fairness-scheduling simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one simulation and export reports")
    sim.add_argument("--config", type=Path, help="flat key-value config file")
    sim.add_argument("--scheduler", choices=["pf", "hf", "random", "rr", "maxsum"],
                     help="override the scheduler kind")
    sim.add_argument("--pilot-mode", choices=["fixed", "reassign"],
                     help="override the pilot mode")
    sim.add_argument("--direction", choices=["ul", "dl"], help="link direction")
    sim.add_argument("--slots", type=int, help="scheduling slots after start-up")
    sim.add_argument("--seed", type=int, help="run seed")
    sim.add_argument("--out", type=Path, default=Path("cfsim_out"),
                     help="output directory for users.csv/slots.csv/meta.json")
    sim.add_argument("--dump-windows", action="store_true",
                     help="also write the per-UE mutual-information windows")
    sim.add_argument("--dump-conflicts", action="store_true",
                     help="also write the static conflict-graph edge list (fixed mode)")

    st = sub.add_parser("selftest", help="run the oracle and invariant suites")
    st.add_argument("--quiet", action="store_true")
    return parser


def _config_from_args(args: argparse.Namespace) -> SimConfig:
    if args.config is not None:
        cfg = parse_config_file(args.config)
    else:
        cfg = SimConfig()
    if args.scheduler is not None:
        cfg.scheduler_kind = SCHEDULER_ALIASES.get(args.scheduler, args.scheduler)
    if args.pilot_mode is not None:
        cfg.pilot_mode = args.pilot_mode
    if args.direction is not None:
        cfg.direction = args.direction
    if args.slots is not None:
        cfg.n_slots = args.slots
    if args.seed is not None:
        cfg.seed = args.seed
    cfg.validate()
    return cfg


def _cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    report = run_simulation(cfg)
    paths = export_report(report, args.out)
    if args.dump_windows:
        paths.append(export_windows(report.final_windows, Path(args.out) / "windows.csv"))
    if args.dump_conflicts:
        if cfg.pilot_mode != "fixed":
            raise ConfigError("--dump-conflicts requires pilot_mode=fixed "
                              "(reassignment graphs are per-slot)")
        rng = np.random.default_rng([cfg.seed, 7])
        _, lss = build_network(cfg, rng)
        assoc = assign_pilots_fixed(form_clusters(lss, cfg), lss, cfg)
        graph = build_conflict_graph(assoc, lss, cfg.eta_F)
        paths.append(export_conflict_edges(graph, Path(args.out) / "conflicts.txt"))
    print(
        f"{cfg.scheduler_kind} {cfg.pilot_mode} {cfg.direction} F={cfg.F} "
        f"K={cfg.K} slots={cfg.n_slots} seed={cfg.seed}"
    )
    print(
        f"geo-mean {report.geo_mean:.4g} bit/s, min {report.min_thr:.4g} bit/s, "
        f"zero-throughput UEs {report.n_zero}, wall {report.wall_time_s:.1f}s"
    )
    for p in paths:
        print(f"wrote {p}")
    return 0


def _cmd_selftest(args: argparse.Namespace) -> int:
    from .selftest import run_selftest

    ok = run_selftest(verbose=not args.quiet)
    print("selftest: " + ("all checks passed" if ok else "FAILURES detected"))
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        return _cmd_selftest(args)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
