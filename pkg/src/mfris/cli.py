"""Command-line harness: run | sweep | convergence | beampattern."""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import experiments
from .ao import AlternatingOptimizer
from .config import ConfigError, ScenarioConfig, load_config
from .conic import SolverFailure
from .txopt import InfeasibleStart

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_INFEASIBLE = 4

_SWEEP_DEFAULTS = {
    "M": [16, 24, 32, 40, 48],
    "M_s": [4, 6, 8, 10, 12],
    "P_total": [35.0, 40.0, 45.0, 50.0],
    "R_th": [0.5, 1.0, 1.5, 2.0],
}


def _load(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_updates(seed=args.seed)
    if getattr(args, "protocol", None):
        cfg = cfg.with_updates(protocol=args.protocol.upper())
    return cfg


def _out_dir(args) -> str:
    os.makedirs(args.out_dir, exist_ok=True)
    return args.out_dir


def cmd_run(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    rec = experiments.run_scheme(cfg.protocol, cfg, cfg.seed)
    experiments.write_solution_json(os.path.join(out, "solution.json"), rec, cfg)
    experiments.write_convergence_csv(os.path.join(out, "convergence.csv"), rec)
    print(f"{cfg.protocol}: objective {rec.objective:.6g} ({rec.objective_db:.2f} dB), "
          f"{rec.outer_iters} iterations, feasible={rec.report.ok}")
    if not rec.report.ok:
        for v in rec.report.violations:
            print(f"  violation: {v}", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    values = args.values if args.values else _SWEEP_DEFAULTS[args.axis]
    seeds = args.seeds if args.seeds else list(range(10))
    schemes = [s.upper() for s in (args.schemes or ["ES"])]
    rows = experiments.run_sweep(cfg, args.axis, values, seeds, schemes,
                                 jobs=args.jobs)
    summary = experiments.summarize_sweep(rows)
    path = os.path.join(out, f"sweep_{args.axis}.csv")
    experiments.write_sweep_csv(path, rows, summary)
    for s in summary:
        print(f"{s['scheme']} {args.axis}={s['value']}: "
              f"mean {s['objective_db_mean']:.2f} dB over {s['n']} seeds "
              f"(feasible {s['feasible_frac']:.0%})")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_convergence(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    seeds = args.seeds if args.seeds else [cfg.seed]
    dims = [tuple(int(x) for x in entry.split("x")) for entry in args.dims] \
        if args.dims else [(cfg.n_tx, cfg.m_elems, cfg.m_sense)]
    rows = experiments.run_convergence(cfg, seeds, dims)
    path = os.path.join(out, "convergence_dims.csv")
    experiments.write_convergence_sweep_csv(path, rows)
    print(f"wrote {path} ({len(rows)} rows, all traces monotone)")
    return EXIT_OK


def cmd_beampattern(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    _, channels = experiments.build_scenario(cfg, cfg.seed)
    rec = AlternatingOptimizer(cfg).fit(channels).record_
    rows, (elev, azim), maps = experiments.beampattern_rows(
        cfg, rec, channels, args.elev_step, args.azim_step)
    targets = experiments.canonical_target_angles(cfg)
    path = os.path.join(out, "beampattern.csv")
    experiments.write_beampattern_csv(path, rows, targets)
    for d in ("r", "t"):
        peaks = experiments.find_peaks(maps[d], elev, azim)
        print(f"face {d}: top peaks at {peaks}, targets {targets[d]}")
    print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mfris",
        description="Multi-functional-panel ISAC echo-SINR optimization experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config path (omitted keys take defaults)")
        p.add_argument("--seed", type=int, help="override the scenario seed")
        p.add_argument("--out-dir", default="results", help="output directory")

    p_run = sub.add_parser("run", help="one optimization run, JSON + trace CSV")
    common(p_run)
    p_run.add_argument("--protocol",
                       help="ES|MS|TS|STAR|ACTIVE|PASSIVE (overrides config)")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="axis sweep over schemes and seeds")
    common(p_sweep)
    p_sweep.add_argument("--axis", required=True, choices=sorted(_SWEEP_DEFAULTS))
    p_sweep.add_argument("--values", type=float, nargs="+")
    p_sweep.add_argument("--seeds", type=int, nargs="+")
    p_sweep.add_argument("--schemes", nargs="+")
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_sweep.set_defaults(func=cmd_sweep)

    p_conv = sub.add_parser("convergence", help="audited traces across dimensions")
    common(p_conv)
    p_conv.add_argument("--seeds", type=int, nargs="+")
    p_conv.add_argument("--dims", nargs="+",
                        help="NxMxM_s tuples, e.g. 8x32x8 4x16x4")
    p_conv.set_defaults(func=cmd_convergence)

    p_beam = sub.add_parser("beampattern", help="per-face gain maps of a fitted design")
    common(p_beam)
    p_beam.add_argument("--elev-step", type=float, default=1.0)
    p_beam.add_argument("--azim-step", type=float, default=2.0)
    p_beam.set_defaults(func=cmd_beampattern)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleStart as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
