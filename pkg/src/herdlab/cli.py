"""Command-line entry point: ``herdlab <subcommand> [options]``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

from .config import ExperimentConfig, load_config

__all__ = ["main", "build_parser"]


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("HERDLAB_JOBS", "1")))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="herdlab", description="Herding-model simulations and analyses.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=False):
        p.add_argument("--config", type=Path, required=config_required, help="experiment YAML file")
        p.add_argument("--out", type=Path, help="output directory (overrides the config)")
        p.add_argument("--jobs", type=int, default=_default_jobs(), help="parallel workers (default $HERDLAB_JOBS or 1)")

    p = sub.add_parser("simulate", help="simulate an ensemble and write trajectories + manifest")
    common(p, config_required=True)
    p.add_argument("--seed", type=_u64, help="seed base (overrides the config)")
    p.add_argument("--ensemble", type=int, help="ensemble size (overrides the config)")

    p = sub.add_parser("analyze", help="PSD/PDF and power-law fits of simulated trajectories")
    common(p, config_required=True)

    p = sub.add_parser("reproduce-fig1", help="exponent sweep of the two-state y-equation")
    common(p)
    p.add_argument("--seed", type=_u64, help="seed base")
    p.add_argument("--quick", action="store_true", help="short runs for a smoke test")

    p = sub.add_parser("reproduce-fig3", help="fractured spectrum of the three-state model")
    common(p)
    p.add_argument("--seed", type=_u64, help="seed")
    p.add_argument("--quick", action="store_true", help="short runs for a smoke test")

    p = sub.add_parser("validate", help="oracle and invariant checks")
    common(p)
    p.add_argument("--level", choices=("quick", "full"), default="quick")
    p.add_argument("--check", action="append", help="run only this check (repeatable)")
    p.add_argument("--inject-fault", action="append", default=[], help=argparse.SUPPRESS)
    return parser


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "ensemble", None) is not None:
        changes["ensemble"] = args.ensemble
    if args.out is not None:
        changes["output_dir"] = str(args.out)
    return replace(cfg, **changes) if changes else cfg


def _run(args) -> int:
    from . import experiments as ex

    if args.command == "simulate":
        cfg = _config(args)
        m = ex.run_simulate(cfg, jobs=args.jobs)
        print(f"wrote {len(m['files'])} trajectories to {cfg.output_dir}")
        return 0
    if args.command == "analyze":
        cfg = _config(args)
        summary = ex.run_analyze(cfg)
        print(json.dumps({k: summary[k] for k in summary if k != "versions"}, indent=2, default=str))
        return 0
    if args.command == "reproduce-fig1":
        s = ex.Fig1Settings()
        if args.quick:
            s = replace(s, eps2_values=(0.5, 2.0), pdf_t_end={0.5: 2e3, 2.0: 2e3}, psd_t_end=200.0,
                        psd_sample_dt=1e-3, psd_segment_len=2**14)
        if args.seed is not None:
            s = replace(s, seed=args.seed)
        summary = ex.run_reproduce_fig1(args.out or Path("fig1_out"), s, jobs=args.jobs)
        for r in summary["rows"]:
            print(f"eps2={r['eps2']:g}: lambda {r['lambda_hat']:.3f} (theory {r['lambda_theory']:.3f}), "
                  f"beta {r['beta_hat']:.3f} (theory {r['beta_theory']:.3f})")
        return 0
    if args.command == "reproduce-fig3":
        s = ex.Fig3Settings()
        if args.quick:
            s = replace(s, t_end=20.0, sample_dt=1e-4, windows=(1e-3, 0.1, 1.0), segment_len=2**12)
        if args.seed is not None:
            s = replace(s, seed=args.seed)
        summary = ex.run_reproduce_fig3(args.out or Path("fig3_out"), s)
        p = summary["primary"]
        print(json.dumps({k: p.get(k) for k in ("lambda_hat", "lambda_fit_range", "fracture")}, indent=2))
        return 0
    if args.command == "validate":
        report = ex.run_validate(args.level, args.out, faults=args.inject_fault, only=args.check)
        for c in report["checks"]:
            status = "PASS" if c["passed"] else "FAIL"
            print(f"{status} {c['name']}: {c['metric']}={c['value']:.4g} (threshold {c['threshold']:.4g})")
        return 0 if report["passed"] else 1
    raise AssertionError(args.command)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return 2
    try:
        return _run(args)
    except (OSError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
