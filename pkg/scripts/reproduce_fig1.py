"""Exponent sweep of the y-equation: tail exponent and spectral slope versus eps2.

    python scripts/reproduce_fig1.py --out fig1_out [--eps2 0.5 3] [--jobs 2]

Writes pdf_eps2_*.csv, psd_eps2_*.csv, fig1_table.csv and fig1_summary.json.
"""

import argparse
from dataclasses import replace
from pathlib import Path

from herdlab.experiments import Fig1Settings, run_reproduce_fig1


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", type=Path, default=Path("fig1_out"))
    ap.add_argument("--eps2", type=float, nargs="+", help="subset of the sweep")
    ap.add_argument("--psd-t-end", type=float, help="length of the spectral run")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    s = Fig1Settings()
    if args.eps2:
        s = replace(s, eps2_values=tuple(args.eps2))
    if args.psd_t_end:
        s = replace(s, psd_t_end=args.psd_t_end)
    if args.seed is not None:
        s = replace(s, seed=args.seed)
    summary = run_reproduce_fig1(args.out, s, jobs=args.jobs)
    print(f"{'eps2':>5} {'lambda':>8} {'theory':>7} {'beta':>7} {'theory':>7} {'sec':>6}")
    for r in summary["rows"]:
        print(f"{r['eps2']:5.2f} {r['lambda_hat']:8.3f} {r['lambda_theory']:7.2f} "
              f"{r['beta_hat']:7.3f} {r['beta_theory']:7.2f} {r['seconds']:6.0f}")


if __name__ == "__main__":
    main()
