"""Off-diagonal weight of the exact noise matrix across the simplex.

    python scripts/decomposition_map.py --H 100 --out offdiag.csv

Tabulates |S_fp| / min(S_ff, S_pp) on a grid of (n_f, n_p); the diagonal
noise form is accurate where the ratio is small.
"""

import argparse

import numpy as np

from herdlab.model import ThreeStateParams
from herdlab.sde import diffusion_decompose, financial_d2


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--H", type=float, default=100.0)
    ap.add_argument("--n", type=int, default=50)
    ap.add_argument("--out", default="offdiag.csv")
    args = ap.parse_args()
    p = ThreeStateParams(3.0, 3.0, 3.0, args.H)
    rows = ["n_f,n_p,ratio"]
    grid = (np.arange(args.n) + 0.5) / args.n
    for n_f in grid:
        for n_p in grid:
            if n_f + n_p >= 1:
                continue
            S = diffusion_decompose(financial_d2(n_f, n_p, p))
            rows.append(f"{n_f:.6g},{n_p:.6g},{abs(S[0, 1]) / min(S[0, 0], S[1, 1]):.6g}")
    with open(args.out, "w", newline="\n") as fh:
        fh.write("\n".join(rows) + "\n")
    print(f"wrote {len(rows) - 1} points to {args.out}")


if __name__ == "__main__":
    main()
