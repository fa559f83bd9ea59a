"""Minimal energy c_beta over a beta sweep against the segregated limit.

    python3 scripts/variational_sweep.py --M 512 --betas 25 50 100 200 400 10000
"""

from __future__ import annotations

import argparse

from mfgseg.grid1d import Grid
from mfgseg.variational import VariationalProblem, competitor, gamma_limit_reference, minimize


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--M", type=int, default=512)
    ap.add_argument("--gammas", type=float, nargs=2, default=(1.0, 1.0))
    ap.add_argument("--betas", type=float, nargs="+", default=[25, 50, 100, 200, 400, 1e4])
    args = ap.parse_args()

    grid = Grid(args.M)
    ref = gamma_limit_reference(*args.gammas)
    print(f"# c_inf={ref.c_inf:.6f} x0={ref.x0:.6f}")
    print("beta,c_beta,rel_gap,coupling,nontrivial,iterations")
    prev = None
    for beta in sorted(args.betas):
        prob = VariationalProblem(*args.gammas, beta, grid)
        starts = [prob.trivial(), competitor(prob)]
        if prev is not None:
            starts.append((prev.vtilde1, prev.vtilde2))
        prev = minimize(prob, starts)
        gap = (ref.c_inf - prev.c_beta) / ref.c_inf
        print(f"{beta:.6g},{prev.c_beta:.8g},{gap:.4g},{prev.coupling(prob):.6g},{prev.nontrivial},{prev.iterations}")


if __name__ == "__main__":
    main()
