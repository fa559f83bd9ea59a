"""Trace the first few branches and print beta, lambda_1 and the overlap along each.

    python3 scripts/bifurcation_diagram.py --M 256 --kmax 3 --nu-min 1e-3
"""

from __future__ import annotations

import argparse

from mfgseg.asymptotics import segregation_metric
from mfgseg.continuation import lyapunov_schmidt, parabola_fit, trace_branch
from mfgseg.grid1d import Grid
from mfgseg.interactions import linear_pair


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--M", type=int, default=256)
    ap.add_argument("--kmax", type=int, default=3)
    ap.add_argument("--nu-min", type=float, default=1e-3)
    ap.add_argument("--gammas", type=float, nargs=2, default=(1.0, 1.0))
    args = ap.parse_args()

    pair = linear_pair(*args.gammas)
    grid = Grid(args.M)
    for k in range(1, args.kmax + 1):
        br = trace_branch(pair, k, args.nu_min, grid=grid)
        loc = lyapunov_schmidt(pair, k, grid)
        C_fit, _, _ = parabola_fit(br)
        print(f"# k={k} beta_k={br.origin:.6f} beta2={loc.beta2:.4f} fitted={C_fit:.4f} points={len(br.points)}")
        print("beta,nu,lambda1,lambda2,seg")
        for p in br.checkpoints():
            s = p.state
            print(f"{p.beta:.6g},{p.nu:.6g},{s.lambda1:.10g},{s.lambda2:.10g},{segregation_metric(s):.6g}")


if __name__ == "__main__":
    main()
