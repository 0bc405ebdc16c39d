"""Steady solutions on the (-5,5) x (-0.5,0.5) stripe for a range of s.

Writes one CSV (or VTK) snapshot per s plus the midline profile u(x, 0).
"""
import argparse
from pathlib import Path

import numpy as np

from fastfrac.harness import emit_field_snapshot
from fastfrac.problems import solve_problem, stripe_problem


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--nx", type=int, default=2000, help="intervals along the long axis")
    parser.add_argument("--s", type=float, nargs="+", default=[0.8, 0.6, 0.4, 0.2, 0.1])
    parser.add_argument("--out", default="results/stripe")
    parser.add_argument("--vtk", action="store_true")
    args = parser.parse_args(argv)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    profiles = []
    for s in args.s:
        problem = stripe_problem(s)
        grid = problem.grid(args.nx)
        u = solve_problem(problem, grid)
        suffix = "vtk" if args.vtk else "csv"
        emit_field_snapshot(u, grid, out / f"stripe_s{s:g}.{suffix}")
        mid = u[:, u.shape[1] // 2]
        profiles.append(mid)
        print(f"s={s:g}: grid {grid.interior_shape}, max|u|={np.abs(u).max():.4e}")
    x = grid.nodes(0)
    header = "x," + ",".join(f"s={s:g}" for s in args.s)
    np.savetxt(out / "midline_profiles.csv", np.column_stack([x] + profiles),
               fmt="%.6e", delimiter=",", header=header, comments="")


if __name__ == "__main__":
    main()
