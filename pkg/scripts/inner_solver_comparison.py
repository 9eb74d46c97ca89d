#!/usr/bin/env python3
"""Compare the two inner solvers on a group-sparse PCA grid.

For each instance both solvers run under the identical outer configuration
and stopping rule; the table reports mean inner iterations per subproblem and
wall time.
"""

import argparse
import time

import numpy as np

from rivmpl import SolverConfig, make_group_pca, run
from rivmpl.problems import gen_data_pca


def one(n, seed, inner, max_outer):
    b = gen_data_pca(20, n, seed)
    p = make_group_pca(b, 2.0, 0.5, 3)
    x0 = p.manifold.random_point(np.random.default_rng(seed + 1))
    cfg = SolverConfig(eps_star=1e-7, max_outer=max_outer, inner=inner,
                       inner_budget=100000 if inner == "apg" else 200)
    t0 = time.time()
    res = run(p, x0, cfg)
    return res.inner_iterations / res.subproblems, time.time() - t0, res.objective


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[60, 100, 140])
    ap.add_argument("--max-outer", type=int, default=150)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    print(f"{'n':>5} {'sncg it/sub':>12} {'apg it/sub':>12} {'ratio':>7} "
          f"{'sncg s':>7} {'apg s':>7}")
    for n in args.sizes:
        m_sn, t_sn, _ = one(n, args.seed, "sncg", args.max_outer)
        m_ap, t_ap, _ = one(n, args.seed, "apg", args.max_outer)
        print(f"{n:>5} {m_sn:>12.2f} {m_ap:>12.2f} {m_ap / m_sn:>7.1f} "
              f"{t_sn:>7.1f} {t_ap:>7.1f}")


if __name__ == "__main__":
    main()
