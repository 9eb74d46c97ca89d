#!/usr/bin/env python3
"""Direction-norm decay study on a degenerate spectral-clustering instance.

Writes ``trend.csv`` with min_{k<=K} ||v^k|| at doubling budgets K and prints
the log-log slope, which tracks the O(1/sqrt(K)) envelope of the iteration
bound.
"""

import argparse

import numpy as np

from rivmpl import SolverConfig, make_ssc, run


def degenerate_instance(n=30, r=3, lam=1e-5, seed=7):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    w = -np.linspace(2.0, 1.0, n)
    w[1:5] = w[1]  # eigenvalue cluster spanning the cut
    a = q @ np.diag(w) @ q.T
    return make_ssc(0.5 * (a + a.T), lam, r)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--max-outer", type=int, default=1600)
    ap.add_argument("--out", default="trend.csv")
    args = ap.parse_args()

    p = degenerate_instance()
    x0 = p.manifold.random_point(np.random.default_rng(8))
    res = run(p, x0, SolverConfig(eps_star=-1.0, max_outer=args.max_outer))
    v = np.array([row.vnorm for row in res.trace])
    ks = [k for k in (50, 100, 200, 400, 800, 1600) if k <= len(v)]
    mins = [v[:k].min() for k in ks]
    with open(args.out, "w") as fh:
        fh.write("K,min_vnorm\n")
        for k, m in zip(ks, mins):
            fh.write(f"{k},{m:.17g}\n")
    slope = np.polyfit(np.log(ks), np.log(mins), 1)[0]
    print(f"wrote {args.out}; log-log slope {slope:.3f}")


if __name__ == "__main__":
    main()
