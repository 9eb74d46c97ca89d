#!/usr/bin/env python3
"""Quick demo: solve one small instance of each problem family."""

import time

from rivmpl import SolverConfig, make_group_pca, make_psd, make_ssc, run
from rivmpl.metrics import (
    elementwise_sparsity,
    infeasibility,
    kmeans,
    nmi,
    row_sparsity,
    sparsity_z,
)
from rivmpl.problems import gen_data_pca, gen_data_psd_type1, gen_data_ssc


def solve(problem, x0, **cfg):
    t0 = time.time()
    res = run(problem, x0, SolverConfig(**cfg))
    dt = time.time() - t0
    print(
        f"  status={res.status.value} iters={res.iterations} "
        f"obj={res.objective:.6f} time={dt:.1f}s "
        f"cert=({res.certificate.riem_residual:.1e}, "
        f"{res.certificate.lin_residual:.1e})"
    )
    return res


def main():
    print("sparse spectral clustering (n=40, r=3, planted clusters)")
    lap, labels = gen_data_ssc(40, 3, seed=0)
    p = make_ssc(lap, 1e-3, 3)
    res = solve(p, p.manifold.random_point(1), eps_star=1e-8, max_outer=1000)
    z = res.x @ res.x.T
    pred = kmeans(z, 3, seed=0)
    print(f"  nmi={nmi(labels, pred):.3f} sparsity={sparsity_z(res.x):.3f}")

    print("group-sparse PCA (m=20, n=100, r=3)")
    b = gen_data_pca(20, 100, seed=0)
    p = make_group_pca(b, 2.0, 0.5, 3)
    res = solve(p, p.manifold.random_point(1), eps_star=5e-8, max_outer=3000)
    print(
        f"  row_sparsity={row_sparsity(res.x):.3f} "
        f"infeas={infeasibility(res.x, p.metadata['C'], p.metadata['E']):.2e}"
    )

    print("sparse symplectic decomposition (n=10, r=2, m=10)")
    a = gen_data_psd_type1(10, 10, seed=0)
    p = make_psd(a, 1e-3, 2)
    res = solve(p, p.manifold.random_point(1), eps_star=1e-7, max_outer=1000)
    print(f"  sparsity={elementwise_sparsity(res.x):.3f}")


if __name__ == "__main__":
    main()
