"""Composite problem instances: smooth term, inner mapping, regularizer.

A :class:`CompositeProblem` bundles everything the solver is allowed to see:
the manifold, f (value and gradient), the inner mapping F (value,
Jacobian-vector product and its adjoint), and the regularizer acting on the
codomain blocks. Three concrete families are provided:

* sparse spectral clustering on the Stiefel manifold,
* group-sparse PCA with an L1 penalty on the off-diagonal coupling,
* sparse proper symplectic decomposition on the symplectic Stiefel manifold.

``validate_derivatives`` certifies each instance by adjoint identities and
central finite differences before it ever reaches the solver.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .blocks import Blocks
from .linalg import NotSymmetric
from .manifolds import (
    Manifold,
    SymplecticStiefel,
    Stiefel,
    lmul_j,
    rmul_j,
    symplectic_inverse,
)
from .prox import FrobeniusNorm, L1Norm, RowGroupNorm, SeparableSum


class DegenerateColumn(ValueError):
    """Column normalization is undefined for the requested sizes."""


class ValidationFailed(AssertionError):
    """A derivative or adjoint check exceeded its tolerance."""


@dataclass(frozen=True)
class PointOps:
    """Operators frozen at one manifold point for repeated application."""

    project: Callable[[np.ndarray], np.ndarray]
    jvp: Callable[[np.ndarray], Blocks]
    vjp: Callable[[Blocks], np.ndarray]


@dataclass(frozen=True)
class CompositeProblem:
    """Minimize f(x) + reg(F(x)) over x on the manifold."""

    manifold: Manifold
    reg: SeparableSum
    f_eval: Callable[[np.ndarray], float]
    f_grad: Callable[[np.ndarray], np.ndarray]
    F_eval: Callable[[np.ndarray], Blocks]
    F_jvp: Callable[[np.ndarray, np.ndarray], Blocks]
    F_vjp: Callable[[np.ndarray, Blocks], np.ndarray]
    z_shapes: tuple
    name: str = ""
    alpha00_hint: float = 1.0
    metadata: dict = field(default_factory=dict)
    # optional factories returning point-specialized maps (performance only;
    # they must agree with F_jvp / F_vjp, which the tests enforce)
    F_jvp_at: Callable[[np.ndarray], Callable] | None = None
    F_vjp_at: Callable[[np.ndarray], Callable] | None = None

    def objective(self, x: np.ndarray) -> float:
        return self.f_eval(x) + self.reg.value(self.F_eval(x))

    def point_ops(self, x: np.ndarray) -> PointOps:
        """Build the projected/linearized maps pinned at x."""
        jvp = (
            self.F_jvp_at(x)
            if self.F_jvp_at is not None
            else (lambda v: self.F_jvp(x, v))
        )
        vjp = (
            self.F_vjp_at(x)
            if self.F_vjp_at is not None
            else (lambda w: self.F_vjp(x, w))
        )
        return PointOps(project=self.manifold.tangent_projector(x), jvp=jvp, vjp=vjp)


def spectral_norm_estimate(matvec: Callable, shape: tuple, iters: int = 20) -> float:
    """Power-iteration estimate of the dominant eigenvalue magnitude.

    The caller passes a PSD map (or the normal operator of a general one) and
    a deterministic starting vector shape; 20 iterations by default.
    """
    u = np.ones(shape)
    u = u / np.linalg.norm(u)
    est = 0.0
    for _ in range(iters):
        w = matvec(u)
        nrm = float(np.linalg.norm(w))
        if nrm == 0.0:
            return 0.0
        est = nrm
        u = w / nrm
    return est


def make_ssc(a: np.ndarray, lam: float, r: int) -> CompositeProblem:
    """Sparse spectral clustering: <A, XX^T> + lam ||XX^T||_1 on St(n, r)."""
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n:
        raise ValueError(f"similarity matrix must be square, got {a.shape}")
    if np.linalg.norm(a - a.T) > 1e-10 * max(np.linalg.norm(a), 1e-300):
        raise NotSymmetric("similarity matrix must be symmetric")
    if not 1 <= r <= n:
        raise ValueError(f"need 1 <= r <= n, got r={r}, n={n}")
    a = 0.5 * (a + a.T)

    def f_eval(x):
        return float(np.vdot(a @ x, x))

    def f_grad(x):
        return 2.0 * (a @ x)

    def F_eval(x):
        return Blocks.single(x @ x.T)

    def F_jvp(x, v):
        return Blocks.single(x @ v.T + v @ x.T)

    def F_vjp(x, w):
        w0 = w[0]
        return (w0 + w0.T) @ x

    sym_op = lambda u: a @ (a @ u)  # noqa: E731  (normal operator of symmetric A)
    nrm_a = np.sqrt(spectral_norm_estimate(sym_op, (n, 1)))
    return CompositeProblem(
        manifold=Stiefel(n, r),
        reg=SeparableSum((L1Norm(lam, (n, n)),)),
        f_eval=f_eval,
        f_grad=f_grad,
        F_eval=F_eval,
        F_jvp=F_jvp,
        F_vjp=F_vjp,
        z_shapes=((n, n),),
        name="ssc",
        alpha00_hint=max(0.5 * nrm_a, 1e-12),
        metadata={"lam": lam},
    )


def offdiag_mask(r: int) -> np.ndarray:
    """r x r matrix with zero diagonal and unit off-diagonal entries."""
    return np.ones((r, r)) - np.eye(r)


def make_group_pca(b: np.ndarray, lam: float, rho: float, r: int) -> CompositeProblem:
    """Group-sparse PCA with penalized off-diagonal coupling on St(n, r).

    Objective: -tr(X^T C X) + lam ||X||_{2,1} + rho ||E o (X^T C X)||_1 with
    C = B^T B and E the off-diagonal mask.
    """
    b = np.asarray(b, dtype=float)
    if b.ndim != 2:
        raise ValueError(f"data matrix must be 2-d, got shape {b.shape}")
    n = b.shape[1]
    if not 1 <= r <= n:
        raise ValueError(f"need 1 <= r <= n, got r={r}, n={n}")
    c = b.T @ b
    e = offdiag_mask(r)

    def f_eval(x):
        return -float(np.vdot(c @ x, x))

    def f_grad(x):
        return -2.0 * (c @ x)

    def F_eval(x):
        cx = c @ x
        return Blocks((x, e * (x.T @ cx)))

    def F_jvp(x, v):
        cx = c @ x
        cv = c @ v
        return Blocks((v, e * (v.T @ cx + x.T @ cv)))

    def F_vjp(x, w):
        ew = e * w[1]
        return w[0] + (c @ x) @ (ew + ew.T)

    # caching C x at the base point removes every n x n product from the
    # inner solver (C is symmetric, so x^T C v = (C x)^T v)
    def F_jvp_at(x):
        cx = c @ x

        def jvp(v):
            return Blocks((v, e * (v.T @ cx + cx.T @ v)))

        return jvp

    def F_vjp_at(x):
        cx = c @ x

        def vjp(w):
            ew = e * w[1]
            return w[0] + cx @ (ew + ew.T)

        return vjp

    nrm_c = spectral_norm_estimate(lambda u: c @ u, (n, 1))
    return CompositeProblem(
        manifold=Stiefel(n, r),
        reg=SeparableSum((RowGroupNorm(lam, (n, r)), L1Norm(rho, (r, r)))),
        f_eval=f_eval,
        f_grad=f_grad,
        F_eval=F_eval,
        F_jvp=F_jvp,
        F_vjp=F_vjp,
        z_shapes=((n, r), (r, r)),
        name="gpca",
        alpha00_hint=max(0.5 * nrm_c, 1e-12),
        metadata={"lam": lam, "rho": rho, "C": c, "E": e},
        F_jvp_at=F_jvp_at,
        F_vjp_at=F_vjp_at,
    )


def make_psd(a: np.ndarray, lam: float, r: int) -> CompositeProblem:
    """Sparse proper symplectic decomposition on Sp(2r, 2n).

    Objective: ||X X^+ A - A||_F + lam ||X||_1 with X^+ the symplectic
    inverse; the smooth term is identically zero.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] % 2 or a.shape[1] % 2:
        raise ValueError(f"snapshot matrix must be 2n x 2m, got {a.shape}")
    n = a.shape[0] // 2
    if not 1 <= r <= n:
        raise ValueError(f"need 1 <= r <= n, got r={r}, n={n}")

    def f_eval(x):
        return 0.0

    def f_grad(x):
        return np.zeros((2 * n, 2 * r))

    def F_eval(x):
        xplus = symplectic_inverse(x)
        return Blocks((x @ (xplus @ a) - a, x))

    def F_jvp(x, v):
        xplus = symplectic_inverse(x)
        vplus = symplectic_inverse(v)
        return Blocks((v @ (xplus @ a) + x @ (vplus @ a), v))

    def F_vjp(x, w):
        w1 = w[0]
        xplus_t = symplectic_inverse(x).T
        g1 = w1 @ (a.T @ xplus_t)
        # adjoint of v -> x (v^+ a): J_{2n} a w1^T x J_{2r}^T
        g2 = lmul_j(a @ (w1.T @ (-rmul_j(x))))
        return g1 + g2 + w[1]

    def F_jvp_at(x):
        pa = symplectic_inverse(x) @ a

        def jvp(v):
            return Blocks((v @ pa + x @ (symplectic_inverse(v) @ a), v))

        return jvp

    def F_vjp_at(x):
        at_xplus_t = a.T @ symplectic_inverse(x).T
        xj = -rmul_j(x)

        def vjp(w):
            w1 = w[0]
            return w1 @ at_xplus_t + lmul_j(a @ (w1.T @ xj)) + w[1]

        return vjp

    return CompositeProblem(
        manifold=SymplecticStiefel(n, r),
        reg=SeparableSum((FrobeniusNorm(1.0, a.shape), L1Norm(lam, (2 * n, 2 * r)))),
        f_eval=f_eval,
        f_grad=f_grad,
        F_eval=F_eval,
        F_jvp=F_jvp,
        F_vjp=F_vjp,
        z_shapes=(a.shape, (2 * n, 2 * r)),
        name="psd",
        alpha00_hint=1e-5,
        metadata={"lam": lam},
        F_jvp_at=F_jvp_at,
        F_vjp_at=F_vjp_at,
    )


def gen_data_pca(m: int, n: int, seed) -> np.ndarray:
    """Gaussian m x n data matrix with centered, unit-norm columns."""
    if m < 1 or n < 1:
        raise ValueError("dimensions must be positive")
    if m < 2:
        raise DegenerateColumn("column centering needs at least two rows")
    rng = np.random.default_rng(seed)
    b = rng.standard_normal((m, n))
    b = b - b.mean(axis=0, keepdims=True)
    norms = np.linalg.norm(b, axis=0)
    if np.any(norms <= 1e-300):
        raise DegenerateColumn("a centered column vanished")
    return b / norms


def gen_data_psd_type1(m: int, n: int, seed) -> np.ndarray:
    """Gaussian 2n x 2m snapshot matrix scaled to unit Frobenius norm."""
    if m < 1 or n < 1:
        raise ValueError("dimensions must be positive")
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((2 * n, 2 * m))
    return a / np.linalg.norm(a)


def gen_data_ssc(n: int, classes: int, seed, dim: int = 3):
    """Labeled synthetic similarity data for spectral clustering runs.

    Draws ``classes`` Gaussian blobs in R^dim, forms a Gaussian-kernel
    affinity with the median pairwise distance as bandwidth, and returns the
    normalized Laplacian together with the planted labels.
    """
    if classes < 1 or n < classes:
        raise ValueError("need 1 <= classes <= n")
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % classes
    centers = 8.0 * rng.standard_normal((classes, dim))
    pts = centers[labels] + rng.standard_normal((n, dim))
    d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=2)
    off = d2[~np.eye(n, dtype=bool)]
    bw = float(np.median(off)) if off.size else 1.0
    w = np.exp(-d2 / max(bw, 1e-12))
    np.fill_diagonal(w, 0.0)
    deg = np.maximum(w.sum(axis=1), 1e-12)
    dinv = 1.0 / np.sqrt(deg)
    lap = np.eye(n) - dinv[:, None] * w * dinv[None, :]
    lap = 0.5 * (lap + lap.T)
    return lap, labels


@dataclass(frozen=True)
class DerivativeReport:
    trials: int
    worst_adjoint: float
    worst_grad: float
    worst_jvp: float


def _rand_blocks(rng, shapes) -> Blocks:
    return Blocks(rng.standard_normal(s) for s in shapes)


def validate_derivatives(
    problem: CompositeProblem,
    trials: int = 20,
    seed=0,
    adjoint_tol: float = 1e-10,
    fd_tol: float = 1e-6,
) -> DerivativeReport:
    """Check adjoint consistency and derivative accuracy at random points.

    Raises :class:`ValidationFailed` naming the offending map when a relative
    error exceeds its bound.
    """
    rng = np.random.default_rng(seed)
    h = 1e-5
    worst_adj = worst_grad = worst_jvp = 0.0
    for _ in range(trials):
        x = problem.manifold.random_point(rng)
        v = rng.standard_normal(x.shape)
        v = v / np.linalg.norm(v)
        w = _rand_blocks(rng, problem.z_shapes)
        w = w / w.norm()

        jv = problem.F_jvp(x, v)
        lhs = jv.dot(w)
        rhs = float(np.vdot(v, problem.F_vjp(x, w)))
        scale = max(1.0, abs(lhs), abs(rhs))
        err = abs(lhs - rhs) / scale
        worst_adj = max(worst_adj, err)
        if err > adjoint_tol:
            raise ValidationFailed(
                f"adjoint identity violated for {problem.name or 'problem'}: "
                f"relative error {err:.3e}"
            )

        directional = float(np.vdot(problem.f_grad(x), v))
        fd = (problem.f_eval(x + h * v) - problem.f_eval(x - h * v)) / (2.0 * h)
        err = abs(directional - fd) / max(1.0, abs(fd))
        worst_grad = max(worst_grad, err)
        if err > fd_tol:
            raise ValidationFailed(
                f"gradient of f mismatches finite differences: {err:.3e}"
            )

        fd_blocks = (problem.F_eval(x + h * v) - problem.F_eval(x - h * v)) * (
            1.0 / (2.0 * h)
        )
        err = (jv - fd_blocks).norm() / max(1.0, fd_blocks.norm())
        worst_jvp = max(worst_jvp, err)
        if err > fd_tol:
            raise ValidationFailed(
                f"Jacobian-vector product mismatches finite differences: {err:.3e}"
            )
    return DerivativeReport(
        trials=trials,
        worst_adjoint=worst_adj,
        worst_grad=worst_grad,
        worst_jvp=worst_jvp,
    )
