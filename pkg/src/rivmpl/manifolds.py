"""Matrix manifolds: tangent projection, retraction, feasibility diagnostics.

Three geometries are provided: the Stiefel manifold St(n, r) of orthonormal
frames, the symplectic Stiefel manifold Sp(2r, 2n) of symplectic frames (with
ambient shape 2n x 2r), and the unit sphere as a cheap test geometry. Points
and directions are dense ambient matrices; tangent projections are orthogonal
with respect to the trace inner product.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import RankDeficient, qr_positive, solve_lyapunov_spd, sym_eig


class DimensionMismatch(ValueError):
    """Array shape does not match the manifold's ambient shape."""


class InfeasiblePoint(ValueError):
    """Base point violates the manifold constraint beyond tolerance."""


class RetractionFailure(RuntimeError):
    """Retraction could not produce a feasible point (singular factor/solve)."""


FEAS_TOL = 1e-8
RETRACT_TANGENT_TOL = 1e-6


def lmul_j(a: np.ndarray) -> np.ndarray:
    """Left-multiply by the standard symplectic form: J_{2k} @ a."""
    k = a.shape[0] // 2
    return np.concatenate([a[k:], -a[:k]], axis=0)


def rmul_j(a: np.ndarray) -> np.ndarray:
    """Right-multiply by the standard symplectic form: a @ J_{2k}."""
    k = a.shape[1] // 2
    return np.concatenate([-a[:, k:], a[:, :k]], axis=1)


def symplectic_form(k: int) -> np.ndarray:
    """The 2k x 2k matrix J with blocks [[0, I], [-I, 0]]."""
    j = np.zeros((2 * k, 2 * k))
    j[:k, k:] = np.eye(k)
    j[k:, :k] = -np.eye(k)
    return j


def symplectic_inverse(x: np.ndarray) -> np.ndarray:
    """X^+ = J_{2r}^T X^T J_{2n} for a 2n x 2r matrix X."""
    return -lmul_j(rmul_j(x.T))


def _skew(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m - m.T)


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


class Manifold:
    """Common checks; concrete geometry lives in the subclasses."""

    ambient_shape: tuple[int, int]

    def _check_shape(self, a: np.ndarray, what: str) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        if a.shape != self.ambient_shape:
            raise DimensionMismatch(
                f"{what} has shape {a.shape}, expected {self.ambient_shape} on {self}"
            )
        return a

    def _check_point(self, x: np.ndarray) -> np.ndarray:
        x = self._check_shape(x, "point")
        err = self.feasibility_error(x)
        if err > FEAS_TOL:
            raise InfeasiblePoint(f"feasibility error {err:.3e} exceeds {FEAS_TOL}")
        return x

    def feasibility_error(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def tangency_residual(self, x: np.ndarray, v: np.ndarray) -> float:
        raise NotImplementedError

    def tangent_project(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return self.tangent_projector(x)(self._check_shape(u, "direction"))

    def tangent_projector(self, x: np.ndarray):
        """Validate x once and return the projection map u -> P_x(u)."""
        raise NotImplementedError

    def retract(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def random_point(self, rng) -> np.ndarray:
        raise NotImplementedError

    def _check_retract_inputs(self, x: np.ndarray, v: np.ndarray):
        x = self._check_point(x)
        v = self._check_shape(v, "direction")
        res = self.tangency_residual(x, v)
        if res > RETRACT_TANGENT_TOL * max(1.0, float(np.linalg.norm(v))):
            raise ValueError(f"direction is not tangent (residual {res:.3e})")
        return x, v


@dataclass(frozen=True)
class Stiefel(Manifold):
    """St(n, r): n x r matrices with orthonormal columns, r <= n."""

    n: int
    r: int

    def __post_init__(self):
        if not 1 <= self.r <= self.n:
            raise ValueError(f"need 1 <= r <= n, got n={self.n}, r={self.r}")

    @property
    def ambient_shape(self) -> tuple[int, int]:
        return (self.n, self.r)

    def feasibility_error(self, x: np.ndarray) -> float:
        x = self._check_shape(x, "point")
        return float(np.linalg.norm(x.T @ x - np.eye(self.r)))

    def tangency_residual(self, x: np.ndarray, v: np.ndarray) -> float:
        return float(np.linalg.norm(x.T @ v + v.T @ x))

    def tangent_projector(self, x: np.ndarray):
        x = self._check_point(x)

        def project(u: np.ndarray) -> np.ndarray:
            xtu = x.T @ u
            return u - x @ xtu + x @ _skew(xtu)

        return project

    def retract(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        x, v = self._check_retract_inputs(x, v)
        try:
            q, _ = qr_positive(x + v)
        except RankDeficient as exc:
            raise RetractionFailure(f"QR retraction failed: {exc}") from exc
        return q

    def random_point(self, rng) -> np.ndarray:
        g = _as_rng(rng).standard_normal(self.ambient_shape)
        q, _ = qr_positive(g)
        return q


@dataclass(frozen=True)
class SymplecticStiefel(Manifold):
    """Sp(2r, 2n): 2n x 2r matrices X with X^T J_{2n} X = J_{2r}, r <= n."""

    n: int
    r: int

    def __post_init__(self):
        if not 1 <= self.r <= self.n:
            raise ValueError(f"need 1 <= r <= n, got n={self.n}, r={self.r}")

    @property
    def ambient_shape(self) -> tuple[int, int]:
        return (2 * self.n, 2 * self.r)

    def feasibility_error(self, x: np.ndarray) -> float:
        x = self._check_shape(x, "point")
        return float(np.linalg.norm(x.T @ lmul_j(x) - symplectic_form(self.r)))

    def tangency_residual(self, x: np.ndarray, v: np.ndarray) -> float:
        jx = lmul_j(x)
        return float(np.linalg.norm(v.T @ jx + x.T @ lmul_j(v)))

    def tangent_projector(self, x: np.ndarray):
        # Orthogonal projection: u + J x u* with the skew correction u* solving
        # the small Lyapunov equation driven by the tangency defect of u. The
        # eigendecomposition of x^T x is shared across applications.
        x = self._check_point(x)
        jx = lmul_j(x)
        gram = x.T @ x
        eig = sym_eig(gram)

        def project(u: np.ndarray) -> np.ndarray:
            rhs = u.T @ jx - jx.T @ u
            return u + jx @ solve_lyapunov_spd(gram, rhs, eig=eig)

        return project

    def retract(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Cayley transform of a Hamiltonian extension of the direction.

        Builds a symmetric S with J S x = v, then applies the Cayley map of
        H = J S to x. The result is symplectic up to the accuracy of one dense
        linear solve; feasibility beyond tolerance raises
        :class:`RetractionFailure` so the caller can shrink the step.
        """
        x, v = self._check_retract_inputs(x, v)
        xplus = symplectic_inverse(x)
        w = -lmul_j(v @ xplus)
        p = x @ xplus
        s = w + w.T - 0.5 * (p.T @ w + w.T @ p)
        h = lmul_j(s)
        eye = np.eye(h.shape[0])
        try:
            y = np.linalg.solve(eye - 0.5 * h, x + 0.5 * (h @ x))
        except np.linalg.LinAlgError as exc:
            raise RetractionFailure(f"Cayley solve singular: {exc}") from exc
        err = self.feasibility_error(y)
        if not np.isfinite(err) or err > FEAS_TOL:
            raise RetractionFailure(
                f"Cayley step lost feasibility (error {err:.3e})"
            )
        return y

    def canonical_point(self) -> np.ndarray:
        """A feasible frame built from coordinate axes."""
        n, r = self.n, self.r
        e = np.zeros((2 * n, 2 * r))
        e[:r, :r] = np.eye(r)
        e[n : n + r, r:] = np.eye(r)
        return e

    def random_point(self, rng) -> np.ndarray:
        rng = _as_rng(rng)
        e = self.canonical_point()
        t = self.tangent_project(e, rng.standard_normal(self.ambient_shape))
        nrm = float(np.linalg.norm(t))
        if nrm > 0.0:
            t = (0.5 / nrm) * t
        return self.retract(e, t)


@dataclass(frozen=True)
class Sphere(Manifold):
    """Unit sphere in R^n, stored as n x 1 matrices."""

    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"need n >= 1, got n={self.n}")

    @property
    def ambient_shape(self) -> tuple[int, int]:
        return (self.n, 1)

    def feasibility_error(self, x: np.ndarray) -> float:
        x = self._check_shape(x, "point")
        return float(abs(np.vdot(x, x) - 1.0))

    def tangency_residual(self, x: np.ndarray, v: np.ndarray) -> float:
        return float(abs(np.vdot(x, v)))

    def tangent_projector(self, x: np.ndarray):
        x = self._check_point(x)

        def project(u: np.ndarray) -> np.ndarray:
            return u - x * float(np.vdot(x, u))

        return project

    def retract(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        x, v = self._check_retract_inputs(x, v)
        y = x + v
        nrm = float(np.linalg.norm(y))
        if nrm <= 1e-12:
            raise RetractionFailure("step maps to the origin")
        return y / nrm

    def random_point(self, rng) -> np.ndarray:
        g = _as_rng(rng).standard_normal((self.n, 1))
        nrm = float(np.linalg.norm(g))
        if nrm == 0.0:
            g[0, 0] = 1.0
            nrm = 1.0
        return g / nrm
