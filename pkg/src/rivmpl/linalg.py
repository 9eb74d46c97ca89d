"""Dense numerical kernels: sign-fixed thin QR, symmetric eigendecomposition,
SPD Lyapunov solve, and an operator conjugate-gradient method.

Factorizations are backed by LAPACK through numpy; the wrappers pin down the
sign conventions and error behavior the geometry and solver layers rely on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np


class RankDeficient(np.linalg.LinAlgError):
    """Matrix is numerically rank deficient for the requested factorization."""


class NotSymmetric(ValueError):
    """Input violates the symmetry tolerance."""


class NotSPD(np.linalg.LinAlgError):
    """Operator or matrix is not positive definite where it must be."""


@dataclass(frozen=True)
class SymEig:
    """Eigendecomposition S = Q diag(w) Q^T with w ascending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


@dataclass(frozen=True)
class CgResult:
    x: np.ndarray
    residual: float
    iterations: int
    converged: bool


def qr_positive(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR factorization M = QR with strictly positive diag(R).

    The sign convention makes the factorization unique, so it can serve as a
    retraction. Raises :class:`RankDeficient` when the smallest diagonal entry
    of R falls at or below ``1e-12 * ||M||_F``.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] < m.shape[1]:
        raise ValueError(f"qr_positive needs rows >= cols, got shape {m.shape}")
    q, r = np.linalg.qr(m, mode="reduced")
    d = np.sign(np.diag(r))
    d[d == 0.0] = 1.0
    q = q * d
    r = d[:, None] * r
    if np.min(np.abs(np.diag(r))) <= 1e-12 * np.linalg.norm(m):
        raise RankDeficient(
            f"matrix of shape {m.shape} is numerically rank deficient"
        )
    return q, r


def sym_eig(s: np.ndarray, rel_tol: float = 1e-10) -> SymEig:
    """Eigendecomposition of a symmetric matrix, eigenvalues ascending.

    The input is symmetrized before factoring; asymmetry beyond
    ``rel_tol * ||S||_F`` raises :class:`NotSymmetric`.
    """
    s = np.asarray(s, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError(f"sym_eig needs a square matrix, got shape {s.shape}")
    asym = np.linalg.norm(s - s.T)
    if asym > rel_tol * max(np.linalg.norm(s), 1e-300):
        raise NotSymmetric(f"asymmetry {asym:.3e} exceeds tolerance")
    w, q = np.linalg.eigh(0.5 * (s + s.T))
    return SymEig(eigenvalues=w, eigenvectors=q)


def solve_lyapunov_spd(
    s: np.ndarray, m: np.ndarray, eig: SymEig | None = None
) -> np.ndarray:
    """Solve S U + U S = M for symmetric positive definite S.

    Diagonalizes S and divides entrywise by ``lam_i + lam_j``; a precomputed
    eigendecomposition of S may be passed to amortize repeated solves. Raises
    :class:`NotSPD` when an eigenvalue is at or below ``1e-12`` of the largest.
    """
    if eig is None:
        eig = sym_eig(s)
    w, q = eig.eigenvalues, eig.eigenvectors
    if w[-1] <= 0.0 or w[0] <= 1e-12 * w[-1]:
        raise NotSPD("coefficient matrix is not positive definite")
    mt = q.T @ np.asarray(m, dtype=float) @ q
    u = mt / (w[:, None] + w[None, :])
    return q @ u @ q.T


def cg_solve(
    apply: Callable[[np.ndarray], np.ndarray],
    b: np.ndarray,
    tol: float,
    max_iter: int,
) -> CgResult:
    """Conjugate gradients for ``apply(x) = b`` with an SPD operator.

    Stops when the residual norm drops to ``tol * ||b||`` or the iteration
    budget runs out; the best iterate seen and its residual are returned
    either way. The caller guarantees positive definiteness; nonpositive
    curvature raises :class:`NotSPD` rather than being clamped.
    """
    b = np.asarray(b, dtype=float)
    bnorm = math.sqrt(float(np.vdot(b, b)))
    x = np.zeros_like(b)
    if bnorm == 0.0:
        return CgResult(x=x, residual=0.0, iterations=0, converged=True)
    threshold = tol * bnorm
    r = b.copy()
    p = r.copy()
    rs = float(np.vdot(r, r))
    best_x = x.copy()
    best_res = math.sqrt(rs)
    if best_res <= threshold:
        return CgResult(x=x, residual=best_res, iterations=0, converged=True)
    for it in range(1, max_iter + 1):
        ap = apply(p)
        pap = float(np.vdot(p, ap))
        if pap <= 0.0:
            raise NotSPD(f"nonpositive curvature {pap:.3e} in CG step {it}")
        a = rs / pap
        x = x + a * p
        r = r - a * ap
        rs_new = float(np.vdot(r, r))
        res = math.sqrt(rs_new)
        if res < best_res:
            best_res = res
            best_x = x.copy()
        if res <= threshold:
            return CgResult(x=x, residual=res, iterations=it, converged=True)
        p = r + (rs_new / rs) * p
        rs = rs_new
    return CgResult(x=best_x, residual=best_res, iterations=max_iter, converged=False)
