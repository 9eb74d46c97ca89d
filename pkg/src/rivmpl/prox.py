"""Convex regularizers with closed-form proximal maps.

Each regularizer knows its block shape and exposes the value, the proximal
map, the Moreau envelope, one element of the Clarke generalized Jacobian of
the prox (used inside the generalized Hessian of the dual), and a global
Lipschitz bound (used to seed the proximal weight). :class:`SeparableSum`
lifts the same interface to product codomains represented as :class:`Blocks`.

Clarke elements at kink points (an entry or block norm exactly at the
threshold) take the zero derivative, which keeps the operator PSD with
spectrum in [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .blocks import Blocks


class ShapeMismatch(ValueError):
    """Input shape differs from the regularizer's declared block shape."""


class NonpositiveGamma(ValueError):
    """Proximal parameter must be strictly positive."""


def _check_gamma(gamma: float) -> float:
    if not gamma > 0.0:
        raise NonpositiveGamma(f"gamma must be positive, got {gamma}")
    return float(gamma)


class Regularizer:
    """Interface for a convex block regularizer with closed-form prox."""

    lam: float
    shape: tuple[int, ...]

    def _check(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if z.shape != tuple(self.shape):
            raise ShapeMismatch(f"expected shape {self.shape}, got {z.shape}")
        return z

    def value(self, z: np.ndarray) -> float:
        raise NotImplementedError

    def prox(self, gamma: float, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def moreau(self, gamma: float, z: np.ndarray) -> float:
        """Moreau envelope: ||z - p||^2 / (2 gamma) + value(p) at p = prox(z)."""
        gamma = _check_gamma(gamma)
        p = self.prox(gamma, z)
        diff = self._check(z) - p
        return float(np.vdot(diff, diff)) / (2.0 * gamma) + self.value(p)

    def prox_jacobian(self, gamma: float, z: np.ndarray) -> Callable:
        raise NotImplementedError

    def lipschitz_bound(self) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class L1Norm(Regularizer):
    """Entrywise lam * ||z||_1; prox is soft thresholding."""

    lam: float
    shape: tuple[int, ...]

    def __post_init__(self):
        if self.lam < 0.0:
            raise ValueError("weight must be nonnegative")

    def value(self, z: np.ndarray) -> float:
        return self.lam * float(np.sum(np.abs(self._check(z))))

    def prox(self, gamma: float, z: np.ndarray) -> np.ndarray:
        gamma = _check_gamma(gamma)
        z = self._check(z)
        return np.sign(z) * np.maximum(np.abs(z) - gamma * self.lam, 0.0)

    def prox_jacobian(self, gamma: float, z: np.ndarray) -> Callable:
        gamma = _check_gamma(gamma)
        mask = (np.abs(self._check(z)) > gamma * self.lam).astype(float)

        def apply(d: np.ndarray) -> np.ndarray:
            return mask * d

        return apply

    def lipschitz_bound(self) -> float:
        return self.lam * math.sqrt(float(np.prod(self.shape)))


def _shrink_jacobian(gamma_lam: float, b: np.ndarray):
    """Jacobian of b -> b * max(1 - gamma_lam / ||b||, 0) when ||b|| > gamma_lam."""
    nrm = float(np.linalg.norm(b))

    def apply(d: np.ndarray) -> np.ndarray:
        return (1.0 - gamma_lam / nrm) * d + (
            gamma_lam * float(np.vdot(b, d)) / nrm**3
        ) * b

    return apply


@dataclass(frozen=True)
class RowGroupNorm(Regularizer):
    """Row-wise group norm lam * sum_i ||z_i.||; prox shrinks rows."""

    lam: float
    shape: tuple[int, int]

    def __post_init__(self):
        if self.lam < 0.0:
            raise ValueError("weight must be nonnegative")

    def _row_norms(self, z: np.ndarray) -> np.ndarray:
        return np.linalg.norm(z, axis=1)

    def value(self, z: np.ndarray) -> float:
        return self.lam * float(np.sum(self._row_norms(self._check(z))))

    def prox(self, gamma: float, z: np.ndarray) -> np.ndarray:
        gamma = _check_gamma(gamma)
        z = self._check(z)
        norms = self._row_norms(z)
        thr = gamma * self.lam
        factor = np.where(norms > thr, 1.0 - thr / np.maximum(norms, 1e-300), 0.0)
        return z * factor[:, None]

    def prox_jacobian(self, gamma: float, z: np.ndarray) -> Callable:
        gamma = _check_gamma(gamma)
        z = self._check(z)
        thr = gamma * self.lam
        norms = self._row_norms(z)
        active = norms > thr
        safe = np.maximum(norms, 1e-300)
        lin = np.where(active, 1.0 - thr / safe, 0.0)
        rank1 = np.where(active, thr / safe**3, 0.0)

        def apply(d: np.ndarray) -> np.ndarray:
            dots = np.sum(z * d, axis=1)
            return lin[:, None] * d + (rank1 * dots)[:, None] * z

        return apply

    def lipschitz_bound(self) -> float:
        return self.lam * math.sqrt(self.shape[0])


@dataclass(frozen=True)
class FrobeniusNorm(Regularizer):
    """lam * ||z||_F on one block; prox shrinks the whole block."""

    lam: float
    shape: tuple[int, ...]

    def __post_init__(self):
        if self.lam < 0.0:
            raise ValueError("weight must be nonnegative")

    def value(self, z: np.ndarray) -> float:
        return self.lam * float(np.linalg.norm(self._check(z)))

    def prox(self, gamma: float, z: np.ndarray) -> np.ndarray:
        gamma = _check_gamma(gamma)
        z = self._check(z)
        nrm = float(np.linalg.norm(z))
        thr = gamma * self.lam
        if nrm <= thr:
            return np.zeros_like(z)
        return (1.0 - thr / nrm) * z

    def prox_jacobian(self, gamma: float, z: np.ndarray) -> Callable:
        gamma = _check_gamma(gamma)
        z = self._check(z)
        thr = gamma * self.lam
        if np.linalg.norm(z) > thr:
            return _shrink_jacobian(thr, z)

        def zero(d: np.ndarray) -> np.ndarray:
            return np.zeros_like(d)

        return zero

    def lipschitz_bound(self) -> float:
        return self.lam


@dataclass(frozen=True)
class SeparableSum:
    """Sum of independent regularizers acting blockwise on :class:`Blocks`."""

    regs: tuple[Regularizer, ...]

    @property
    def shapes(self) -> tuple:
        return tuple(r.shape for r in self.regs)

    def _check(self, z: Blocks) -> Blocks:
        if len(z) != len(self.regs) or z.shapes != self.shapes:
            raise ShapeMismatch(
                f"expected block shapes {self.shapes}, got {z.shapes}"
            )
        return z

    def value(self, z: Blocks) -> float:
        z = self._check(z)
        return sum(r.value(b) for r, b in zip(self.regs, z))

    def prox(self, gamma: float, z: Blocks) -> Blocks:
        z = self._check(z)
        return Blocks(r.prox(gamma, b) for r, b in zip(self.regs, z))

    def moreau(self, gamma: float, z: Blocks) -> float:
        z = self._check(z)
        return sum(r.moreau(gamma, b) for r, b in zip(self.regs, z))

    def prox_jacobian(self, gamma: float, z: Blocks) -> Callable:
        z = self._check(z)
        ops = tuple(r.prox_jacobian(gamma, b) for r, b in zip(self.regs, z))

        def apply(d: Blocks) -> Blocks:
            return Blocks(op(b) for op, b in zip(ops, d))

        return apply

    def lipschitz_bound(self) -> float:
        return math.sqrt(sum(r.lipschitz_bound() ** 2 for r in self.regs))
