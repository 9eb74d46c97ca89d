"""Evaluation metrics: clustering quality and sparsity diagnostics."""

from __future__ import annotations

import math

import numpy as np
from sklearn.cluster import KMeans

SPARSITY_REL_THRESHOLD = 1e-4


class DegenerateInput(ValueError):
    """Fewer distinct points than requested clusters."""


class LengthMismatch(ValueError):
    """Label sequences have different lengths."""


def kmeans(points: np.ndarray, k: int, restarts: int = 10, seed=0) -> np.ndarray:
    """Lloyd's k-means with k-means++ seeding, best of ``restarts`` by WCSS."""
    points = np.asarray(points, dtype=float)
    if points.ndim != 2:
        raise ValueError(f"points must be 2-d, got shape {points.shape}")
    if k < 1 or k > points.shape[0]:
        raise ValueError(f"need 1 <= k <= number of points, got k={k}")
    distinct = np.unique(points, axis=0).shape[0]
    if distinct < k:
        raise DegenerateInput(f"{distinct} distinct points for k={k} clusters")
    seed = int(np.random.default_rng(seed).integers(0, 2**31 - 1))
    km = KMeans(
        n_clusters=k, init="k-means++", n_init=restarts, algorithm="lloyd",
        random_state=seed,
    )
    return km.fit_predict(points)


def nmi(labels_a, labels_b) -> float:
    """Mutual information normalized by the geometric mean of the entropies.

    Invariant under relabeling and argument order; returns 1 when both
    partitions are single-cluster and 0 when only one of them is.
    """
    a = np.asarray(labels_a).ravel()
    b = np.asarray(labels_b).ravel()
    if a.shape != b.shape or a.size == 0:
        raise LengthMismatch(f"label lengths {a.shape} vs {b.shape}")
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    na = int(ia.max()) + 1
    nb = int(ib.max()) + 1
    if na == 1 and nb == 1:
        return 1.0
    n = a.size
    cont = np.zeros((na, nb))
    np.add.at(cont, (ia, ib), 1.0)
    pa = cont.sum(axis=1) / n
    pb = cont.sum(axis=0) / n
    pj = cont / n
    mask = pj > 0
    terms = pj[mask] * np.log(pj[mask] / np.outer(pa, pb)[mask])
    # Sorted summation keeps the value exactly symmetric in the arguments.
    mi = float(np.sum(np.sort(terms)))
    ha = -float(np.sum(np.sort(pa[pa > 0] * np.log(pa[pa > 0]))))
    hb = -float(np.sum(np.sort(pb[pb > 0] * np.log(pb[pb > 0]))))
    denom = math.sqrt(ha * hb)
    if denom <= 0.0:
        return 0.0
    return min(1.0, max(0.0, mi / denom))


def elementwise_sparsity(m: np.ndarray) -> float:
    """Fraction of entries at or below 1e-4 of the largest magnitude.

    An all-zero matrix reports 1 (every entry passes the threshold test).
    """
    a = np.abs(np.asarray(m, dtype=float)).ravel()
    if a.size == 0:
        raise ValueError("empty matrix")
    mx = a.max()
    if mx == 0.0:
        return 1.0
    return float(np.mean(a <= SPARSITY_REL_THRESHOLD * mx))


def sparsity_z(x: np.ndarray) -> float:
    """Entrywise sparsity of the embedding Gram matrix X X^T."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise ValueError("empty matrix")
    return elementwise_sparsity(x @ x.T)


def row_sparsity(x: np.ndarray) -> float:
    """Fraction of rows with norm at or below 1e-4 of the largest row norm."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise ValueError("empty matrix")
    norms = np.linalg.norm(x, axis=1)
    mx = norms.max()
    if mx == 0.0:
        return 1.0
    return float(np.mean(norms <= SPARSITY_REL_THRESHOLD * mx))


def infeasibility(x: np.ndarray, c: np.ndarray, e: np.ndarray) -> float:
    """Entrywise l1 norm of the masked coupling E o (X^T C X)."""
    x = np.asarray(x, dtype=float)
    val = x.T @ np.asarray(c, dtype=float) @ x
    return float(np.sum(np.abs(np.asarray(e, dtype=float) * val)))
