"""Block vectors for product matrix spaces.

Values of the inner mapping, dual variables and their gradients all live in a
product of one or two dense matrix spaces. :class:`Blocks` wraps the tuple of
arrays with the vector-space arithmetic the solvers need, so solver code reads
like ordinary linear algebra regardless of how many blocks the codomain has.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np


class Blocks:
    """Immutable tuple of float ndarrays with vector-space arithmetic."""

    __slots__ = ("parts",)

    def __init__(self, parts: Iterable[np.ndarray]):
        self.parts = tuple(np.asarray(p, dtype=float) for p in parts)

    @classmethod
    def single(cls, a: np.ndarray) -> "Blocks":
        return cls((a,))

    @classmethod
    def zeros(cls, shapes: Sequence[tuple]) -> "Blocks":
        return cls(tuple(np.zeros(s) for s in shapes))

    @property
    def shapes(self) -> tuple:
        return tuple(p.shape for p in self.parts)

    def __len__(self) -> int:
        return len(self.parts)

    def __getitem__(self, i: int) -> np.ndarray:
        return self.parts[i]

    def __iter__(self):
        return iter(self.parts)

    def __add__(self, other: "Blocks") -> "Blocks":
        return Blocks(a + b for a, b in zip(self.parts, other.parts, strict=True))

    def __sub__(self, other: "Blocks") -> "Blocks":
        return Blocks(a - b for a, b in zip(self.parts, other.parts, strict=True))

    def __mul__(self, s: float) -> "Blocks":
        return Blocks(s * a for a in self.parts)

    __rmul__ = __mul__

    def __truediv__(self, s: float) -> "Blocks":
        return self * (1.0 / s)

    def __neg__(self) -> "Blocks":
        return Blocks(-a for a in self.parts)

    def dot(self, other: "Blocks") -> float:
        return float(
            sum(np.vdot(a, b) for a, b in zip(self.parts, other.parts, strict=True))
        )

    def norm(self) -> float:
        return math.sqrt(self.dot(self))

    def copy(self) -> "Blocks":
        return Blocks(a.copy() for a in self.parts)

    def ravel(self) -> np.ndarray:
        """Flatten all blocks into one vector (for generic linear solvers)."""
        return np.concatenate([p.ravel() for p in self.parts])

    @classmethod
    def unravel(cls, vec: np.ndarray, shapes: Sequence[tuple]) -> "Blocks":
        """Inverse of :meth:`ravel` for the given block shapes."""
        parts = []
        at = 0
        for s in shapes:
            n = int(np.prod(s))
            parts.append(vec[at : at + n].reshape(s))
            at += n
        return cls(parts)

    def __repr__(self) -> str:
        return f"Blocks(shapes={self.shapes})"
