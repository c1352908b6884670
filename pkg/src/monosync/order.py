"""Signed-coordinate partial order on points and boxes in R^k.

The order is parametrized by a set of coordinates compared increasingly;
all remaining coordinates are compared decreasingly.  ``x < y`` therefore
means every increasing coordinate of ``x`` is strictly below the one of
``y`` and every decreasing coordinate strictly above.  Box comparisons are
conservative: a ``LESS``/``GREATER`` verdict is sound for every point pair
drawn from the two boxes, while ``INCONCLUSIVE`` claims nothing.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DimensionMismatchError

__all__ = [
    "PointCmp",
    "BoxCmp",
    "JOrder",
    "Box",
    "cmp_points",
    "cmp_boxes",
    "projections_disjoint",
]


class PointCmp(Enum):
    LESS = "less"
    GREATER = "greater"
    EQUAL = "equal"
    INCOMPARABLE = "incomparable"


class BoxCmp(Enum):
    LESS = "less"
    GREATER = "greater"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class JOrder:
    """Strict partial order on R^dim with a per-coordinate direction.

    Coordinates listed in ``increasing`` (1-based indices) are compared
    with ``<``, all others with ``>``.  ``strict_tol`` is the margin below
    which a coordinate difference counts as order-ambiguous rather than
    strict; it must never be negative.
    """

    dim: int
    increasing: frozenset[int]
    strict_tol: float = 1e-12

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dim}")
        inc = frozenset(int(i) for i in self.increasing)
        if not inc <= set(range(1, self.dim + 1)):
            raise ValueError(
                f"increasing coordinates {sorted(inc)} not a subset of 1..{self.dim}"
            )
        if not (self.strict_tol >= 0.0):
            raise ValueError("strict_tol must be non-negative")
        object.__setattr__(self, "increasing", inc)
        signs = np.where(
            np.isin(np.arange(1, self.dim + 1), sorted(inc)), 1.0, -1.0
        )
        signs.flags.writeable = False
        object.__setattr__(self, "_signs", signs)

    @property
    def signs(self) -> np.ndarray:
        """+1 for increasing coordinates, -1 for decreasing ones."""
        return self._signs  # type: ignore[attr-defined]


def _as_point(x, dim: int) -> np.ndarray:
    p = np.asarray(x, dtype=float)
    if p.shape != (dim,):
        raise DimensionMismatchError(f"expected a point of dimension {dim}, got shape {p.shape}")
    return p


@dataclass(frozen=True)
class Box:
    """Axis-aligned box [lo_1,hi_1] x ... x [lo_k,hi_k]."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lo, dtype=float).reshape(-1)
        hi = np.array(self.hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise DimensionMismatchError("box corners have different dimensions")
        if lo.size < 1:
            raise ValueError("box must have dimension >= 1")
        if np.any(lo > hi):
            raise ValueError("box lower corner exceeds upper corner")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def diameter(self) -> float:
        """Taxicab diameter: the sum of the coordinate spans."""
        return float(np.sum(self.hi - self.lo))

    @property
    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def corners(self) -> np.ndarray:
        """All 2^dim corner points, shape (2^dim, dim).  Guarded for dim <= 20."""
        if self.dim > 20:
            raise ValueError("corner enumeration limited to dimension 20")
        grid = np.stack(
            np.meshgrid(*[(self.lo[i], self.hi[i]) for i in range(self.dim)], indexing="ij"),
            axis=-1,
        )
        return grid.reshape(-1, self.dim)

    def contains(self, points: np.ndarray, tol: float = 0.0) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.dim:
            raise DimensionMismatchError("point dimension does not match box")
        return np.all((pts >= self.lo - tol) & (pts <= self.hi + tol), axis=1)

    def contains_box(self, other: "Box", tol: float = 0.0) -> bool:
        if other.dim != self.dim:
            raise DimensionMismatchError("box dimensions differ")
        return bool(np.all(other.lo >= self.lo - tol) and np.all(other.hi <= self.hi + tol))

    def union(self, other: "Box") -> "Box":
        if other.dim != self.dim:
            raise DimensionMismatchError("box dimensions differ")
        return Box(np.minimum(self.lo, other.lo), np.maximum(self.hi, other.hi))

    def scaled(self, factor: float) -> "Box":
        """Box scaled about its center by ``factor`` >= 0."""
        c = self.center
        half = 0.5 * factor * (self.hi - self.lo)
        return Box(c - half, c + half)

    @staticmethod
    def hull(points: np.ndarray) -> "Box":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return Box(pts.min(axis=0), pts.max(axis=0))


def cmp_points(x, y, order: JOrder) -> PointCmp:
    """Compare two points under the signed-coordinate order.

    LESS means x precedes y with every coordinate margin strictly above
    ``strict_tol``; EQUAL means all coordinates agree within the margin;
    coordinate patterns that fit neither direction are INCOMPARABLE.
    """
    px = _as_point(x, order.dim)
    py = _as_point(y, order.dim)
    tol = order.strict_tol
    diff = py - px
    if np.all(np.abs(diff) <= tol):
        return PointCmp.EQUAL
    signed = diff * order.signs
    if np.all(signed > tol):
        return PointCmp.LESS
    if np.all(signed < -tol):
        return PointCmp.GREATER
    return PointCmp.INCOMPARABLE


def _box_strictly_less(b1: Box, b2: Box, order: JOrder) -> bool:
    inc = order.signs > 0
    tol = order.strict_tol
    ok_inc = np.all(b1.hi[inc] + tol < b2.lo[inc])
    ok_dec = np.all(b1.lo[~inc] - tol > b2.hi[~inc])
    return bool(ok_inc and ok_dec)


def cmp_boxes(b1: Box, b2: Box, order: JOrder) -> BoxCmp:
    """Conservative set-order test on boxes.

    LESS certifies that every point of ``b1`` compares LESS against every
    point of ``b2``; the symmetric claim holds for GREATER.  Anything else
    is INCONCLUSIVE, which is never a disproof.
    """
    if b1.dim != order.dim or b2.dim != order.dim:
        raise DimensionMismatchError("box dimension does not match order dimension")
    if _box_strictly_less(b1, b2, order):
        return BoxCmp.LESS
    if _box_strictly_less(b2, b1, order):
        return BoxCmp.GREATER
    return BoxCmp.INCONCLUSIVE


def projections_disjoint(b1: Box, b2: Box) -> bool:
    """True iff the coordinate projections of the boxes are disjoint in every axis."""
    if b1.dim != b2.dim:
        raise DimensionMismatchError("box dimensions differ")
    return bool(np.all((b1.hi < b2.lo) | (b2.hi < b1.lo)))
