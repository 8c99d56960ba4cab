"""Finite-support probability measures and product-index bookkeeping."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (DuplicatePoint, MixedDimension, NonPositiveWeight,
                     Overflow, WeightSumMismatch)

WEIGHT_SUM_TOL = 1e-12
MAX_PRODUCT = 2 ** 53


@dataclass(frozen=True, eq=False)
class DiscreteMarginal:
    """Atomic probability measure: ``weights[i]`` sits on ``points[i]``.

    Arrays are copied and flagged read-only on construction.  Validation is
    separate (:func:`validate_marginal`) so that invalid data can still be
    represented and reported.
    """

    points: np.ndarray
    weights: np.ndarray
    label: str = ""

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        w = np.array(self.weights, dtype=float).reshape(-1)
        pts.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def same_as(self, other: "DiscreteMarginal") -> bool:
        """Exact equality of points and weights (labels ignored)."""
        return (self.points.shape == other.points.shape
                and np.array_equal(self.points, other.points)
                and np.array_equal(self.weights, other.weights))


def validate_marginal(m: DiscreteMarginal) -> DiscreteMarginal:
    """Return ``m`` unchanged if it is a valid probability measure.

    Raises NonPositiveWeight, WeightSumMismatch, DuplicatePoint or
    MixedDimension.  Weights are never renormalized.
    """
    if m.points.ndim != 2 or m.points.shape[0] != m.weights.shape[0]:
        raise MixedDimension(
            f"marginal {m.label!r}: {m.points.shape[0]} points for "
            f"{m.weights.shape[0]} weights")
    if m.size == 0:
        raise WeightSumMismatch(f"marginal {m.label!r} has empty support")
    if not np.all(np.isfinite(m.points)):
        raise MixedDimension(f"marginal {m.label!r}: non-finite coordinates")
    bad = np.flatnonzero(~(m.weights > 0))
    if bad.size:
        raise NonPositiveWeight(
            f"marginal {m.label!r}: weight[{bad[0]}] = {m.weights[bad[0]]!r}")
    total = math.fsum(m.weights)
    if abs(total - 1.0) > WEIGHT_SUM_TOL:
        raise WeightSumMismatch(
            f"marginal {m.label!r}: weights sum to {total!r}")
    seen = {}
    for i, p in enumerate(map(tuple, m.points.tolist())):
        if p in seen:
            raise DuplicatePoint(
                f"marginal {m.label!r}: points {seen[p]} and {i} coincide")
        seen[p] = i
    return m


def make_marginal(points, weights, label="") -> DiscreteMarginal:
    """Build and validate in one step."""
    return validate_marginal(DiscreteMarginal(points, weights, label))


def check_dimensions(marginals) -> int:
    """Common dimension of all marginals, or MixedDimension."""
    dims = {m.dim for m in marginals}
    if len(dims) != 1:
        raise MixedDimension(f"marginal dimensions differ: {sorted(dims)}")
    return dims.pop()


def product_size(marginals) -> int:
    """Number of cells in the product of supports.

    Raises Overflow past 2**53 (exact float-representable integers).
    """
    if len(marginals) < 2:
        raise ValueError("need at least two marginals")
    total = 1
    for m in marginals:
        total *= m.size
        if total > MAX_PRODUCT:
            raise Overflow(f"product of support sizes exceeds 2^53")
    return total


def shape_of(marginals) -> tuple[int, ...]:
    return tuple(m.size for m in marginals)


@dataclass(frozen=True)
class ProductIndex:
    """One cell ``(i_1, ..., i_n)`` of the product of supports."""

    indices: tuple[int, ...]
    shape: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if self.shape:
            if len(self.indices) != len(self.shape):
                raise IndexError("index length does not match product rank")
            for i, s in zip(self.indices, self.shape):
                if not 0 <= i < s:
                    raise IndexError(f"index {i} out of range for size {s}")

    def flat(self) -> int:
        return int(np.ravel_multi_index(self.indices, self.shape))
