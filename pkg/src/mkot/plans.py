"""Couplings, dual potentials and solve reports shared by both solvers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True, eq=False)
class Plan:
    """Sparse coupling: ``mass[k]`` sits on product index ``index[k]``."""

    index: np.ndarray
    mass: np.ndarray
    shape: tuple

    def __post_init__(self):
        idx = np.asarray(self.index, dtype=np.int64).reshape(-1, len(self.shape))
        mass = np.asarray(self.mass, dtype=float).reshape(-1)
        object.__setattr__(self, "index", idx)
        object.__setattr__(self, "mass", mass)
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))

    @classmethod
    def from_dense(cls, P, threshold=0.0):
        P = np.asarray(P, dtype=float)
        idx = np.argwhere(P > threshold)
        return cls(idx, P[tuple(idx.T)], P.shape)

    @property
    def n(self):
        return len(self.shape)

    @property
    def flat(self):
        return np.ravel_multi_index(tuple(self.index.T), self.shape)

    def to_dense(self):
        out = np.zeros(self.shape)
        np.add.at(out, tuple(self.index.T), self.mass)
        return out

    def marginal(self, j):
        return np.bincount(self.index[:, j], weights=self.mass, minlength=self.shape[j])

    def marginal_residual(self, weights) -> float:
        return max(float(np.max(np.abs(self.marginal(j) - w))) for j, w in enumerate(weights))

    def cost(self, tensor) -> float:
        """``sum mass * c`` over the support (exact summation)."""
        vals = tensor[tuple(self.index.T)]
        keep = self.mass != 0
        return math.fsum((self.mass[keep] * vals[keep]).tolist())

    def support_size(self, threshold=0.0):
        return int(np.count_nonzero(self.mass > threshold))

    def pushforward(self, fn) -> "Plan":
        """Plan with each mass moved from ``t`` to ``fn(t)`` (``fn`` maps index arrays)."""
        return Plan(fn(self.index), self.mass.copy(), self.shape)

    def l1_distance(self, other: "Plan") -> float:
        return float(np.sum(np.abs(self.to_dense() - other.to_dense())))


@dataclass(frozen=True, eq=False)
class Potentials:
    """Dual n-tuple, one vector per marginal.

    ``sense`` fixes the sign convention: for ``"min"`` problems
    ``sum_j v_j(t_j) <= c(t)``; for ``"max"`` problems ``sum_j v_j(t_j) >= c(t)``.
    """

    vectors: tuple
    sense: str = "min"

    def __post_init__(self):
        vecs = tuple(np.array(v, dtype=float).reshape(-1) for v in self.vectors)
        object.__setattr__(self, "vectors", vecs)

    @property
    def n(self):
        return len(self.vectors)

    def min_form(self):
        """Vectors in the internal convention (``sum <= ctilde``)."""
        if self.sense == "min":
            return [v.copy() for v in self.vectors]
        return [-v for v in self.vectors]

    @classmethod
    def from_min_form(cls, vectors, sense):
        if sense == "min":
            return cls(tuple(vectors), "min")
        return cls(tuple(-np.asarray(v) for v in vectors), "max")

    def dual_value(self, weights) -> float:
        return math.fsum(math.fsum((v * w).tolist()) for v, w in zip(self.vectors, weights))

    def normalized(self, weights) -> "Potentials":
        """Shift so vectors 2..n have weighted mean zero; vector 1 absorbs it."""
        vecs = [v.copy() for v in self.vectors]
        shift = 0.0
        for j in range(1, len(vecs)):
            s = math.fsum((vecs[j] * weights[j]).tolist())
            vecs[j] = vecs[j] - s
            shift += s
        vecs[0] = vecs[0] + shift
        return Potentials(tuple(vecs), self.sense)


@dataclass
class SolveReport:
    primal_value: float
    dual_value: float
    gap: float
    solver: str
    iterations: int
    converged: bool = True
    extras: dict = field(default_factory=dict)


def feasibility_violation(vectors_min, problem) -> float:
    """Max over finite cells of ``(sum psi - ctilde)_+``."""
    S = problem.full_sum(vectors_min)
    fin = problem.finite
    if not fin.any():
        return 0.0
    return float(max(0.0, np.max(S[fin] - problem.ctilde[fin])))
