"""Cost functions on products of finite supports.

Three variants: the determinant of the points viewed as matrix columns,
the Coulomb repulsion summed over ordered pairs, and an explicit table.
Values live in ``(-inf, +inf]``; +inf marks a forbidden cell and NaN is
rejected everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _kernels
from .errors import DimensionMismatch, InputError, TooLarge
from .measure import check_dimensions, product_size, shape_of, validate_marginal

KINDS = ("determinant", "coulomb", "table")
SENSES = ("min", "max")
MAX_TENSOR = 10 ** 7


@dataclass(frozen=True, eq=False)
class CostSpec:
    kind: str
    sense: str = "min"
    values: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown cost kind {self.kind!r}")
        if self.sense not in SENSES:
            raise InputError(f"unknown sense {self.sense!r}")
        if self.kind == "table":
            if self.values is None:
                raise InputError("table cost needs values")
            v = np.array(self.values, dtype=float)
            if np.isnan(v).any():
                raise InputError("cost table contains NaN")
            if (v == -np.inf).any():
                raise InputError("cost table contains -inf")
            v.flags.writeable = False
            object.__setattr__(self, "values", v)

    def with_sense(self, sense):
        return CostSpec(self.kind, sense, self.values)


def determinant(cols):
    """Determinant of the square matrix whose columns are ``cols``."""
    cols = [np.asarray(c, dtype=float) for c in cols]
    d = len(cols)
    if any(c.shape != (d,) for c in cols):
        raise DimensionMismatch(f"determinant needs {d} columns of length {d}")
    return _det_expr(cols, d)


def _det_expr(cols, d):
    # shared by scalar and broadcast evaluation so both give identical bits
    if d == 1:
        return cols[0][0]
    if d == 2:
        a, b = cols
        return a[0] * b[1] - b[0] * a[1]
    if d == 3:
        a, b, c = cols
        return (a[0] * (b[1] * c[2] - c[1] * b[2])
                - b[0] * (a[1] * c[2] - c[1] * a[2])
                + c[0] * (a[1] * b[2] - b[1] * a[2]))
    mats = np.stack(np.broadcast_arrays(*cols), axis=-1)
    mats = np.moveaxis(mats, 0, -2)
    return np.linalg.det(mats)


def coulomb(points):
    """Sum over ordered pairs i != j of ``1/|x_i - x_j|``; +inf on coincidence."""
    pts = [np.asarray(p, dtype=float) for p in points]
    total = 0.0
    for a, pa in enumerate(pts):
        for b, pb in enumerate(pts):
            if a == b:
                continue
            diff = pa - pb
            if not diff.any():
                return np.inf
            total += 1.0 / np.sqrt(np.sum(diff * diff))
    return float(total)


def eval_cost(spec: CostSpec, points, index=None) -> float:
    """Cost of one tuple of points.

    ``index`` (the ProductIndex tuple) is required for table costs.
    """
    if spec.kind == "table":
        if index is None:
            raise InputError("table cost is looked up by index")
        if len(index) != spec.values.ndim:
            raise DimensionMismatch("index rank does not match table")
        return float(spec.values[tuple(index)])
    n = len(points)
    pts = [np.asarray(p, dtype=float).reshape(-1) for p in points]
    dims = {p.shape[0] for p in pts}
    if len(dims) != 1:
        raise DimensionMismatch("tuple points have different dimensions")
    if spec.kind == "determinant":
        if dims.pop() != n:
            raise DimensionMismatch("determinant cost needs d == n")
        return float(_det_expr(pts, n))
    if n < 2:
        raise DimensionMismatch("coulomb cost needs n >= 2")
    return coulomb(pts)


def _dense(spec, marginals):
    shape = shape_of(marginals)
    n = len(marginals)
    if spec.kind == "table":
        if spec.values.shape != shape:
            raise DimensionMismatch(
                f"table shape {spec.values.shape} != support shape {shape}")
        return np.array(spec.values)
    d = check_dimensions(marginals)
    if spec.kind == "determinant":
        if d != n:
            raise DimensionMismatch(f"determinant cost needs d == n (d={d}, n={n})")
        if d > 3:
            return _det_general(marginals)
        cols = []
        for j, m in enumerate(marginals):
            sh = [1] * n
            sh[j] = m.size
            cols.append([m.points[:, k].reshape(sh) for k in range(d)])
        return np.broadcast_to(_det_expr(cols, d), shape).astype(float)
    pts = np.zeros((n, max(shape), d))
    for j, m in enumerate(marginals):
        pts[j, :m.size] = m.points
    return _kernels.coulomb_tensor(pts, np.array(shape))


def _det_general(marginals):
    n = len(marginals)
    grids = np.meshgrid(*[np.arange(m.size) for m in marginals], indexing="ij")
    mats = np.stack([m.points[g] for m, g in zip(marginals, grids)], axis=-1)
    return np.linalg.det(mats)


def materialize_tensor(spec: CostSpec, marginals) -> CostSpec:
    """Explicit table holding ``eval_cost`` at every cell (sense kept)."""
    if product_size(marginals) > MAX_TENSOR:
        raise TooLarge(f"product size exceeds {MAX_TENSOR}")
    return CostSpec("table", spec.sense, _dense(spec, marginals))


def min_form(values, sense):
    """Sense-normalized tensor: ``c`` for min, ``-c`` for max; +inf kept."""
    if sense == "min":
        return values
    out = -values
    out[np.isposinf(values)] = np.inf
    return out


def tensor_deviation(a, b) -> float:
    """Max |a - b| with inf - inf = 0 and |inf - finite| = inf."""
    ia, ib = np.isinf(a), np.isinf(b)
    if np.any(ia != ib):
        return float("inf")
    fin = ~ia
    if not fin.any():
        return 0.0
    return float(np.max(np.abs(a[fin] - b[fin])))


def act_on_tensor(T, perms):
    """``out[t] = T[perms[0][t_0], ..., perms[n-1][t_{n-1}]]``."""
    return T[np.ix_(*perms)]


def check_cost_invariance(spec: CostSpec, marginals, action) -> float:
    """Largest change of the cost under the simultaneous action."""
    T = materialize_tensor(spec, marginals).values
    return tensor_deviation(T, act_on_tensor(T, action.perms))


class Problem:
    """Marginals plus cost, with the min-form tensor cached.

    ``ctilde`` is the sense-normalized dense tensor; ``finite`` its mask of
    allowed cells.  ``slab(j)`` returns ``ctilde`` with axis ``j`` moved to
    the front and flattened to 2-D, the layout the slice kernels consume.
    """

    def __init__(self, marginals, cost: CostSpec, *, validate=True):
        self.marginals = tuple(marginals)
        if validate:
            for m in self.marginals:
                validate_marginal(m)
        self.cost = cost
        self.n = len(self.marginals)
        self.shape = shape_of(self.marginals)
        self.weights = [m.weights for m in self.marginals]
        self._slabs = {}

    @property
    def sense(self):
        return self.cost.sense

    @cached_property
    def tensor(self) -> np.ndarray:
        T = materialize_tensor(self.cost, self.marginals).values
        T.flags.writeable = False
        return T

    @cached_property
    def ctilde(self) -> np.ndarray:
        T = min_form(np.array(self.tensor), self.sense)
        T.flags.writeable = False
        return T

    @cached_property
    def finite(self) -> np.ndarray:
        return np.isfinite(self.ctilde)

    def slab(self, j):
        if j not in self._slabs:
            self._slabs[j] = np.ascontiguousarray(
                np.moveaxis(self.ctilde, j, 0).reshape(self.shape[j], -1))
        return self._slabs[j]

    def rest_sum(self, vectors, j):
        """Flattened ``sum_{k != j} vectors[k][t_k]`` in ``slab(j)`` order."""
        rest = [k for k in range(self.n) if k != j]
        acc = np.zeros([self.shape[k] for k in rest])
        for pos, k in enumerate(rest):
            sh = [1] * len(rest)
            sh[pos] = self.shape[k]
            acc = acc + np.asarray(vectors[k], dtype=float).reshape(sh)
        return acc.reshape(-1)

    def full_sum(self, vectors):
        """Dense ``sum_k vectors[k][t_k]`` over the whole product."""
        acc = np.zeros(self.shape)
        for k in range(self.n):
            sh = [1] * self.n
            sh[k] = self.shape[k]
            acc = acc + np.asarray(vectors[k], dtype=float).reshape(sh)
        return acc
