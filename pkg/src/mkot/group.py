"""Weight-preserving permutation actions on marginal supports.

A permutation ``perm`` sends support index ``i`` to ``perm[i]``.  Products
compose right-to-left: ``compose(g, h)`` is ``g o h``, i.e. ``g[h]``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import (GroupTooLarge, InvalidPermutation, MarginalsNotIdentical,
                     NotMeasurePreserving)

DEFAULT_GROUP_CAP = 10 ** 5


def _as_perm(perm) -> np.ndarray:
    p = np.asarray(perm)
    if p.ndim != 1 or (p.size and not np.issubdtype(p.dtype, np.integer)):
        raise InvalidPermutation("permutation must be a 1-D integer sequence")
    p = p.astype(np.int64)
    if not np.array_equal(np.sort(p), np.arange(p.size)):
        raise InvalidPermutation(f"{p.tolist()} is not a bijection of 0..{p.size - 1}")
    p.flags.writeable = False
    return p


@dataclass(frozen=True, eq=False)
class MarginalMap:
    """Permutation of one marginal's support (``marginal`` is its slot)."""

    perm: np.ndarray
    marginal: int = 0

    def __post_init__(self):
        object.__setattr__(self, "perm", _as_perm(self.perm))

    @property
    def size(self):
        return self.perm.size

    def __eq__(self, other):
        return isinstance(other, MarginalMap) and np.array_equal(self.perm, other.perm)

    def __hash__(self):
        return hash(self.perm.tobytes())

    def power(self, k):
        out = np.arange(self.size)
        for _ in range(k % period(self)):
            out = self.perm[out]
        return out


def marginal_map(perm, marginal, slot=0) -> MarginalMap:
    """Build a MarginalMap and check it preserves ``marginal``'s weights exactly."""
    mm = MarginalMap(perm, slot)
    if mm.size != marginal.size:
        raise InvalidPermutation(
            f"permutation of length {mm.size} on support of size {marginal.size}")
    w = marginal.weights
    if not np.array_equal(w[mm.perm], w):
        i = int(np.flatnonzero(w[mm.perm] != w)[0])
        raise NotMeasurePreserving(
            f"slot {slot}: weight[{i}] = {w[i]!r} but weight[perm[{i}]] = {w[mm.perm[i]]!r}")
    return mm


@dataclass(frozen=True, eq=False)
class ProductAction:
    """Simultaneous action ``(R_1, ..., R_n)`` on the product of supports."""

    maps: tuple

    def __post_init__(self):
        maps = tuple(m if isinstance(m, MarginalMap) else MarginalMap(m, j)
                     for j, m in enumerate(self.maps))
        object.__setattr__(self, "maps", maps)

    @property
    def perms(self):
        return [m.perm for m in self.maps]

    @property
    def n(self):
        return len(self.maps)

    def key(self):
        return tuple(m.perm.tobytes() for m in self.maps)

    def __eq__(self, other):
        return isinstance(other, ProductAction) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def apply(self, index):
        """Image of an ``(k, n)`` array of product indices."""
        index = np.asarray(index)
        return np.stack([m.perm[index[:, j]] for j, m in enumerate(self.maps)], axis=1)

    def is_identity(self):
        return all(np.array_equal(m.perm, np.arange(m.size)) for m in self.maps)


def product_action(perms, marginals) -> ProductAction:
    """Validated action: one weight-preserving permutation per marginal."""
    if len(perms) != len(marginals):
        raise InvalidPermutation(f"{len(perms)} maps for {len(marginals)} marginals")
    return ProductAction(tuple(marginal_map(p, m, j)
                               for j, (p, m) in enumerate(zip(perms, marginals))))


def identity_action(marginals) -> ProductAction:
    return ProductAction(tuple(MarginalMap(np.arange(m.size), j)
                               for j, m in enumerate(marginals)))


def simultaneous(mm: MarginalMap, n: int) -> ProductAction:
    """The diagonal action ``(R, ..., R)`` on ``n`` copies of one support."""
    return ProductAction(tuple(MarginalMap(mm.perm, j) for j in range(n)))


def compose(a: ProductAction, b: ProductAction) -> ProductAction:
    """``a o b``: apply ``b`` first."""
    return ProductAction(tuple(MarginalMap(ma.perm[mb.perm], j)
                               for j, (ma, mb) in enumerate(zip(a.maps, b.maps))))


def orbits(mm) -> list[list[int]]:
    """Cycle decomposition, each cycle listed from its smallest index."""
    perm = mm.perm if isinstance(mm, MarginalMap) else np.asarray(mm)
    seen = np.zeros(perm.size, bool)
    out = []
    for start in range(perm.size):
        if seen[start]:
            continue
        cyc = []
        i = start
        while not seen[i]:
            seen[i] = True
            cyc.append(i)
            i = int(perm[i])
        out.append(cyc)
    return out


def period(mm) -> int:
    """Least m >= 1 with perm^m = id: lcm of the cycle lengths."""
    return reduce(math.lcm, (len(c) for c in orbits(mm)), 1)


def _perm_commute(p, q):
    return np.array_equal(p[q], q[p])


def check_commuting(a, b) -> bool:
    """Whether two actions (or two marginal maps) commute componentwise."""
    if isinstance(a, MarginalMap):
        return _perm_commute(a.perm, b.perm)
    return all(_perm_commute(p, q) for p, q in zip(a.perms, b.perms))


@dataclass(frozen=True, eq=False)
class ActionFamily:
    """A finite group of product actions with the generators that produced it."""

    generators: tuple
    elements: tuple
    commuting: bool

    @property
    def order(self):
        return len(self.elements)

    def orbit_labels(self, j):
        """Label per support index of slot ``j``: the smallest index in its orbit."""
        size = self.elements[0].maps[j].size
        return orbit_labels([g.maps[j].perm for g in self.generators], size)


def orbit_labels(perms, size) -> np.ndarray:
    """Smallest index of each point's orbit under the group generated by ``perms``."""
    parent = np.arange(size)

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for p in perms:
        for i in range(size):
            a, b = find(i), find(int(p[i]))
            if a != b:
                parent[max(a, b)] = min(a, b)
    return np.array([find(i) for i in range(size)])


def generate_group(generators, cap=DEFAULT_GROUP_CAP, n=None, sizes=None) -> ActionFamily:
    """Breadth-first closure of ``generators`` under composition.

    Elements are ordered by BFS discovery, expanding generators in the order
    given; the identity comes first.  With no generators, ``n`` and ``sizes``
    define the trivial group.
    """
    gens = tuple(generators)
    if cap < 1:
        raise ValueError("cap must be >= 1")
    if gens:
        ident = ProductAction(tuple(MarginalMap(np.arange(m.size), j)
                                    for j, m in enumerate(gens[0].maps)))
    else:
        if sizes is None:
            raise ValueError("trivial group needs support sizes")
        ident = ProductAction(tuple(MarginalMap(np.arange(s), j) for j, s in enumerate(sizes)))
    seen = {ident.key(): ident}
    order = [ident]
    queue = deque([ident])
    while queue:
        g = queue.popleft()
        for s in gens:
            h = compose(s, g)
            k = h.key()
            if k not in seen:
                if len(order) >= cap:
                    raise GroupTooLarge(f"group closure exceeds cap {cap}")
                seen[k] = h
                order.append(h)
                queue.append(h)
    commuting = all(check_commuting(a, b) for i, a in enumerate(gens) for b in gens[i + 1:])
    return ActionFamily(gens, tuple(order), commuting)


class SigmaShift:
    """Cyclic shift of marginal slots: ``(x_1, ..., x_n) -> (x_2, ..., x_n, x_1)``.

    Acts on product indices, not on points, so it only makes sense when
    every marginal is the same measure.
    """

    def __init__(self, n):
        self.n = n

    def check(self, marginals):
        if any(not marginals[0].same_as(m) for m in marginals[1:]):
            raise MarginalsNotIdentical("sigma needs identical marginals")

    def apply(self, index, power=1):
        index = np.asarray(index)
        return np.roll(index, -power, axis=1)

    def tensor(self, T, power=1):
        """``out[t] = T[sigma^power(t)]``."""
        axes = [(k + power) % self.n for k in range(self.n)]
        # out[t_0..t_{n-1}] = T[t_p, t_{p+1}, ...]: axis k of T reads t_{k+p}
        inv = [0] * self.n
        for k, a in enumerate(axes):
            inv[a] = k
        return np.transpose(T, inv)
