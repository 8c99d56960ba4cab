"""Symmetrization of plans and dual potentials under finite group actions.

All supports are finite, so every action is periodic and ergodic averages
are plain orbit means.  Potentials are processed in min-form
(``sum_j psi_j(t_j) <= ctilde(t)``) and converted back to the problem's
sense on exit.

Exact invariance relies on orbit-canonical evaluation: a quantity that is
invariant in exact arithmetic is computed once at the smallest index of each
orbit and copied to the rest of the orbit, so orbit-constancy holds bit for
bit regardless of rounding in the cost tensor.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .cost import Problem, act_on_tensor, tensor_deviation
from .errors import (CostNotInvariant, HypothesisViolated, InfeasibleInput,
                     InputError, MarginalsNotIdentical, NotCommuting,
                     OrderViolated, PeriodMismatch, UnboundedConjugate)
from .group import (ActionFamily, MarginalMap, SigmaShift, check_commuting,
                    marginal_map, orbit_labels, period)
from .plans import Plan, Potentials, feasibility_violation

log = logging.getLogger(__name__)

INVARIANCE_TOL = 1e-9
FEASIBILITY_TOL = 1e-9
ORDER_TOL = 1e-9
LADDER_TOL = 1e-13
LADDER_MAX_ITER = 20_000


@dataclass(frozen=True, eq=False)
class SymmetrizationTrace:
    """Stages of the dual symmetrization, each in the problem's sense."""

    phi: Potentials
    phi_c: Potentials
    v: Potentials
    psi: Potentials
    kdp_residual: float


# ------------------------------------------------------------------ plans

def _orbit_average(plan: Plan, maps) -> Plan:
    """Average of ``g # plan`` over the finite group listed in ``maps``.

    ``maps`` are callables on ``(k, n)`` index arrays and must enumerate a
    group.  The result is the orbit mean of the masses, assigned
    identically to every cell of each orbit.
    """
    if plan.mass.size == 0:
        return plan
    F = np.stack([np.ravel_multi_index(tuple(g(plan.index).T), plan.shape) for g in maps])
    canon = F.min(axis=0)
    keys, first, inv = np.unique(canon, return_index=True, return_inverse=True)
    totals = np.bincount(inv, weights=plan.mass)
    flats, masses = [], []
    for o, s in enumerate(first):
        members = np.unique(F[:, s])
        flats.append(members)
        masses.append(np.full(members.size, totals[o] / members.size))
    flat = np.concatenate(flats)
    mass = np.concatenate(masses)
    keep = mass > 0
    idx = np.stack(np.unravel_index(flat[keep], plan.shape), axis=1)
    return Plan(idx, mass[keep], plan.shape)


def _check_family_preserves(family, marginals):
    for g in family.generators:
        for j, (mm, mu) in enumerate(zip(g.maps, marginals)):
            marginal_map(mm.perm, mu, j)


def average_plan(plan: Plan, family: ActionFamily, marginals=None, *, sigma=False) -> Plan:
    """Exact average of ``g # plan`` over every element of ``family``.

    With ``sigma=True`` the average also runs over the cyclic slot shifts;
    this needs identical marginals and a family of diagonal actions
    ``(U, ..., U)`` so that the shifts commute with it.  When ``marginals``
    are given, measure preservation of every generator is re-checked.
    """
    if marginals is not None:
        _check_family_preserves(family, marginals)
    maps = [g.apply for g in family.elements]
    if sigma:
        n = plan.n
        if marginals is not None:
            SigmaShift(n).check(marginals)
        for g in family.generators:
            if any(not np.array_equal(g.maps[0].perm, m.perm) for m in g.maps[1:]):
                raise InputError("sigma averaging needs diagonal actions (U, ..., U)")
        shift = SigmaShift(n)
        maps = [(lambda idx, g=g, p=p: shift.apply(g(idx), p))
                for g in maps for p in range(n)]
    return _orbit_average(plan, maps)


def average_plan_sigma(plan: Plan, marginals=None) -> Plan:
    """Average of ``sigma^i # plan`` over the ``n`` cyclic slot shifts.

    With ``marginals`` given they must be identical (MarginalsNotIdentical
    otherwise); without them only the index arithmetic is performed.
    """
    shift = SigmaShift(plan.n)
    if marginals is not None:
        shift.check(marginals)
    return _orbit_average(plan, [(lambda idx, p=p: shift.apply(idx, p)) for p in range(plan.n)])


# ------------------------------------------------------------- potentials

def _orbit_mean(vec, labels):
    """Orbit means of ``vec``, each computed once and copied across its orbit."""
    sums = np.bincount(labels, weights=vec, minlength=vec.size)
    counts = np.bincount(labels, minlength=vec.size)
    means = np.zeros(vec.size)
    nz = counts > 0
    means[nz] = sums[nz] / counts[nz]
    return means[labels]


def average_potentials(pot: Potentials, family: ActionFamily) -> Potentials:
    """Replace each ``phi_j`` by its mean over the orbits of slot ``j``."""
    vecs = [_orbit_mean(v, family.orbit_labels(j)) for j, v in enumerate(pot.vectors)]
    return Potentials(tuple(vecs), pot.sense)


def _conj(vecs, j, problem):
    out = _kernels.slice_min(problem.slab(j), problem.rest_sum(vecs, j))
    if not np.all(np.isfinite(out)):
        bad = int(np.flatnonzero(~np.isfinite(out))[0])
        raise UnboundedConjugate(f"no finite-cost cell through point {bad} of marginal {j}")
    return out


def c_conjugate(pot: Potentials, j: int, problem: Problem) -> np.ndarray:
    """Conjugate of slot ``j`` given the other potentials.

    In min-form this is ``min over cells through x of ctilde - sum_{k != j} phi_k``;
    the result is returned in ``pot``'s sense.
    """
    out = _conj(pot.min_form(), j, problem)
    return out if pot.sense == "min" else -out


def mix_v(phi: Potentials, phi_c: Potentials) -> Potentials:
    """``V_j = (phi_c_j + (n - 1) phi_j) / n``."""
    n = phi.n
    lo, hi = phi.min_form(), phi_c.min_form()
    for j in range(n):
        if np.any(lo[j] > hi[j] + ORDER_TOL):
            raise OrderViolated(f"slot {j}: potential exceeds its conjugate")
    vecs = [(hi[j] + (n - 1) * lo[j]) / n for j in range(n)]
    return Potentials.from_min_form(vecs, phi.sense)


def kdp_residual(pot: Potentials, problem: Problem) -> float:
    """Largest ``|psi_j - conjugate_j(psi)|`` over slots and points."""
    psi = pot.min_form()
    return max(float(np.max(np.abs(psi[j] - _conj(psi, j, problem)))) for j in range(pot.n))


def tighten_to_maximal(phi: Potentials, phi_c: Potentials, v: Potentials, problem: Problem,
                       labels=None):
    """Sequential maximal potentials between ``phi`` and ``phi_c``.

    Slot ``k`` takes the largest value allowed when slots ``< k`` hold the
    already tightened potentials and slots ``> k`` hold ``v``.  The
    admissible set constrains each point separately, so the supremum is a
    pointwise minimum over the cells through that point.  Returns
    ``(psi, kdp_residual)``.
    """
    lo, hi, mid = phi.min_form(), phi_c.min_form(), v.min_form()
    n = phi.n
    for j in range(n):
        if np.any(lo[j] > mid[j] + ORDER_TOL) or np.any(mid[j] > hi[j] + ORDER_TOL):
            raise OrderViolated(f"slot {j}: need phi <= v <= phi_c")
    psi = list(mid)
    for k in range(n):
        val = np.minimum(hi[k], _conj(psi, k, problem))
        val = np.maximum(val, lo[k])
        if labels is not None:
            val = val[labels[k]]
        psi[k] = val
    out = Potentials.from_min_form(psi, phi.sense)
    return out, kdp_residual(out, problem)


def _check_invariant(problem, action, what="action"):
    dev = tensor_deviation(problem.tensor, act_on_tensor(problem.tensor, action.perms))
    if dev > INVARIANCE_TOL:
        raise CostNotInvariant(f"cost changes by {dev:.3g} under {what}")


def symmetrize_dual(pot: Potentials, family: ActionFamily, problem: Problem) -> SymmetrizationTrace:
    """Invariant dual solution from a feasible (optimal) one.

    Pipeline: orbit averages, conjugates, V-mix, sequential tightening.
    Refuses to run when the cost is not invariant under a generator or the
    input violates the dual constraints by more than 1e-9.
    """
    for k, g in enumerate(family.generators):
        _check_invariant(problem, g, f"generator {k}")
    viol = feasibility_violation(pot.min_form(), problem)
    if viol > FEASIBILITY_TOL:
        raise InfeasibleInput(f"input potentials violate the constraints by {viol:.3g}")
    labels = [family.orbit_labels(j) for j in range(problem.n)]
    phi = average_potentials(pot, family)
    lo = phi.min_form()
    hi = [_conj(lo, j, problem)[labels[j]] for j in range(problem.n)]
    phi_c = Potentials.from_min_form(hi, pot.sense)
    v = mix_v(phi, phi_c)
    psi, res = tighten_to_maximal(phi, phi_c, v, problem, labels)
    return SymmetrizationTrace(phi, phi_c, v, psi, res)


# ------------------------------------------------- identical-support variants

def _same_support(marginals):
    p0 = marginals[0].points
    if any(m.points.shape != p0.shape or not np.array_equal(m.points, p0) for m in marginals[1:]):
        raise MarginalsNotIdentical("construction needs all marginals on the same support")


def _powers(perm, count):
    out = [np.arange(perm.size)]
    for _ in range(count - 1):
        out.append(perm[out[-1]])
    return out


def _single_ladder(lower, upper, slots, problem, labels=None):
    """Largest single potential ``w`` with ``lower <= w <= upper`` and
    ``sum_i w(slots[i][x_i]) <= ctilde`` found by monotone iteration.

    ``w <- (wbar + (n - 1) w) / n`` keeps the constraint and increases ``w``
    until ``w`` equals its own conjugate ``wbar``.  ``slots[i]`` is the
    index map applied in slot ``i`` (``slots[0]`` must be the identity).
    """
    n = len(slots)
    w = lower.copy()
    scale = max(1.0, float(np.max(np.abs(upper))))
    for it in range(LADDER_MAX_ITER):
        wbar = _conj([w[s] for s in slots], 0, problem)
        if labels is not None:
            wbar = wbar[labels]
        wbar = np.minimum(wbar, upper)
        if np.max(wbar - w) <= LADDER_TOL * scale:
            return w, it
        w = np.maximum((wbar + (n - 1) * w) / n, w)
    log.warning("potential ladder stopped after %d steps", LADDER_MAX_ITER)
    return w, LADDER_MAX_ITER


def cyclic_construction(pot: Potentials, r: MarginalMap, problem: Problem) -> Potentials:
    """Potentials of the form ``(psi, psi o R, ..., psi o R^{n-1})``.

    Hypotheses (all checked): common support; ``R^n = id``; slot ``j`` carries
    ``(R^{n+1-j}) # mu_1``; and ``c(x) = c(R x_2, ..., R x_n, R x_1)``.
    """
    marginals = problem.marginals
    n = problem.n
    _same_support(marginals)
    R = r.perm
    if R.size != marginals[0].size:
        raise InputError("map size does not match the support")
    if n % period(r) != 0:
        raise PeriodMismatch(f"R has period {period(r)}, which does not divide n = {n}")
    Rp = _powers(R, n + 1)
    w1 = marginals[0].weights
    for j in range(1, n + 1):
        k = (n + 1 - j) % n
        wj = marginals[j - 1].weights
        if not np.array_equal(wj[Rp[k]], w1):
            raise HypothesisViolated(f"marginal {j - 1} is not the R^{k} image of marginal 0")
    T = problem.tensor
    twisted = SigmaShift(n).tensor(act_on_tensor(T, [R] * n))
    dev = tensor_deviation(T, twisted)
    if dev > INVARIANCE_TOL:
        raise HypothesisViolated(f"cost is not invariant under sigma o (R, ..., R) ({dev:.3g})")

    phi = pot.min_form()
    acc = np.zeros(R.size)
    for k in range(1, n + 1):
        acc = acc + phi[k - 1][Rp[(n - k) % n]]
    base = acc / n
    slots = [Rp[i % n] for i in range(n)]
    Phi = [base[Rp[i]] for i in range(1, n + 1)]
    Phi1c = _conj(Phi, 0, problem)
    if np.any(Phi[0] > Phi1c + ORDER_TOL):
        raise InfeasibleInput("averaged potential exceeds its conjugate")
    V = (Phi1c + (n - 1) * Phi[0]) / n
    lower = np.maximum(V, Phi[0])
    w, _ = _single_ladder(lower, Phi1c, slots, problem)
    return Potentials.from_min_form([w[s] for s in slots], pot.sense)


def commuting_family_symmetrize(pot: Potentials, generators, problem: Problem) -> Potentials:
    """One potential shared by all slots and invariant under every generator.

    Needs identical marginals, a sigma-invariant cost, pairwise commuting
    generators preserving the common marginal, and a cost invariant under
    each generator applied to all slots at once.
    """
    marginals = problem.marginals
    n = problem.n
    SigmaShift(n).check(marginals)
    T = problem.tensor
    dev = tensor_deviation(T, SigmaShift(n).tensor(T))
    if dev > INVARIANCE_TOL:
        raise CostNotInvariant(f"cost is not sigma-invariant ({dev:.3g})")
    gens = [g if isinstance(g, MarginalMap) else MarginalMap(g) for g in generators]
    for a in range(len(gens)):
        for b in range(a + 1, len(gens)):
            if not check_commuting(gens[a], gens[b]):
                raise NotCommuting(f"generators {a} and {b} do not commute")
    for k, g in enumerate(gens):
        marginal_map(g.perm, marginals[0])
        dev = tensor_deviation(T, act_on_tensor(T, [g.perm] * n))
        if dev > INVARIANCE_TOL:
            raise CostNotInvariant(f"cost changes by {dev:.3g} under generator {k}")

    size = marginals[0].size
    ident = MarginalMap(np.arange(size))
    equal = cyclic_construction(pot, ident, problem).min_form()[0]
    Phi = equal
    for g in gens:
        Phi = _orbit_mean(Phi, orbit_labels([g.perm], size))
    labels = orbit_labels([g.perm for g in gens], size)
    Phi = Phi[labels]
    slots = [np.arange(size)] * n
    Phic = _conj([Phi] * n, 0, problem)[labels]
    if np.any(Phi > Phic + ORDER_TOL):
        raise InfeasibleInput("averaged potential exceeds its conjugate")
    V = np.maximum((Phic + (n - 1) * Phi) / n, Phi)
    w, _ = _single_ladder(V, Phic, slots, problem, labels)
    return Potentials.from_min_form([w.copy() for _ in range(n)], pot.sense)
