"""Exact multi-marginal transport LP by the revised simplex method.

Variables are the finite-cost cells of the product of supports; +inf cells
never become columns.  Row ``(j, i)`` asks the plan's ``j``-th marginal to
put ``w_j(i)`` on point ``i``.  Each block sums to one, so the last row of
blocks 2..n is dropped, leaving ``sum_j m_j - n + 1`` independent rows.

Two phases with Bland's rule throughout (smallest eligible index enters,
ties in the ratio test leave by smallest index).  Phase 1 minimizes the sum
of artificial variables; artificials that stay basic at level zero after
phase 1 are pivoted out when possible, otherwise their row is redundant and
they remain basic at zero for good.
"""

from __future__ import annotations

import logging

import numpy as np

from . import _kernels
from .cost import CostSpec, Problem
from .errors import FiniteCostInfeasible, NotConverged, TooLarge
from .measure import product_size
from .plans import Plan, Potentials, SolveReport, feasibility_violation

log = logging.getLogger(__name__)

MAX_LP_CELLS = 10 ** 6
PIVOT_TOL = 1e-10
REFACTOR_EVERY = 50


def as_problem(marginals, cost=None) -> Problem:
    if isinstance(marginals, Problem):
        return marginals
    if cost is None:
        raise TypeError("cost is required when marginals are given")
    return Problem(marginals, cost)


class _RevisedSimplex:

    def __init__(self, idx, shape, weights):
        self.idx = np.ascontiguousarray(idx, dtype=np.int64)
        self.N = idx.shape[0]
        self.n = len(shape)
        # row id of (j, i); -1 for the dropped rows
        self.offsets = np.concatenate([[0], np.cumsum(shape)[:-1]]).astype(np.int64)
        row_of = np.full(int(sum(shape)), -1, dtype=np.int64)
        b = []
        r = 0
        for j, m in enumerate(shape):
            last = m if j == 0 else m - 1
            for i in range(last):
                row_of[self.offsets[j] + i] = r
                b.append(weights[j][i])
                r += 1
        self.row_of = row_of
        self.M = r
        self.b = np.array(b)
        self.col_rows = row_of[self.offsets[None, :] + self.idx]  # (N, n), -1 = dropped
        self.basis = np.arange(self.N, self.N + self.M)
        self.is_basic = np.zeros(self.N, dtype=bool)
        self.Binv = np.eye(self.M)
        self.xB = self.b.copy()
        self.iterations = 0
        self.redundant = np.zeros(self.M, dtype=bool)

    def _column(self, q):
        rows = self.col_rows[q]
        return rows[rows >= 0]

    def _refactor(self):
        B = np.zeros((self.M, self.M))
        for pos, v in enumerate(self.basis):
            if v >= self.N:
                B[v - self.N, pos] = 1.0
            else:
                B[self._column(v), pos] = 1.0
        self.Binv = np.linalg.inv(B)
        self.xB = self.Binv @ self.b

    def _pivot(self, r, q, d):
        piv = d[r]
        theta = self.xB[r] / piv
        self.xB -= theta * d
        self.xB[r] = theta
        row = self.Binv[r] / piv
        self.Binv -= np.outer(d, row)
        self.Binv[r] = row
        old = self.basis[r]
        if old < self.N:
            self.is_basic[old] = False
        self.basis[r] = q
        self.is_basic[q] = True
        self.iterations += 1
        if self.iterations % REFACTOR_EVERY == 0:
            self._refactor()

    def _full_duals(self, y):
        yf = np.zeros(self.row_of.size)
        keep = self.row_of >= 0
        yf[keep] = y[self.row_of[keep]]
        return yf

    def run(self, c_real, c_art, tol, max_iter):
        while True:
            if self.iterations >= max_iter:
                raise NotConverged(f"simplex exceeded {max_iter} pivots")
            cB = np.where(self.basis >= self.N, c_art, c_real[np.minimum(self.basis, self.N - 1)])
            y = cB @ self.Binv
            yf = self._full_duals(y)
            q = _kernels.first_negative(c_real, self.idx, self.offsets, yf, self.is_basic, tol)
            if q < 0:
                return yf
            d = self.Binv[:, self._column(q)].sum(axis=1)
            cand = np.flatnonzero(d > PIVOT_TOL)
            if cand.size == 0:  # cannot happen on a bounded polytope
                raise RuntimeError("unbounded direction in transport LP")
            ratios = np.maximum(self.xB[cand], 0.0) / d[cand]
            theta = ratios.min()
            tied = cand[ratios <= theta + 1e-15 * max(1.0, theta)]
            r = tied[np.argmin(self.basis[tied])]
            self._pivot(r, q, d)

    def drive_out_artificials(self):
        for r in range(self.M):
            if self.basis[r] < self.N:
                continue
            row = self._full_duals(self.Binv[r])
            alpha = np.zeros(self.N)
            for j in range(self.n):
                alpha += row[self.offsets[j] + self.idx[:, j]]
            alpha[self.is_basic] = 0.0
            hits = np.flatnonzero(np.abs(alpha) > 1e-9)
            if hits.size == 0:
                self.redundant[r] = True
                continue
            q = int(hits[0])
            d = self.Binv[:, self._column(q)].sum(axis=1)
            self._pivot(r, q, d)


def solve_exact(marginals, cost: CostSpec | None = None, *, column_order=None,
                max_iter=None):
    """Optimal plan, optimal potentials and report for the transport LP.

    ``column_order`` optionally permutes the finite cells before Bland's
    rule sees them (used to probe non-uniqueness).  Raises
    FiniteCostInfeasible when no plan avoids the +inf cells.
    """
    problem = as_problem(marginals, cost)
    if product_size(problem.marginals) > MAX_LP_CELLS:
        raise TooLarge(f"LP limited to {MAX_LP_CELLS} cells")
    ct = problem.ctilde
    flat = np.flatnonzero(problem.finite.reshape(-1))
    if flat.size == 0:
        raise FiniteCostInfeasible("every cell has infinite cost")
    if column_order is not None:
        flat = flat[np.asarray(column_order)]
    idx = np.stack(np.unravel_index(flat, problem.shape), axis=1)
    c = ct.reshape(-1)[flat].astype(float)
    scale = max(1.0, float(np.max(np.abs(c))))
    tol = 1e-11 * scale

    lp = _RevisedSimplex(idx, problem.shape, problem.weights)
    if max_iter is None:
        max_iter = 200 * (lp.N + lp.M)
    lp.run(np.zeros(lp.N), 1.0, 1e-12, max_iter)
    lp._refactor()
    infeas = float(np.sum(lp.xB[lp.basis >= lp.N]))
    if infeas > 1e-9:
        raise FiniteCostInfeasible(
            f"no plan avoids the infinite-cost cells (phase 1 residual {infeas:.3g})")
    lp.drive_out_artificials()
    phase1_iters = lp.iterations
    yf = lp.run(c, 0.0, tol, max_iter)
    lp._refactor()
    yf = lp._full_duals(np.where(lp.basis >= lp.N, 0.0, c[np.minimum(lp.basis, lp.N - 1)]) @ lp.Binv)

    x = lp.xB.copy()
    x[np.abs(x) < 1e-14] = 0.0
    x = np.maximum(x, 0.0)
    real = (lp.basis < lp.N) & (x > 0)
    plan = Plan(idx[lp.basis[real]], x[real], problem.shape)

    vecs = [yf[lp.offsets[j]:lp.offsets[j] + m].copy() for j, m in enumerate(problem.shape)]
    pot = Potentials.from_min_form(vecs, problem.sense).normalized(problem.weights)

    primal = plan.cost(problem.tensor)
    dual = pot.dual_value(problem.weights)
    report = SolveReport(primal, dual, abs(primal - dual), "lp-revised-simplex-bland",
                         lp.iterations,
                         extras={"phase1_iterations": phase1_iters,
                                 "redundant_rows": int(lp.redundant.sum()),
                                 "rows": lp.M, "columns": lp.N})
    log.debug("simplex: %d pivots, value %.17g", lp.iterations, primal)
    return plan, pot, report


def verify_certificate(plan: Plan, potentials: Potentials, cost):
    """``(gap, max feasibility violation, max slackness violation)``.

    ``cost`` is a Problem (or a ``(marginals, CostSpec)`` pair).  The gap
    compares the plan's cost with the potentials' dual value; feasibility
    is checked on every finite cell in min-form; slackness is the largest
    ``mass * (ctilde - sum psi)`` over the plan's support.
    """
    problem = cost if isinstance(cost, Problem) else as_problem(*cost)
    psi = potentials.min_form()
    primal = plan.cost(problem.tensor)
    gap = abs(primal - potentials.dual_value(problem.weights))
    feas = feasibility_violation(psi, problem)
    S = sum(psi[j][plan.index[:, j]] for j in range(plan.n))
    ct = problem.ctilde[tuple(plan.index.T)]
    with np.errstate(invalid="ignore"):
        slack = plan.mass * (ct - S)
    slack = np.where(plan.mass > 0, slack, 0.0)
    return gap, feas, float(max(0.0, np.max(slack))) if slack.size else 0.0
