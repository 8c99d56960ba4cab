"""Multi-marginal entropic transport in the log domain.

The plan is ``exp((sum_j psi_j(t_j) - ctilde(t)) / eps) * prod_j w_j(t_j)``.
One sweep updates ``psi_1, ..., psi_n`` in turn so that the updated
marginal matches exactly; convergence is judged after each full sweep by
the largest L1 marginal error.  Potentials start at zero, so any symmetry
of the data is present from the first iterate.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .cost import CostSpec, Problem
from .errors import AllCellsForbidden, InputError, NotConverged, TooLarge
from .measure import product_size
from .plans import Plan, Potentials, SolveReport
from .solver_lp import MAX_LP_CELLS, as_problem, solve_exact

log = logging.getLogger(__name__)

MAX_ENTROPIC_CELLS = 10 ** 7


@dataclass(frozen=True)
class EntropicConfig:
    epsilon: float = 0.05
    max_iter: int = 10_000
    tol: float = 1e-9

    def __post_init__(self):
        if not self.epsilon > 0:
            raise InputError("epsilon must be > 0")
        if not self.tol > 0:
            raise InputError("tol must be > 0")
        if self.max_iter < 1:
            raise InputError("max_iter must be >= 1")


def _log_plan(problem, psi, eps):
    logw = [np.log(w) for w in problem.weights]
    with np.errstate(invalid="ignore"):
        L = (problem.full_sum(psi) - problem.ctilde) / eps + problem.full_sum(logw)
    L[~problem.finite] = -np.inf
    return L


def _marginal_error(P, problem):
    err = 0.0
    for j in range(problem.n):
        axes = tuple(k for k in range(problem.n) if k != j)
        err = max(err, float(np.sum(np.abs(P.sum(axis=axes) - problem.weights[j]))))
    return err


def solve_entropic(marginals, cost: CostSpec | None = None,
                   config: EntropicConfig = EntropicConfig(), *, strict=False):
    """Entropic plan, potentials and report.

    On hitting ``max_iter`` the last iterate is returned with
    ``report.converged = False`` (or NotConverged is raised if ``strict``).
    """
    problem = as_problem(marginals, cost)
    if product_size(problem.marginals) > MAX_ENTROPIC_CELLS:
        raise TooLarge(f"entropic solver limited to {MAX_ENTROPIC_CELLS} cells")
    eps = float(config.epsilon)
    n = problem.n
    for j in range(n):
        slab = problem.slab(j)
        if not np.all(np.isfinite(slab).any(axis=1)):
            raise AllCellsForbidden(f"some point of marginal {j} only meets +inf cells")
    logw = [np.log(w) for w in problem.weights]
    psi = [np.zeros(m) for m in problem.shape]
    err = np.inf
    it = 0
    while it < config.max_iter:
        it += 1
        for j in range(n):
            P = problem.rest_sum(psi, j)
            lw = problem.rest_sum(logw, j)
            psi[j] = -eps * _kernels.slice_logsumexp(problem.slab(j), P, lw, eps)
        plan_dense = np.exp(_log_plan(problem, psi, eps))
        err = _marginal_error(plan_dense, problem)
        if err < config.tol:
            break
    converged = err < config.tol

    plan = Plan.from_dense(plan_dense)
    pot = Potentials.from_min_form(psi, problem.sense)
    primal = plan.cost(problem.tensor)
    dual = pot.dual_value(problem.weights)
    report = SolveReport(primal, dual, abs(primal - dual), "sinkhorn-log", it, converged,
                         extras={"epsilon": eps, "marginal_error": err})
    if not converged:
        msg = f"sinkhorn stopped after {it} sweeps with marginal error {err:.3g}"
        if strict:
            raise NotConverged(msg, result=(plan, pot, report))
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return plan, pot, report


def epsilon_sweep(marginals, cost: CostSpec | None = None, epsilons=(1.0, 0.1, 0.01),
                  config: EntropicConfig = EntropicConfig()):
    """Entropic reports for a strictly decreasing sequence of epsilons.

    When the LP is within its size guard each report also carries
    ``extras["lp_value"]`` and ``extras["gap_to_lp"]``.
    """
    problem = as_problem(marginals, cost)
    eps = [float(e) for e in epsilons]
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise InputError("epsilons must be strictly decreasing")
    lp_value = None
    if product_size(problem.marginals) <= MAX_LP_CELLS:
        lp_value = solve_exact(problem)[2].primal_value
    reports = []
    for e in eps:
        cfg = EntropicConfig(e, config.max_iter, config.tol)
        _, _, rep = solve_entropic(problem, config=cfg)
        if lp_value is not None:
            rep.extras["lp_value"] = lp_value
            rep.extras["gap_to_lp"] = abs(rep.primal_value - lp_value)
        reports.append(rep)
    return reports
