"""Discrete multi-marginal Monge-Kantorovich transport with symmetrization tools."""

from .errors import (MKError, InputError, InfeasibleError, NotConverged, HypothesisError,
                     FiniteCostInfeasible, AllCellsForbidden, CostNotInvariant,
                     MarginalsNotIdentical, NotCommuting, PeriodMismatch,
                     HypothesisViolated, InfeasibleInput, OrderViolated, UnboundedConjugate)
from .measure import DiscreteMarginal, make_marginal, product_size, ProductIndex
from .cost import CostSpec, Problem, eval_cost, materialize_tensor, check_cost_invariance
from .group import (MarginalMap, ProductAction, ActionFamily, SigmaShift, marginal_map,
                    product_action, identity_action, simultaneous, compose, orbits,
                    period, check_commuting, generate_group)
from .plans import Plan, Potentials, SolveReport
from .solver_lp import solve_exact, verify_certificate
from .solver_sinkhorn import EntropicConfig, solve_entropic, epsilon_sweep
from .symmetrize import (SymmetrizationTrace, average_plan, average_plan_sigma,
                         average_potentials, c_conjugate, mix_v, kdp_residual,
                         tighten_to_maximal, symmetrize_dual, cyclic_construction,
                         commuting_family_symmetrize)
from .apps import CheckReport, gen_radial_instance, determinant_check, coulomb_check

__version__ = "0.1.0"
