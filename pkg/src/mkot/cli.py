"""``mkot`` command line: solve, symmetrize, demo, gen, verify.

Problem files are JSON::

    {"marginals": [{"label": "a", "points": [[0.0], [1.0]], "weights": [0.5, 0.5]}, ...],
     "cost": {"kind": "table", "sense": "min", "values": [0, 1, 1, 0]},
     "actions": [{"maps": [[1, 0], [1, 0]]}],
     "sigma": false,
     "solver": "lp",
     "entropic": {"epsilon": 0.05, "max_iter": 10000, "tol": 1e-9}}

Table values are flat, row-major (last marginal fastest); ``"inf"`` stands
for +infinity.  Reports are JSON too; floats are written with their
shortest round-trip repr, and +inf as ``"inf"``.

Exit codes: 0 success, 1 input error, 2 infeasible, 3 not converged,
4 hypothesis violated.  ``demo`` also exits with 4 when the check runs
but its certificate does not hold.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys

import numpy as np

from . import apps
from .cost import CostSpec, Problem
from .errors import (HypothesisError, HypothesisViolated, InfeasibleError,
                     InputError, MKError, NotConverged)
from .group import generate_group, marginal_map, ProductAction, DEFAULT_GROUP_CAP
from .measure import make_marginal, shape_of
from .plans import Plan, Potentials
from .solver_lp import solve_exact, verify_certificate
from .solver_sinkhorn import EntropicConfig, solve_entropic
from .symmetrize import (average_plan, commuting_family_symmetrize, kdp_residual,
                         symmetrize_dual)

log = logging.getLogger("mkot")

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_NOT_CONVERGED, EXIT_HYPOTHESIS = 0, 1, 2, 3, 4
DEFAULT_SUPPORT_THRESHOLD = 1e-10


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, InputError):
        return EXIT_INPUT
    if isinstance(exc, InfeasibleError):
        return EXIT_INFEASIBLE
    if isinstance(exc, NotConverged):
        return EXIT_NOT_CONVERGED
    if isinstance(exc, HypothesisError):
        return EXIT_HYPOTHESIS
    return EXIT_INPUT


# ------------------------------------------------------------ JSON helpers

def _num(x):
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return x


def _to_float(v, pointer):
    if isinstance(v, bool):
        raise InputError("expected a number", pointer)
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str) and v.strip().lower() in ("inf", "+inf", "infinity"):
        return math.inf
    raise InputError(f"expected a number or \"inf\", got {v!r}", pointer)


def jsonable(obj):
    """Plain JSON structure with floats kept exact and infinities as strings."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), indent=1)


# ------------------------------------------------------------ problem files

class ProblemFile:
    """Parsed problem: marginals, cost, actions and solver settings."""

    def __init__(self, raw: dict):
        if not isinstance(raw, dict):
            raise InputError("problem must be a JSON object", "")
        self.raw = raw
        self.marginals = self._marginals(raw.get("marginals"))
        self.cost = self._cost(raw.get("cost"))
        self.actions = self._actions(raw.get("actions", []))
        sigma = raw.get("sigma", False)
        if not isinstance(sigma, bool):
            raise InputError("sigma must be true or false", "/sigma")
        self.sigma = sigma
        self.solver = raw.get("solver", "lp")
        if self.solver not in ("lp", "sinkhorn"):
            raise InputError("solver must be \"lp\" or \"sinkhorn\"", "/solver")
        self.entropic = raw.get("entropic") or {}
        if not isinstance(self.entropic, dict):
            raise InputError("entropic must be an object", "/entropic")
        self.problem = Problem(self.marginals, self.cost)

    @staticmethod
    def _marginals(items):
        if not isinstance(items, list) or len(items) < 2:
            raise InputError("need a list of at least two marginals", "/marginals")
        out = []
        for j, item in enumerate(items):
            ptr = f"/marginals/{j}"
            if not isinstance(item, dict):
                raise InputError("marginal must be an object", ptr)
            for key in ("points", "weights"):
                if key not in item:
                    raise InputError(f"missing {key}", f"{ptr}/{key}")
            try:
                pts = np.array(item["points"], dtype=float)
                w = np.array(item["weights"], dtype=float)
            except (TypeError, ValueError) as exc:
                raise InputError(f"non-numeric or ragged data: {exc}", ptr) from None
            if w.ndim != 1 or pts.shape[:1] != w.shape:
                raise InputError("points and weights disagree in length", f"{ptr}/weights")
            try:
                out.append(make_marginal(pts, w, str(item.get("label", f"mu{j}"))))
            except MKError as exc:
                exc.pointer = exc.pointer or ptr
                raise
        return out

    def _cost(self, item):
        if not isinstance(item, dict):
            raise InputError("cost must be an object", "/cost")
        kind = item.get("kind")
        sense = item.get("sense", "min")
        values = None
        if kind == "table":
            vals = item.get("values")
            if not isinstance(vals, list):
                raise InputError("table cost needs a flat values list", "/cost/values")
            shape = shape_of(self.marginals)
            if len(vals) != int(np.prod(shape)):
                raise InputError(f"expected {int(np.prod(shape))} values for shape {shape}, "
                                 f"got {len(vals)}", "/cost/values")
            values = np.array([_to_float(v, f"/cost/values/{k}") for k, v in enumerate(vals)])
            values = values.reshape(shape)
        try:
            return CostSpec(kind, sense, values)
        except MKError as exc:
            exc.pointer = exc.pointer or ("/cost/kind" if kind not in ("determinant", "coulomb", "table")
                                          else "/cost")
            raise

    def _actions(self, items):
        if not isinstance(items, list):
            raise InputError("actions must be a list", "/actions")
        out = []
        for k, item in enumerate(items):
            ptr = f"/actions/{k}/maps"
            maps = item.get("maps") if isinstance(item, dict) else None
            if not isinstance(maps, list) or len(maps) != len(self.marginals):
                raise InputError("need one permutation per marginal", ptr)
            mms = []
            for j, (perm, mu) in enumerate(zip(maps, self.marginals)):
                try:
                    mms.append(marginal_map(perm, mu, j))
                except MKError as exc:
                    exc.pointer = f"{ptr}/{j}"
                    raise
            out.append(ProductAction(tuple(mms)))
        return out


def load_problem(path) -> ProblemFile:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}",
                         "") from None
    return ProblemFile(raw)


# ------------------------------------------------------------ reports

def plan_json(plan: Plan, threshold):
    keep = plan.mass > threshold
    return [{"index": t, "mass": m}
            for t, m in zip(plan.index[keep].tolist(), plan.mass[keep].tolist())]


def plan_from_json(items, shape) -> Plan:
    if not items:
        return Plan(np.zeros((0, len(shape)), dtype=np.int64), np.zeros(0), shape)
    return Plan([e["index"] for e in items], [float(e["mass"]) for e in items], shape)


def certificate(plan, pot, problem):
    gap, feas, slack = verify_certificate(plan, pot, problem)
    return {"gap": gap, "feasibility": feas, "slackness": slack}


def solve_payload(pf: ProblemFile, args):
    """Run the configured solver; returns (plan, potentials, report)."""
    solver = args.solver or pf.solver
    if solver == "lp":
        return solve_exact(pf.problem, max_iter=args.max_iter)
    cfg = dict(pf.entropic)
    if args.epsilon is not None:
        cfg["epsilon"] = args.epsilon
    if args.tol is not None:
        cfg["tol"] = args.tol
    if args.max_iter is not None:
        cfg["max_iter"] = args.max_iter
    try:
        config = EntropicConfig(**cfg)
    except TypeError as exc:
        raise InputError(str(exc), "/entropic") from None
    return solve_entropic(pf.problem, config=config)


def build_report(pf, plan, pot, rep, threshold):
    kept = plan_json(plan, threshold)
    shown = plan_from_json(kept, pf.problem.shape)
    return {
        "header": {"format": "mkot-report/1", "support_threshold": threshold,
                   "sense": pf.problem.sense},
        "problem": pf.raw,
        "report": {"primal_value": rep.primal_value, "dual_value": rep.dual_value,
                   "gap": rep.gap, "solver": rep.solver, "iterations": rep.iterations,
                   "converged": rep.converged, "extras": rep.extras},
        "plan": kept,
        "potentials": [v.tolist() for v in pot.vectors],
        "certificate": certificate(shown, pot, pf.problem),
    }


def verify_report(report: dict) -> dict:
    """Recompute the certificate from the plan and potentials stored in a report."""
    pf = ProblemFile(report["problem"])
    plan = plan_from_json(report["plan"], pf.problem.shape)
    pot = Potentials(tuple(report["potentials"]), pf.problem.sense)
    return certificate(plan, pot, pf.problem)


def _emit(payload, out):
    text = dumps(payload)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


# ------------------------------------------------------------ commands

def cmd_solve(args):
    pf = load_problem(args.file)
    plan, pot, rep = solve_payload(pf, args)
    _emit(build_report(pf, plan, pot, rep, args.support_threshold), args.out)
    if not rep.converged:
        print(f"warning: solver did not converge (marginal error "
              f"{rep.extras.get('marginal_error', float('nan')):.3g})", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _invariance_residual(plan, family, sigma):
    dense = plan.to_dense()
    worst = 0.0
    for g in family.elements:
        shifts = range(plan.n) if sigma else [0]
        for p in shifts:
            moved = plan.pushforward(lambda idx, g=g, p=p: np.roll(g.apply(idx), -p, axis=1))
            worst = max(worst, float(np.abs(moved.to_dense() - dense).sum()))
    return worst


def cmd_symmetrize(args):
    pf = load_problem(args.file)
    problem = pf.problem
    plan, pot, rep = solve_payload(pf, args)
    if pf.actions:
        family = generate_group(pf.actions, cap=args.group_cap)
    else:
        family = generate_group([], n=problem.n, sizes=problem.shape)
    avg = average_plan(plan, family, pf.marginals, sigma=pf.sigma)
    T = problem.tensor
    out = build_report(pf, avg, pot, rep, args.support_threshold)
    sym = {
        "group_order": family.order,
        "sigma": pf.sigma,
        "plan_value_before": plan.cost(T),
        "plan_value_after": avg.cost(T),
        "plan_marginal_residual_after": avg.marginal_residual(problem.weights),
        "plan_invariance_residual_before": _invariance_residual(plan, family, pf.sigma),
        "plan_invariance_residual_after": _invariance_residual(avg, family, pf.sigma),
        "plan_before": plan_json(plan, args.support_threshold),
        "dual_value_before": pot.dual_value(problem.weights),
    }
    if rep.solver.startswith("lp"):
        if args.equal_marginals:
            gens = []
            for k, g in enumerate(pf.actions):
                if any(not np.array_equal(m.perm, g.maps[0].perm) for m in g.maps[1:]):
                    raise HypothesisViolated("--equal-marginals needs diagonal actions",
                                             f"/actions/{k}/maps")
                gens.append(g.maps[0])
            psi = commuting_family_symmetrize(pot, gens, problem)
        else:
            trace = symmetrize_dual(pot, family, problem)
            psi = trace.psi
            out["trace"] = {"phi": [v.tolist() for v in trace.phi.vectors],
                            "phi_c": [v.tolist() for v in trace.phi_c.vectors],
                            "v": [v.tolist() for v in trace.v.vectors],
                            "psi": [v.tolist() for v in psi.vectors],
                            "kdp_residual": trace.kdp_residual}
        spread = 0.0
        for j, v in enumerate(psi.vectors):
            spread = max(spread, float(np.max(np.abs(v - v[family.orbit_labels(j)]))))
        out["potentials"] = [v.tolist() for v in psi.vectors]
        out["certificate"] = certificate(plan_from_json(out["plan"], problem.shape), psi, problem)
        sym.update(dual_value_after=psi.dual_value(problem.weights),
                   kdp_residual=kdp_residual(psi, problem),
                   potential_orbit_spread=spread)
    else:
        sym["note"] = "entropic potentials are not dual feasible; only the plan was averaged"
    out["symmetrization"] = sym
    _emit(out, args.out)
    return EXIT_OK


def cmd_demo(args):
    radii = [float(r) for r in args.radii.split(",")] if args.radii else [1.0]
    if args.name == "determinant":
        if args.n not in (None, 2):
            raise InputError("the determinant demo runs with n = 2")
        rep = apps.determinant_check(radii, args.m)
    else:
        rep = apps.coulomb_check(radii, args.m, args.n or 2)
    status = "PASS" if rep.passed else "FAIL"
    print(f"{rep.name}: {status}  value={rep.metrics['lp_value']:.12g}", file=sys.stderr)
    for key, val in rep.metrics.items():
        tol = rep.tolerances.get(key)
        mark = "" if tol is None else f"  (tol {tol:g})"
        print(f"  {key:28s} {val:.6g}{mark}", file=sys.stderr)
    if rep.details:
        print(f"  note: {rep.details}", file=sys.stderr)
    _emit(rep.to_json(), args.out)
    return EXIT_OK if rep.passed else EXIT_HYPOTHESIS


def cmd_gen(args):
    rng = np.random.default_rng(args.seed)
    marginals, cost = apps.random_table_instance(rng, [args.m] * args.n, args.inf_fraction)
    payload = {
        "marginals": [{"label": mu.label, "points": mu.points, "weights": mu.weights}
                      for mu in marginals],
        "cost": {"kind": "table", "sense": "min", "values": cost.values.reshape(-1)},
        "actions": [],
        "sigma": False,
        "solver": "lp",
    }
    _emit(payload, args.out)
    return EXIT_OK


def cmd_verify(args):
    try:
        with open(args.file) as fh:
            report = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read report: {exc}") from None
    fresh = verify_report(report)
    recorded = report.get("certificate", {}).get("gap")
    drift = abs(fresh["gap"] - float(recorded)) if recorded is not None else math.inf
    _emit({"certificate": fresh, "recorded_gap": recorded, "gap_drift": drift}, args.out)
    return EXIT_OK if drift <= 1e-12 else EXIT_HYPOTHESIS


# ------------------------------------------------------------ entry point

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--solver", choices=("lp", "sinkhorn"))
    common.add_argument("--epsilon", type=float)
    common.add_argument("--tol", type=float)
    common.add_argument("--max-iter", type=int)
    common.add_argument("--support-threshold", type=float, default=DEFAULT_SUPPORT_THRESHOLD)
    common.add_argument("--group-cap", type=int, default=DEFAULT_GROUP_CAP)
    common.add_argument("--out")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="mkot", description="Multi-marginal transport toolkit")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("solve", parents=[common], help="solve a problem file")
    p.add_argument("file")
    p.set_defaults(func=cmd_solve)
    p = sub.add_parser("symmetrize", parents=[common], help="solve then symmetrize")
    p.add_argument("file")
    p.add_argument("--equal-marginals", action="store_true",
                   help="one potential shared by all marginals")
    p.set_defaults(func=cmd_symmetrize)
    p = sub.add_parser("demo", parents=[common], help="determinant or Coulomb check")
    p.add_argument("name", choices=("determinant", "coulomb"))
    p.add_argument("--radii", default="1")
    p.add_argument("--m", type=int, default=4)
    p.add_argument("--n", type=int)
    p.set_defaults(func=cmd_demo)
    p = sub.add_parser("gen", parents=[common], help="random feasible table instance")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--m", type=int, default=4)
    p.add_argument("--inf-fraction", type=float, default=0.0)
    p.set_defaults(func=cmd_gen)
    p = sub.add_parser("verify", parents=[common], help="re-check a report's certificate")
    p.add_argument("file")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except MKError as exc:
        where = f" (at {exc.pointer})" if exc.pointer is not None else ""
        print(f"error: {type(exc).__name__}: {exc}{where}", file=sys.stderr)
        return exit_code(exc)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
