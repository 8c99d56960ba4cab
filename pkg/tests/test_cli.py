import json

import numpy as np
import pytest

from mkot import cli


def write(tmp_path, obj, name="p.json"):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


def two_point(values, **extra):
    mu = lambda: {"points": [[0.0], [1.0]], "weights": [0.5, 0.5]}
    return {"marginals": [mu(), mu()], "cost": {"kind": "table", "sense": "min", "values": values},
            **extra}


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_single_atom_solve(tmp_path, capsys):
    prob = {"marginals": [{"points": [[1.0, 2.0]], "weights": [1.0]},
                          {"points": [[3.0, 5.0]], "weights": [1.0]}],
            "cost": {"kind": "determinant", "sense": "max"}}
    code, out, _ = run(["solve", write(tmp_path, prob)], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["report"]["primal_value"] == -1.0
    assert rep["plan"] == [{"index": [0, 0], "mass": 1.0}]


def test_diagonal_value_zero(tmp_path, capsys):
    code, out, _ = run(["solve", write(tmp_path, two_point([0, 1, 1, 0]))], capsys)
    assert code == 0 and json.loads(out)["report"]["primal_value"] == 0.0


def test_coulomb_one_point_exit_2(tmp_path, capsys):
    prob = {"marginals": [{"points": [[0.0, 0.0]], "weights": [1.0]}] * 2,
            "cost": {"kind": "coulomb"}}
    code, _, err = run(["solve", write(tmp_path, prob)], capsys)
    assert code == 2 and "FiniteCostInfeasible" in err


@pytest.mark.parametrize("mutate, pointer", [
    (lambda p: p["marginals"][1].update(weights=[0.5, 0.6]), "/marginals/1"),
    (lambda p: p["cost"].update(values=[0, 1, 1]), "/cost/values"),
    (lambda p: p["cost"].update(values=[0, 1, "x", 0]), "/cost/values/2"),
    (lambda p: p["cost"].update(kind="volume"), "/cost/kind"),
    (lambda p: p.update(actions=[{"maps": [[0, 0], [0, 1]]}]), "/actions/0/maps/0"),
    (lambda p: p.update(sigma="yes"), "/sigma"),
])
def test_input_errors_carry_pointer(tmp_path, capsys, mutate, pointer):
    prob = two_point([0, 1, 1, 0])
    mutate(prob)
    code, _, err = run(["solve", write(tmp_path, prob)], capsys)
    assert code == 1 and f"(at {pointer})" in err


def test_bad_json(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    code, _, err = run(["solve", str(path)], capsys)
    assert code == 1 and "line 1" in err


def test_inf_round_trip_and_verify(tmp_path, capsys):
    prob = two_point([0.1, "inf", 0.3, 0.7])
    out = tmp_path / "r.json"
    code, _, _ = run(["solve", write(tmp_path, prob), "--out", str(out)], capsys)
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["problem"]["cost"]["values"][1] == "inf"
    assert all(e["index"] != [0, 1] for e in rep["plan"])
    code, text, _ = run(["verify", str(out)], capsys)
    assert code == 0 and json.loads(text)["gap_drift"] <= 1e-12


def test_report_numbers_round_trip_bit_exact(tmp_path, capsys):
    rng = np.random.default_rng(4)
    vals = rng.uniform(0, 1, 9).tolist()
    mu = {"points": [[0.0], [1.0], [2.0]], "weights": [0.2, 0.3, 0.5]}
    prob = {"marginals": [mu, mu], "cost": {"kind": "table", "values": vals}}
    code, out, _ = run(["solve", write(tmp_path, prob)], capsys)
    rep = json.loads(out)
    again = json.loads(cli.dumps(rep))
    assert again == rep
    assert rep["problem"]["cost"]["values"] == vals


def test_symmetrize_trivial_group(tmp_path, capsys):
    code, out, _ = run(["symmetrize", write(tmp_path, two_point([1, 2, 3, 4]))], capsys)
    s = json.loads(out)["symmetrization"]
    assert code == 0 and s["group_order"] == 1
    assert s["plan_before"] == json.loads(out)["plan"]
    assert s["dual_value_after"] == pytest.approx(s["dual_value_before"], abs=1e-12)


def test_symmetrize_swap_first_gives_uniform(tmp_path, capsys):
    prob = two_point([1, 2, 1, 2], actions=[{"maps": [[1, 0], [0, 1]]}])
    code, out, _ = run(["symmetrize", write(tmp_path, prob)], capsys)
    rep = json.loads(out)
    assert code == 0
    assert sorted((tuple(e["index"]), e["mass"]) for e in rep["plan"]) == \
        [((0, 0), 0.25), ((0, 1), 0.25), ((1, 0), 0.25), ((1, 1), 0.25)]
    assert rep["symmetrization"]["plan_invariance_residual_after"] == 0.0


def test_symmetrize_cost_not_invariant_exit_4(tmp_path, capsys):
    prob = two_point([0, 1, 1, 0], actions=[{"maps": [[1, 0], [0, 1]]}])
    code, _, err = run(["symmetrize", write(tmp_path, prob)], capsys)
    assert code == 4 and "CostNotInvariant" in err


def coulomb_file(m):
    th = 2 * np.pi * np.arange(m) / m
    pts = np.c_[np.cos(th), np.sin(th)]
    pts[0] = (1.0, 0.0)
    mu = {"points": pts.tolist(), "weights": [1.0 / m] * m}
    rot = [(i + 1) % m for i in range(m)]
    return {"marginals": [mu, mu], "cost": {"kind": "coulomb"},
            "actions": [{"maps": [rot, rot]}], "sigma": True}


def test_symmetrize_coulomb_residuals(tmp_path, capsys):
    code, out, _ = run(["symmetrize", write(tmp_path, coulomb_file(6))], capsys)
    s = json.loads(out)["symmetrization"]
    assert code == 0
    assert s["plan_invariance_residual_after"] <= 1e-9
    assert abs(s["plan_value_after"] - s["plan_value_before"]) <= 1e-9
    assert s["kdp_residual"] <= 1e-9 and s["potential_orbit_spread"] == 0.0


def test_symmetrize_equal_marginals(tmp_path, capsys):
    code, out, _ = run(["symmetrize", write(tmp_path, coulomb_file(4)), "--equal-marginals"], capsys)
    rep = json.loads(out)
    assert code == 0
    assert rep["potentials"][0] == rep["potentials"][1]
    assert len(set(rep["potentials"][0])) == 1


def test_sinkhorn_solver_flag(tmp_path, capsys):
    code, out, _ = run(["solve", write(tmp_path, two_point([0, 1, 1, 0])), "--solver", "sinkhorn",
                        "--epsilon", "1", "--tol", "1e-12"], capsys)
    rep = json.loads(out)
    diag = [e["mass"] for e in rep["plan"] if e["index"][0] == e["index"][1]]
    assert code == 0 and diag[0] == pytest.approx(0.5 * np.e / (1 + np.e), abs=1e-6)


def test_sinkhorn_not_converged_exit_3(tmp_path, capsys):
    mu = {"points": [[0.0], [1.0], [2.0]], "weights": [0.2, 0.3, 0.5]}
    prob = {"marginals": [mu, mu], "cost": {"kind": "table", "values": [0, 3, 1, 2, 0, 5, 1, 1, 0]},
            "solver": "sinkhorn"}
    with pytest.warns(RuntimeWarning):
        code, out, _ = run(["solve", write(tmp_path, prob), "--epsilon", "0.05",
                            "--max-iter", "1", "--tol", "1e-15"], capsys)
    assert code == 3 and json.loads(out)["report"]["converged"] is False


def test_demo_determinant(capsys):
    code, out, err = run(["demo", "determinant", "--radii", "1", "--m", "4"], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["passed"] and rep["metrics"]["lp_value"] == pytest.approx(1.0)
    assert "PASS" in err


def test_demo_coulomb(capsys):
    code, out, _ = run(["demo", "coulomb", "--radii", "1", "--m", "4", "--n", "2"], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["metrics"]["lp_value"] == pytest.approx(1.0)


def test_demo_determinant_m6_note(capsys):
    code, out, _ = run(["demo", "determinant", "--m", "6"], capsys)
    rep = json.loads(out)
    assert "not applicable" in rep["details"]
    assert code == (0 if rep["passed"] else 4)


def test_demo_guards(capsys):
    code, _, _ = run(["demo", "coulomb", "--m", "200", "--n", "3"], capsys)
    assert code == 1
    code, _, _ = run(["demo", "determinant", "--n", "3"], capsys)
    assert code == 1


def test_gen_is_seeded_and_solvable(tmp_path, capsys):
    code, a, _ = run(["gen", "--seed", "5", "--n", "3", "--m", "4", "--inf-fraction", "0.3"], capsys)
    _, b, _ = run(["gen", "--seed", "5", "--n", "3", "--m", "4", "--inf-fraction", "0.3"], capsys)
    assert code == 0 and a == b
    path = tmp_path / "g.json"
    path.write_text(a)
    code, out, _ = run(["solve", str(path)], capsys)
    assert code == 0 and json.loads(out)["certificate"]["gap"] <= 1e-8


def test_exit_codes_total():
    from mkot import errors
    seen = set()
    for name in dir(errors):
        obj = getattr(errors, name)
        if isinstance(obj, type) and issubclass(obj, errors.MKError) and obj is not errors.MKError:
            seen.add(cli.exit_code(obj("x")))
    assert seen == {1, 2, 3, 4}
