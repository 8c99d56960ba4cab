import itertools

import numpy as np
import pytest

from mkot.cost import (CostSpec, Problem, check_cost_invariance, eval_cost,
                       materialize_tensor, tensor_deviation)
from mkot.errors import DimensionMismatch, InputError, TooLarge
from mkot.group import ProductAction, identity_action, simultaneous, MarginalMap
from mkot.apps import gen_radial_instance
from mkot.measure import make_marginal

from conftest import uniform

DET = CostSpec("determinant", "max")
COUL = CostSpec("coulomb")


def test_determinant_identity():
    assert eval_cost(DET, [(1, 0), (0, 1)]) == 1.0


def test_coulomb_ordered_pairs():
    assert eval_cost(COUL, [(0, 0), (2, 0)]) == 1.0


def test_coulomb_coincidence_is_inf():
    assert eval_cost(COUL, [(0, 0), (0, 0)]) == np.inf


def test_table_lookup_and_errors():
    spec = CostSpec("table", "min", [[0, 1], [2, 3]])
    assert eval_cost(spec, None, (1, 0)) == 2.0
    with pytest.raises(InputError):
        eval_cost(spec, [(0,), (1,)])


def test_cost_spec_rejects_nan_and_neg_inf():
    with pytest.raises(InputError):
        CostSpec("table", "min", [[np.nan, 0], [0, 0]])
    with pytest.raises(InputError):
        CostSpec("table", "min", [[-np.inf, 0], [0, 0]])
    with pytest.raises(InputError):
        CostSpec("volume")


def test_determinant_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        eval_cost(DET, [(1, 0, 0), (0, 1, 0)])


def test_materialize_single_cell():
    a = make_marginal([[2.0, 1.0]], [1.0])
    b = make_marginal([[1.0, 3.0]], [1.0])
    T = materialize_tensor(DET, [a, b])
    assert T.kind == "table" and T.sense == "max"
    assert T.values.shape == (1, 1) and T.values[0, 0] == 5.0


def test_materialize_coulomb_2x2():
    mu = uniform([[0, 0], [1, 0]])
    T = materialize_tensor(COUL, [mu, mu]).values
    assert T.reshape(-1).tolist() == [np.inf, 2.0, 2.0, np.inf]


def test_materialize_three_marginals():
    mu = uniform([[0, 0], [1, 0]])
    assert materialize_tensor(COUL, [mu] * 3).values.size == 8


def test_materialize_matches_pointwise_eval(rng):
    for spec, d, n in [(COUL, 2, 3), (CostSpec("determinant"), 3, 3), (CostSpec("determinant"), 2, 2)]:
        marg = [uniform(rng.standard_normal((3, d))) for _ in range(n)]
        T = materialize_tensor(spec, marg).values
        for t in itertools.product(range(3), repeat=n):
            pts = [marg[j].points[t[j]] for j in range(n)]
            assert T[t] == eval_cost(spec, pts)


def test_materialize_too_large():
    class Big:
        size = 10 ** 4
    with pytest.raises(TooLarge):
        materialize_tensor(COUL, [Big()] * 2)


def test_invariance_of_coulomb_under_rotation():
    marg, rot = gen_radial_instance([1.0, 2.0], 8, 2)
    # 45 degree turns are not exact in floating point
    assert check_cost_invariance(COUL, marg, rot) <= 1e-12
    marg, rot = gen_radial_instance([1.0, 2.0], 4, 3)
    assert check_cost_invariance(COUL, marg, rot) == 0.0


def test_invariance_of_determinant_under_quarter_turn():
    marg, rot = gen_radial_instance([1.0], 4, 2)
    assert check_cost_invariance(DET, marg, rot) == 0.0


def test_invariance_table_swap_first():
    mu = uniform([0, 1])
    spec = CostSpec("table", "min", [[0, 1], [2, 3]])
    act = ProductAction((MarginalMap([1, 0]), MarginalMap([0, 1])))
    assert check_cost_invariance(spec, [mu, mu], act) == 2.0


def test_identity_action_is_invariant(rng):
    mu = uniform(rng.standard_normal((3, 2)))
    for spec in (COUL, DET, CostSpec("table", "min", rng.standard_normal((3, 3)))):
        assert check_cost_invariance(spec, [mu, mu], identity_action([mu, mu])) == 0.0


def test_tensor_deviation_inf_conventions():
    a = np.array([np.inf, 1.0])
    assert tensor_deviation(a, np.array([np.inf, 1.5])) == 0.5
    assert tensor_deviation(a, np.array([1.0, 1.0])) == np.inf


def test_coulomb_symmetric_under_tuple_permutation(rng):
    pts = rng.standard_normal((4, 2))
    ref = eval_cost(COUL, list(pts))
    for p in itertools.permutations(range(4)):
        assert eval_cost(COUL, [pts[i] for i in p]) == pytest.approx(ref, rel=1e-14)


def test_determinant_antisymmetry(rng):
    for d in (2, 3):
        pts = list(rng.standard_normal((d, d)))
        swapped = [pts[1], pts[0]] + pts[2:]
        assert eval_cost(DET, swapped) == -eval_cost(DET, pts)


def test_problem_min_form_negates_max_and_keeps_inf():
    mu = uniform([0, 1])
    p = Problem([mu, mu], CostSpec("table", "max", [[1, np.inf], [-2, 0]]))
    assert p.ctilde.tolist() == [[-1, np.inf], [2, 0]]
    assert p.finite.tolist() == [[True, False], [True, True]]
