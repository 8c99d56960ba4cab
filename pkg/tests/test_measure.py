import numpy as np
import pytest

from mkot.errors import (DuplicatePoint, MixedDimension, NonPositiveWeight, Overflow,
                         WeightSumMismatch)
from mkot.measure import (DiscreteMarginal, ProductIndex, make_marginal, product_size,
                          validate_marginal)


def test_single_atom_is_valid():
    m = make_marginal([[0.0, 0.0]], [1.0])
    assert m.size == 1 and m.dim == 2


def test_uniform_two_atoms_valid():
    m = make_marginal([[0, 0], [1, 0]], [0.5, 0.5])
    assert np.array_equal(m.weights, [0.5, 0.5])


def test_weight_sum_mismatch():
    with pytest.raises(WeightSumMismatch):
        make_marginal([[0, 0]], [0.9])


def test_weight_sum_tolerance_edges():
    make_marginal([[0], [1]], [0.5, 0.5 + 9e-13])
    with pytest.raises(WeightSumMismatch):
        make_marginal([[0], [1]], [0.5, 0.5 + 2e-12])


@pytest.mark.parametrize("w", [[1.0, 0.0], [1.5, -0.5], [np.nan, 1.0]])
def test_non_positive_weight(w):
    with pytest.raises(NonPositiveWeight):
        make_marginal([[0], [1]], w)


def test_duplicate_point_rejected():
    with pytest.raises(DuplicatePoint):
        make_marginal([[0, 1], [0, 1]], [0.5, 0.5])


def test_mixed_dimension():
    with pytest.raises(MixedDimension):
        validate_marginal(DiscreteMarginal(np.zeros((3, 2)), [0.5, 0.5]))


def test_validate_is_idempotent():
    m = make_marginal([[0, 0], [1, 2]], [0.25, 0.75])
    again = validate_marginal(validate_marginal(m))
    assert again is m and m.same_as(again)


def test_data_is_read_only():
    m = make_marginal([0.0, 1.0], [0.5, 0.5])
    with pytest.raises(ValueError):
        m.weights[0] = 1.0
    assert m.points.shape == (2, 1)


def test_product_size_examples():
    a, b = make_marginal(np.arange(3.0), np.full(3, 1 / 3)), make_marginal(np.arange(4.0), [0.25] * 4)
    assert product_size([a, b]) == 12
    two = make_marginal([0.0, 1.0], [0.5, 0.5])
    assert product_size([two] * 3) == 8


def test_product_size_overflow():
    class Big:
        size = 10 ** 6
    with pytest.raises(Overflow):
        product_size([Big()] * 3)


def test_product_index_bounds():
    assert ProductIndex((1, 2), (2, 3)).flat() == 5
    with pytest.raises(IndexError):
        ProductIndex((2, 0), (2, 3))
