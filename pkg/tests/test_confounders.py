import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from efc.confounders import (
    LinearMap,
    LinearSum,
    PairwiseBilinear,
    check_grad,
    load_linear_map,
    save_linear_map,
)
from efc.errors import DimensionMismatchError


def test_linear_sum_value():
    conf = LinearSum(gamma=1.0, dim=2)
    assert conf.value([1.0, 0.0])[0] == pytest.approx(1 / np.sqrt(2), abs=1e-12)


def test_pairwise_bilinear_value_zero_product():
    conf = PairwiseBilinear(gamma=1.0, dim=2)
    assert conf.value([1.0, 0.0])[0] == 0.0


def test_linear_map_identity():
    conf = LinearMap(weights=np.eye(2))
    np.testing.assert_array_equal(conf.value([3.0, 4.0]), [3.0, 4.0])


def test_linear_sum_grad_constant():
    conf = LinearSum(gamma=2.0, dim=4)
    grad = conf.grad(np.random.default_rng(0).normal(size=4))
    np.testing.assert_array_equal(grad, np.ones((4, 1)))


def test_pairwise_bilinear_grad_swaps():
    conf = PairwiseBilinear(gamma=1.0, dim=2)
    np.testing.assert_array_equal(conf.grad([2.0, 5.0])[:, 0], [5.0, 2.0])


def test_linear_map_grad_is_weights():
    w = np.random.default_rng(1).normal(size=(3, 2))
    conf = LinearMap(weights=w)
    np.testing.assert_array_equal(conf.grad(np.zeros(3)), w)


def test_check_grad_linear_map():
    conf = LinearMap(weights=np.random.default_rng(2).normal(size=(4, 2)))
    assert check_grad(conf, np.random.default_rng(3).normal(size=4), eps=1e-5) <= 1e-10


def test_check_grad_bilinear():
    conf = PairwiseBilinear(gamma=1.0, dim=2)
    assert check_grad(conf, [1.0, 2.0], eps=1e-5) <= 1e-6


def test_check_grad_linear_sum():
    conf = LinearSum(gamma=1.3, dim=6)
    assert check_grad(conf, np.random.default_rng(4).normal(size=6), eps=1e-5) <= 1e-10


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1), st.sampled_from([2, 4, 8]))
def test_check_grad_all_kinds(seed, dim):
    gen = np.random.default_rng(seed)
    t = gen.normal(size=dim)
    for conf in (
        LinearSum(gamma=gen.uniform(0.1, 3), dim=dim),
        PairwiseBilinear(gamma=gen.uniform(0.1, 3), dim=dim),
        LinearMap(weights=gen.normal(size=(dim, 3))),
    ):
        assert check_grad(conf, t, eps=1e-5) <= 1e-5


@settings(max_examples=30, deadline=None)
@given(
    st.floats(min_value=0.01, max_value=10.0),
    st.floats(min_value=0.1, max_value=5.0),
    st.integers(min_value=0, max_value=1000),
)
def test_scaling_in_gamma(gamma, factor, seed):
    t = np.random.default_rng(seed).normal(size=4)
    for kind in (LinearSum, PairwiseBilinear):
        base = kind(gamma=gamma, dim=4).value(t)[0]
        scaled = kind(gamma=factor * gamma, dim=4).value(t)[0]
        assert scaled == pytest.approx(factor * base, rel=1e-12, abs=1e-12)


def test_dimension_mismatch_raises():
    conf = LinearSum(gamma=1.0, dim=4)
    with pytest.raises(DimensionMismatchError):
        conf.value([1.0, 2.0])
    with pytest.raises(DimensionMismatchError):
        conf.grad([1.0, 2.0, 3.0])


def test_constructor_validation():
    with pytest.raises(ValueError):
        LinearSum(gamma=1.0, dim=1)
    with pytest.raises(ValueError):
        PairwiseBilinear(gamma=1.0, dim=3)
    with pytest.raises(ValueError):
        LinearMap(weights=np.array([[np.inf]]))


def test_batch_matches_single():
    gen = np.random.default_rng(9)
    points = gen.normal(size=(20, 4))
    for conf in (
        LinearSum(gamma=1.7, dim=4),
        PairwiseBilinear(gamma=0.4, dim=4),
        LinearMap(weights=gen.normal(size=(4, 2)), offset=gen.normal(size=4)),
    ):
        values = conf.value_batch(points)
        grads = conf.grad_batch(points)
        for i, t in enumerate(points):
            np.testing.assert_allclose(values[i], conf.value(t), rtol=0, atol=1e-15)
            np.testing.assert_allclose(grads[i], conf.grad(t), rtol=0, atol=1e-15)


def test_linear_map_offset_shifts_value():
    w = np.array([[1.0], [0.0]])
    conf = LinearMap(weights=w, offset=np.array([2.0, 0.0]))
    assert conf.value([5.0, 1.0])[0] == 3.0


def test_linear_map_csv_round_trip(tmp_path):
    w = np.random.default_rng(5).normal(size=(6, 3))
    path = tmp_path / "map.csv"
    save_linear_map(LinearMap(weights=w), path)
    back = load_linear_map(path)
    np.testing.assert_array_equal(back.weights, w)
