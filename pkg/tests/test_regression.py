import numpy as np
import pytest

from efc.causal_models import ModelSpec, sample
from efc.data_model import Dataset, RngSeed
from efc.errors import FoldTooSmallError
from efc.regression import (
    LogisticLassoModel,
    cross_validate,
    fit_krr,
    fit_logistic_lasso,
    load_model,
    save_model,
)


def test_krr_interpolates_noise_free_family_a():
    # the outcome is a degree-2 polynomial, exactly representable by the kernel
    spec = ModelSpec(family="A", dim=20, gamma=1.0, alpha=1.0, noise_sd=0.0)
    data = sample(spec, 300, RngSeed(0))
    model = fit_krr(data, ridge=1e-6)
    pred = model.predict_batch(data.points)
    assert float(np.sqrt(np.mean((pred - data.outcomes) ** 2))) <= 1e-3


def test_krr_single_point_interpolation():
    data = Dataset(points=np.array([[2.0, 1.0]]), outcomes=np.array([5.0]))
    model = fit_krr(data, ridge=1e-8)
    assert model.predict([2.0, 1.0]) == pytest.approx(5.0, abs=1e-5)


def test_krr_constant_outcomes():
    gen = np.random.default_rng(1)
    points = gen.normal(size=(40, 3))
    data = Dataset(points=points, outcomes=np.full(40, 3.0))
    model = fit_krr(data, ridge=1e-8)
    probe = points[7] + 0.01
    assert model.predict(probe) == pytest.approx(3.0, abs=1e-6)


def test_krr_matches_hand_solved_two_point_system():
    # K = [[1, 1], [1, 4]] for points 0, 1 with offset 1; ridge 0.5 gives
    # (K + 0.5 I) a = y  =>  a = (6/23, 14/23) for y = (1, 3)
    data = Dataset(points=np.array([[0.0], [1.0]]), outcomes=np.array([1.0, 3.0]))
    model = fit_krr(data, ridge=0.5)
    np.testing.assert_allclose(model.dual_coef, [6 / 23, 14 / 23], atol=1e-10)
    assert model.predict([2.0]) == pytest.approx(6 / 23 + 9 * 14 / 23, abs=1e-10)


def test_krr_permutation_invariant_predictions():
    gen = np.random.default_rng(2)
    points = gen.normal(size=(50, 4))
    y = gen.normal(size=50)
    model = fit_krr(Dataset(points=points, outcomes=y), ridge=1e-3)
    perm = gen.permutation(50)
    permuted = fit_krr(Dataset(points=points[perm], outcomes=y[perm]), ridge=1e-3)
    probes = gen.normal(size=(10, 4))
    np.testing.assert_allclose(
        model.predict_batch(probes), permuted.predict_batch(probes), atol=1e-8
    )


def test_krr_dual_residual_invariant():
    gen = np.random.default_rng(3)
    data = Dataset(points=gen.normal(size=(80, 5)), outcomes=gen.normal(size=80))
    model = fit_krr(data, ridge=1e-2)
    k = (data.points @ data.points.T + 1.0) ** 2
    residual = np.linalg.norm((k + 1e-2 * np.eye(80)) @ model.dual_coef - data.outcomes)
    assert residual <= 1e-8 * np.linalg.norm(data.outcomes)


def test_logistic_predict_examples():
    model = LogisticLassoModel(weights=np.zeros(2), intercept=0.0, l1_penalty=0.0)
    assert model.predict([13.0, -4.0]) == 0.5
    model = LogisticLassoModel(weights=np.array([1.0, 0.0]), intercept=0.0, l1_penalty=0.0)
    assert model.predict([np.log(3.0), 7.0]) == pytest.approx(0.75, abs=1e-12)


def test_lasso_huge_penalty_reduces_to_intercept():
    gen = np.random.default_rng(4)
    x = gen.normal(size=(500, 4))
    y = (gen.random(500) < 0.25).astype(float)
    model = fit_logistic_lasso(Dataset(points=x, outcomes=y), l1_penalty=1e6)
    assert np.all(model.weights == 0.0)
    ybar = y.mean()
    assert model.intercept == pytest.approx(np.log(ybar / (1 - ybar)), abs=1e-6)


def test_lasso_independent_features_stay_small():
    gen = np.random.default_rng(5)
    n = 10_000
    x = gen.normal(size=(n, 5))
    y = np.zeros(n)
    y[: n // 2] = 1.0
    y = y[gen.permutation(n)]
    model = fit_logistic_lasso(Dataset(points=x, outcomes=y), l1_penalty=0.1)
    assert float(np.abs(model.weights).sum()) <= 0.05


def test_lasso_separating_feature_gets_positive_weight():
    gen = np.random.default_rng(6)
    x = gen.normal(size=(300, 3))
    y = (x[:, 1] > 0).astype(float)
    model = fit_logistic_lasso(Dataset(points=x, outcomes=y), l1_penalty=0.0)
    assert model.weights[1] > 0.5


def test_lasso_objective_monotone():
    gen = np.random.default_rng(7)
    x = gen.normal(size=(400, 6))
    logits = x @ gen.normal(size=6)
    y = (gen.random(400) < 1 / (1 + np.exp(-logits))).astype(float)
    for penalty in (0.0, 0.01, 1.0):
        model = fit_logistic_lasso(Dataset(points=x, outcomes=y), l1_penalty=penalty)
        diffs = np.diff(model.objective_history)
        assert np.all(diffs <= 0.0)


def test_lasso_rejects_non_binary():
    data = Dataset(points=np.zeros((3, 2)), outcomes=np.array([0.0, 0.5, 1.0]))
    with pytest.raises(ValueError):
        fit_logistic_lasso(data, l1_penalty=0.1)


def test_cv_single_candidate():
    spec = ModelSpec(family="A", dim=4, noise_sd=0.0)
    data = sample(spec, 40, RngSeed(8))
    chosen, losses = cross_validate(data, 4, [0.37], kind="krr", rng=RngSeed(9))
    assert chosen == 0.37
    assert len(losses) == 1


def test_cv_prefers_small_ridge_on_noise_free_data():
    spec = ModelSpec(family="A", dim=8, noise_sd=0.0)
    data = sample(spec, 200, RngSeed(10))
    chosen, losses = cross_validate(data, 5, [1e-6, 1e3], kind="krr", rng=RngSeed(11))
    assert chosen == 1e-6
    assert losses[0] < losses[1]


def test_cv_tie_broken_toward_larger_penalty():
    spec = ModelSpec(family="A", dim=4)
    data = sample(spec, 30, RngSeed(12))
    chosen, losses = cross_validate(data, 3, [0.25, 0.25], kind="krr", rng=RngSeed(13))
    assert chosen == 0.25
    assert losses[0] == losses[1]


def test_cv_fold_too_small():
    spec = ModelSpec(family="A", dim=4)
    data = sample(spec, 3, RngSeed(14))
    with pytest.raises(FoldTooSmallError):
        cross_validate(data, 5, [0.1], kind="krr", rng=RngSeed(15))


def test_cv_deterministic_folds():
    spec = ModelSpec(family="A", dim=4)
    data = sample(spec, 50, RngSeed(16))
    a = cross_validate(data, 5, [1e-4, 1e-2], kind="krr", rng=RngSeed(17))
    b = cross_validate(data, 5, [1e-4, 1e-2], kind="krr", rng=RngSeed(17))
    assert a == b


def test_cv_lasso_warm_start_path():
    gen = np.random.default_rng(18)
    x = gen.normal(size=(200, 4))
    y = (gen.random(200) < 1 / (1 + np.exp(-x[:, 0]))).astype(float)
    data = Dataset(points=x, outcomes=y)
    chosen, losses = cross_validate(data, 4, [1e-3, 1e-1, 10.0], kind="lasso", rng=RngSeed(19))
    assert chosen in (1e-3, 1e-1, 10.0)
    assert len(losses) == 3
    assert losses[2] >= min(losses)


def test_model_json_round_trip(tmp_path):
    gen = np.random.default_rng(20)
    data = Dataset(points=gen.normal(size=(20, 3)), outcomes=gen.normal(size=20))
    krr = fit_krr(data, ridge=1e-2)
    path = tmp_path / "krr.json"
    save_model(krr, path)
    back = load_model(path)
    probe = gen.normal(size=3)
    assert back.predict(probe) == krr.predict(probe)

    lasso = LogisticLassoModel(weights=gen.normal(size=3), intercept=0.3, l1_penalty=0.5)
    path = tmp_path / "lasso.json"
    save_model(lasso, path)
    back = load_model(path)
    assert back.predict(probe) == lasso.predict(probe)
