import numpy as np
import pytest

from efc.causal_models import (
    ModelSpec,
    analytic_constants,
    confounder_for,
    sample,
    true_conditional_effect,
)
from efc.confounders import LinearSum
from efc.data_model import Dataset, RngSeed, make_eval_queries
from efc.diagnostics import (
    cred_residual,
    fpos_dependence_check,
    model_gradient_field,
    support_score,
    surrogate_error_bound,
)
from efc.errors import DomainExceededError
from efc.surrogate_flow import (
    FlowConfig,
    FlowStatus,
    SurrogateResult,
    batch_solve_to_mismatch,
    closed_form_linear,
    euler_solve,
)


def _probes(spec, n, seed):
    gen = RngSeed(seed).generator()
    return [(gen.normal(0, spec.sigma, spec.dim), gen.normal()) for _ in range(n)]


def test_cred_residual_family_a_zero():
    spec = ModelSpec(family="A", dim=20, gamma=1.0)
    residual = cred_residual(
        model_gradient_field(spec), confounder_for(spec), _probes(spec, 1000, 0)
    )
    assert residual <= 1e-12


def test_cred_residual_family_b_zero():
    spec = ModelSpec(family="B", dim=20, gamma=1.0)
    residual = cred_residual(
        model_gradient_field(spec), confounder_for(spec), _probes(spec, 1000, 1)
    )
    assert residual <= 1e-12


def test_cred_residual_violating_field():
    # f(t, .) = h(t)^2 read through the first argument: the residual is
    # 2 |h| ||grad h||^2 = 2 gamma^2 |h| by the chain rule
    conf = LinearSum(gamma=1.0, dim=2)

    def violating_grad(t, h2):
        return 2.0 * conf.value(t)[0] * conf.grad(t)[:, 0]

    t = np.array([np.sqrt(2.0), 0.0])  # h(t) = 1
    residual = cred_residual(violating_grad, conf, [(t, 0.0)])
    assert residual == pytest.approx(2.0, abs=1e-8)


def test_cred_residual_invariant_to_h_rescaling():
    spec = ModelSpec(family="A", dim=8, gamma=1.0)
    grad = model_gradient_field(spec)
    points = _probes(spec, 100, 2)
    for gamma in (0.5, 2.0, 8.0):
        scaled = LinearSum(gamma=gamma, dim=8)
        assert cred_residual(grad, scaled, points) <= 1e-12


def test_bound_zero_for_exact_linear_surrogate():
    spec = ModelSpec(family="A", dim=8, gamma=1.0, alpha=1.0)
    conf = confounder_for(spec)
    data = sample(spec, 20, RngSeed(3))
    query = make_eval_queries(data, conf, RngSeed(4))[0]
    surr = closed_form_linear(conf, query)
    report = surrogate_error_bound(analytic_constants(spec), surr, FlowConfig())
    assert report.accumulation_term == 0.0
    assert report.mismatch_term <= 1e-10
    assert report.total <= 1e-10


def test_bound_zero_steps_is_mismatch_term_only():
    consts = analytic_constants(ModelSpec(family="A", dim=8, gamma=1.0, alpha=1.0))
    t_star = np.zeros(8)
    m0 = 2.25  # |h(t*) - h2| = 1.5
    surr = SurrogateResult(
        t_hat=t_star, steps_taken=0, final_mismatch=m0, initial_mismatch=m0,
        max_mismatch=m0, status=FlowStatus.MAX_STEPS_REACHED,
    )
    report = surrogate_error_bound(consts, surr, FlowConfig(step_size=0.05))
    assert report.accumulation_term == 0.0
    assert report.total == pytest.approx(consts.l_z * 1.5, abs=1e-12)


def test_bound_dominates_error_family_b_oracle():
    spec = ModelSpec(family="B", dim=4, gamma=1.0, alpha=1.0, noise_sd=0.0)
    conf = confounder_for(spec)
    consts = analytic_constants(spec)
    data = sample(spec, 100, RngSeed(5))
    queries = make_eval_queries(data, conf, RngSeed(6))
    cfg = FlowConfig(step_size=0.05, rel_tolerance=1e-6, record_trajectory=True)
    checked = 0
    for query in queries:
        surr = euler_solve(conf, query, cfg)
        if surr.status is FlowStatus.DIVERGED:
            continue
        report = surrogate_error_bound(consts, surr, cfg)
        attained = true_conditional_effect(spec, surr.t_hat, float(conf.value(surr.t_hat)[0]))
        truth = true_conditional_effect(spec, query.t_star, float(query.h_target[0]))
        assert abs(attained - truth) <= report.total + 1e-12
        checked += 1
    assert checked >= 90


def test_bound_monotone_in_inputs():
    consts = analytic_constants(ModelSpec(family="B", dim=4, gamma=1.0, alpha=1.0))
    base = dict(steps_taken=40, final_mismatch=0.25, initial_mismatch=4.0, max_mismatch=4.0)
    cfg = FlowConfig(step_size=0.05)

    def total(**overrides):
        values = {**base, **overrides}
        surr = SurrogateResult(
            t_hat=np.zeros(4), status=FlowStatus.CONVERGED, **values
        )
        return surrogate_error_bound(consts, surr, cfg).total

    t0 = total()
    assert total(steps_taken=80) >= t0
    assert total(max_mismatch=8.0) >= t0
    assert total(final_mismatch=0.5) >= t0
    bigger_step = surrogate_error_bound(
        consts,
        SurrogateResult(t_hat=np.zeros(4), status=FlowStatus.CONVERGED, **base),
        FlowConfig(step_size=0.1),
    ).total
    assert bigger_step >= t0


def test_bound_alt_route_taken_when_smaller():
    consts = analytic_constants(ModelSpec(family="B", dim=4, gamma=1.0, alpha=1.0))
    surr = SurrogateResult(
        t_hat=np.zeros(4), steps_taken=1000, final_mismatch=1.0,
        initial_mismatch=4.0, max_mismatch=9.0, status=FlowStatus.MAX_STEPS_REACHED,
    )
    cfg = FlowConfig(step_size=0.05)
    report = surrogate_error_bound(consts, surr, cfg, oracle_t_prime=np.zeros(4))
    assert report.alt_term == 0.0
    assert report.total == 0.0


def test_bound_domain_exceeded():
    consts = analytic_constants(ModelSpec(family="A", dim=4, gamma=1.0), domain_radius=1.0)
    surr = SurrogateResult(
        t_hat=np.full(4, 10.0), steps_taken=0, final_mismatch=0.0,
        initial_mismatch=0.0, max_mismatch=0.0, status=FlowStatus.CONVERGED,
    )
    with pytest.raises(DomainExceededError):
        surrogate_error_bound(consts, surr, FlowConfig())


def test_support_score_training_row():
    gen = np.random.default_rng(7)
    data = Dataset(points=gen.normal(size=(100, 3)))
    dist, pct = support_score(data, data.points[4], k=1)
    assert dist == 0.0
    assert pct == 0.0


def test_support_score_far_point():
    gen = np.random.default_rng(8)
    data = Dataset(points=gen.normal(size=(1000, 3)))
    dist, pct = support_score(data, np.full(3, 10.0), k=1)
    assert pct >= 99.0


def test_support_score_duplicates_ignored():
    gen = np.random.default_rng(9)
    points = gen.normal(size=(200, 3))
    data = Dataset(points=points)
    doubled = Dataset(points=np.vstack([points, points]))
    probe = gen.normal(size=3)
    assert support_score(data, probe, k=2) == support_score(doubled, probe, k=2)


def test_fpos_deterministic_link():
    gen = np.random.default_rng(10)
    h = gen.normal(size=1000)
    assert fpos_dependence_check(h, h) >= 0.99


def test_fpos_independent():
    gen = np.random.default_rng(11)
    g = gen.normal(size=1000)
    h = gen.normal(size=1000)
    assert fpos_dependence_check(g, h) <= 0.1


def test_fpos_monotone_in_noise():
    gen = np.random.default_rng(12)
    h = gen.normal(size=1000)
    noise = gen.normal(size=1000)
    scores = [fpos_dependence_check(h + s * noise, h) for s in (0.1, 0.5, 2.0)]
    assert scores[0] > scores[1] > scores[2]
    assert 0.0 < scores[1] < 1.0


def test_batch_interrupt_feeds_bound_k_zero():
    # interrupted immediately: the report reduces to the mismatch penalty
    spec = ModelSpec(family="A", dim=8, gamma=2.0, alpha=1.0)
    conf = confounder_for(spec)
    data = sample(spec, 50, RngSeed(13))
    queries = make_eval_queries(data, conf, RngSeed(14))
    results = batch_solve_to_mismatch(conf, queries, delta=100.0, cfg=FlowConfig())
    consts = analytic_constants(spec)
    report = surrogate_error_bound(consts, results[0], FlowConfig())
    assert report.accumulation_term == 0.0
    assert report.total == pytest.approx(
        consts.l_z * np.sqrt(results[0].final_mismatch), abs=1e-12
    )


def test_empirical_lipschitz_linear_logistic():
    from efc.diagnostics import empirical_lipschitz
    from efc.regression import LogisticLassoModel

    w = np.array([3.0, -4.0])
    model = LogisticLassoModel(weights=w, intercept=0.0, l1_penalty=0.0)
    probes = np.random.default_rng(20).normal(size=(50, 2))
    estimate = empirical_lipschitz(model, probes)
    # sigmoid slope is at most 1/4, so the gradient norm is at most ||w||/4
    assert 0.0 < estimate <= np.linalg.norm(w) / 4 + 1e-6


def test_empirical_lipschitz_krr_finite():
    from efc.causal_models import sample
    from efc.diagnostics import empirical_lipschitz
    from efc.regression import fit_krr

    spec = ModelSpec(family="A", dim=4, gamma=1.0)
    data = sample(spec, 100, RngSeed(21))
    model = fit_krr(data, ridge=1e-2)
    estimate = empirical_lipschitz(model, data.points[:20])
    assert np.isfinite(estimate) and estimate > 0.0
