"""Effect estimators built on outcome models and surrogate interventions.

The main estimator evaluates a fitted outcome model at the surrogate
intervention belonging to a query: the surrogate shares the query's
conditional effect but lies on the target confounder level set, where the
observed conditional mean identifies that effect. The confounded baseline
evaluates the same model at the raw intervention point and serves as the
comparison in the sweep experiments. Functional-intervention effects and
the per-variant genotype contrast reuse the same machinery.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .confounders import FunctionalConfounder
from .data_model import Dataset, InterventionQuery, RngSeed
from .errors import AllDivergedError, DegenerateDesignError, DimensionMismatchError
from .regression import fit_krr
from .surrogate_flow import (
    FlowConfig,
    FlowStatus,
    SurrogateResult,
    _integrate,
    closed_form_linear,
    euler_solve,
)

__all__ = [
    "EffectEstimate",
    "AverageEffectEstimate",
    "SnpEffect",
    "solve_surrogate",
    "lode_conditional_effect",
    "lode_average_effect",
    "baseline_conditional_effect",
    "functional_effect",
    "gwas_snp_effect",
]

METHOD_LODE = "lode"
METHOD_BASELINE = "baseline"
METHOD_FUNCTIONAL = "functional"
METHOD_GWAS_LOG_ODDS = "gwas_log_odds"

_PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class EffectEstimate:
    """A single conditional-effect estimate.

    ``value`` is None exactly when the surrogate search diverged; callers
    decide whether to skip or fail on flagged estimates.
    """

    value: Optional[float]
    method: str
    query: InterventionQuery
    surrogate: Optional[SurrogateResult] = None

    @property
    def diverged(self) -> bool:
        return self.surrogate is not None and self.surrogate.status is FlowStatus.DIVERGED


@dataclass(frozen=True)
class AverageEffectEstimate:
    value: float
    n_used: int
    diverged_count: int


@dataclass(frozen=True)
class SnpEffect:
    snp_index: int
    value: float
    diverged_count: int


def solve_surrogate(
    conf: FunctionalConfounder, query: InterventionQuery, cfg: FlowConfig
) -> SurrogateResult:
    """Closed form for linear confounders, Euler integration otherwise."""
    if conf.is_linear:
        return closed_form_linear(conf, query)
    return euler_solve(conf, query, cfg)


def lode_conditional_effect(
    model,
    conf: FunctionalConfounder,
    query: InterventionQuery,
    cfg: FlowConfig = FlowConfig(),
) -> EffectEstimate:
    """Evaluate the outcome model at the query's surrogate intervention."""
    if query.dim != conf.dim:
        raise DimensionMismatchError("query dimension does not match confounder")
    surr = solve_surrogate(conf, query, cfg)
    value = None if surr.status is FlowStatus.DIVERGED else float(model.predict(surr.t_hat))
    return EffectEstimate(value=value, method=METHOD_LODE, query=query, surrogate=surr)


def baseline_conditional_effect(model, query: InterventionQuery) -> EffectEstimate:
    """The confounded comparison: the model's value at the raw intervention point."""
    value = float(model.predict(query.t_star))
    return EffectEstimate(value=value, method=METHOD_BASELINE, query=query, surrogate=None)


def lode_average_effect(
    model,
    conf: FunctionalConfounder,
    t_star,
    h_samples: Sequence,
    cfg: FlowConfig = FlowConfig(),
) -> AverageEffectEstimate:
    """Arithmetic mean of conditional estimates over sampled confounder values.

    Diverged solves are skipped and counted; if every solve diverges there
    is nothing to average and AllDivergedError is raised.
    """
    if len(h_samples) == 0:
        raise ValueError("h_samples must be nonempty")
    t_star = np.asarray(t_star, dtype=float).reshape(-1)
    values = []
    diverged = 0
    for h in h_samples:
        query = InterventionQuery(t_star=t_star, h_target=np.atleast_1d(np.asarray(h, dtype=float)))
        est = lode_conditional_effect(model, conf, query, cfg)
        if est.value is None:
            diverged += 1
        else:
            values.append(est.value)
    if not values:
        raise AllDivergedError("every surrogate solve diverged")
    return AverageEffectEstimate(
        value=float(np.mean(values)), n_used=len(values), diverged_count=diverged
    )


_DESIGN_COND_TOL = 1e-10


def functional_effect(
    data: Dataset,
    g_values,
    h_values,
    g_star: float,
    ridge: Optional[float] = None,
    kernel_offset: float = 1.0,
) -> float:
    """Effect of intervening on a function g of the pre-outcome variables.

    Fits a degree-2 kernel ridge regression of the outcome on the pair
    (h(t), g(t)) and averages its predictions at (h(t_i), g_star) over the
    rows, i.e. over the empirical marginal of the confounder. Requires the
    intervened function to retain variation given the confounder: a
    rank-deficient (h, g) design is rejected.
    """
    if data.outcomes is None:
        raise ValueError("dataset has no outcomes")
    g = np.asarray(g_values, dtype=float).reshape(data.n, -1)
    h = np.asarray(h_values, dtype=float).reshape(data.n, -1)
    design = np.hstack([h, g])
    centered = design - design.mean(axis=0, keepdims=True)
    sing = np.linalg.svd(centered, compute_uv=False)
    if sing[0] == 0.0 or sing[-1] <= _DESIGN_COND_TOL * sing[0]:
        raise DegenerateDesignError(
            "the (h, g) design is rank-deficient; g carries no variation beyond h"
        )
    if ridge is None:
        ridge = 1e-4 * data.n
    model = fit_krr(
        Dataset(points=design, outcomes=data.outcomes), ridge=ridge, kernel_offset=kernel_offset
    )
    eval_design = np.hstack([h, np.full_like(g, g_star)])
    return float(np.mean(model.predict_batch(eval_design)))


def _logit(p: np.ndarray) -> np.ndarray:
    return np.log(p) - np.log1p(-p)


def gwas_snp_effect(
    model,
    conf: FunctionalConfounder,
    data: Dataset,
    snp_index: int,
    cfg: FlowConfig = FlowConfig(),
    rng: RngSeed = RngSeed(0),
) -> SnpEffect:
    """Average per-person log-odds contrast of setting one variant to 1 versus 0.

    For each person, both variant settings share one confounder target
    drawn from the empirical marginal of h over the dataset, so the
    contrast isolates the variant. Probabilities are clamped away from 0
    and 1 before taking log odds. Diverged solves are skipped and counted.
    """
    if not 0 <= snp_index < data.dim:
        raise DimensionMismatchError(f"snp_index {snp_index} out of range")
    n = data.n
    if n == 0:
        raise ValueError("dataset is empty")
    if data.confounder_cache is not None and data.confounder_cache.shape[1] == conf.output_dim:
        h_values = np.asarray(data.confounder_cache)
    else:
        h_values = conf.value_batch(data.points)
    gen = rng.generator()
    h2 = h_values[gen.integers(0, n, size=n)]

    t_one = np.array(data.points)
    t_one[:, snp_index] = 1.0
    t_zero = np.array(data.points)
    t_zero[:, snp_index] = 0.0

    if conf.is_linear:
        s_one, ok_one = _project_rows(conf, t_one, h2), np.ones(n, dtype=bool)
        s_zero, ok_zero = _project_rows(conf, t_zero, h2), np.ones(n, dtype=bool)
    else:
        s_one, ok_one = _euler_rows(conf, t_one, h2, cfg)
        s_zero, ok_zero = _euler_rows(conf, t_zero, h2, cfg)
    ok = ok_one & ok_zero
    if not np.any(ok):
        raise AllDivergedError("every surrogate solve diverged")
    p_one = np.clip(model.predict_batch(s_one[ok]), _PROB_FLOOR, 1.0 - _PROB_FLOOR)
    p_zero = np.clip(model.predict_batch(s_zero[ok]), _PROB_FLOOR, 1.0 - _PROB_FLOOR)
    effects = _logit(p_one) - _logit(p_zero)
    return SnpEffect(
        snp_index=int(snp_index),
        value=float(np.mean(effects)),
        diverged_count=int(n - ok.sum()),
    )


def _project_rows(conf: FunctionalConfounder, points: np.ndarray, h_targets: np.ndarray) -> np.ndarray:
    """Row-wise closed-form projection onto per-row target level sets."""
    w = conf.weight_matrix()
    resid = conf.value_batch(points) - h_targets
    gram = w.T @ w
    correction = np.linalg.solve(gram, resid.T).T @ w.T
    return points - correction


def _euler_rows(
    conf: FunctionalConfounder, points: np.ndarray, h_targets: np.ndarray, cfg: FlowConfig
) -> tuple[np.ndarray, np.ndarray]:
    results = _integrate(conf, points, h_targets, cfg, batch_delta=None)
    out = np.stack([r.t_hat for r in results])
    ok = np.array([r.status is not FlowStatus.DIVERGED for r in results])
    return out, ok
