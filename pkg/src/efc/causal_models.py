"""Simulated data-generating processes with analytic effect oracles.

Two families are implemented. Family "A" has a linear confounder and an
outcome that is linear in the intervention; family "B" has a pairwise
bilinear confounder and an outcome quadratic in the intervention. In both,
the direct term's gradient is orthogonal to the confounder gradient, so
the observed outcome reads the confounder only through its second
argument and surrogate-based estimation applies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .confounders import FunctionalConfounder, LinearSum, PairwiseBilinear
from .data_model import Dataset, RngSeed
from .errors import DimensionMismatchError

__all__ = [
    "ModelSpec",
    "BoundConstants",
    "confounder_for",
    "sample",
    "outcome_mean",
    "direct_term",
    "true_conditional_effect",
    "true_average_effect",
    "analytic_constants",
]

DEFAULT_NOISE_SD = math.sqrt(0.1)


@dataclass(frozen=True)
class ModelSpec:
    """Parameters of a simulated causal model.

    gamma scales the confounder, alpha the outcome's sensitivity to it,
    sigma the standard deviation of each pre-outcome coordinate. The
    outcome noise standard deviation defaults to sqrt(0.1), i.e. noise
    variance 0.1.
    """

    family: str
    dim: int = 20
    gamma: float = 1.0
    alpha: float = 1.0
    sigma: float = 1.0
    noise_sd: float = DEFAULT_NOISE_SD

    def __post_init__(self):
        if self.family not in ("A", "B"):
            raise ValueError("family must be 'A' or 'B'")
        if self.dim < 2 or self.dim % 2 != 0:
            raise ValueError("dim must be even and >= 2")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be nonnegative")


@dataclass(frozen=True)
class BoundConstants:
    """Regularity constants for the surrogate error bound, valid on a bounded domain.

    l_z bounds the conditional effect's sensitivity to the confounder
    argument, l_h the confounder gradient norm, sigma_h_phi the spectral
    norm of the effect's Hessian in the intervention, and l_e the
    Lipschitz constant of the observed conditional mean. All hold on the
    ball of radius ``domain_radius`` with confounder values reachable
    from it.
    """

    l_z: float
    l_h: float
    sigma_h_phi: float
    l_e: float
    domain_radius: float

    def __post_init__(self):
        values = (self.l_z, self.l_h, self.sigma_h_phi, self.l_e, self.domain_radius)
        if any(not np.isfinite(v) or v < 0 for v in values):
            raise ValueError("bound constants must be finite and nonnegative")


def confounder_for(spec: ModelSpec) -> FunctionalConfounder:
    """The confounder field belonging to a model family."""
    if spec.family == "A":
        return LinearSum(gamma=spec.gamma, dim=spec.dim)
    return PairwiseBilinear(gamma=spec.gamma, dim=spec.dim)


def _alternating(dim: int) -> np.ndarray:
    signs = np.ones(dim)
    signs[1::2] = -1.0
    return signs


def direct_term(spec: ModelSpec, points: np.ndarray) -> np.ndarray:
    """The confounder-free part of the outcome, per row."""
    points = np.asarray(points, dtype=float)
    signs = _alternating(spec.dim)
    if spec.family == "A":
        return (points * signs).sum(axis=-1) / np.sqrt(spec.dim)
    return (points**2 * signs).sum(axis=-1) / np.sqrt(spec.dim)


def outcome_mean(spec: ModelSpec, points: np.ndarray, h_values: np.ndarray) -> np.ndarray:
    """Noise-free outcome at each row, with the confounder argument supplied separately."""
    h = np.asarray(h_values, dtype=float).reshape(-1)
    base = direct_term(spec, points)
    if spec.family == "A":
        return base + spec.alpha * h**2 + (1.0 + spec.alpha) * h
    return base + spec.alpha * h


def sample(spec: ModelSpec, n: int, rng: RngSeed) -> Dataset:
    """Draw n rows: t ~ N(0, sigma^2 I), outcome from the family formula plus noise.

    The confounder values of the sampled rows are cached on the dataset.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    gen = rng.generator()
    points = gen.normal(0.0, spec.sigma, size=(n, spec.dim))
    conf = confounder_for(spec)
    h = conf.value_batch(points)[:, 0] if n else np.zeros(0)
    noise = gen.normal(0.0, spec.noise_sd, size=n) if spec.noise_sd > 0 else np.zeros(n)
    y = outcome_mean(spec, points, h) + noise if n else np.zeros(0)
    return Dataset(points=points, outcomes=y, confounder_cache=h.reshape(-1, 1))


def true_conditional_effect(spec: ModelSpec, t_star, h_target: float) -> float:
    """Closed-form conditional effect: the noise integrates out of the outcome."""
    t_star = np.asarray(t_star, dtype=float).reshape(-1)
    if t_star.shape[0] != spec.dim:
        raise DimensionMismatchError(
            f"t_star must have length {spec.dim}, got {t_star.shape[0]}"
        )
    return float(outcome_mean(spec, t_star[None, :], np.array([h_target]))[0])


def true_average_effect(spec: ModelSpec, t_star, mc_draws: int, rng: RngSeed) -> float:
    """Monte Carlo average of the conditional effect over the confounder marginal."""
    if mc_draws < 1:
        raise ValueError("mc_draws must be at least 1")
    t_star = np.asarray(t_star, dtype=float).reshape(-1)
    if t_star.shape[0] != spec.dim:
        raise DimensionMismatchError(
            f"t_star must have length {spec.dim}, got {t_star.shape[0]}"
        )
    gen = rng.generator()
    draws = gen.normal(0.0, spec.sigma, size=(mc_draws, spec.dim))
    h = confounder_for(spec).value_batch(draws)[:, 0]
    base = direct_term(spec, t_star[None, :])[0]
    if spec.family == "A":
        return float(base + np.mean(spec.alpha * h**2 + (1.0 + spec.alpha) * h))
    return float(base + spec.alpha * np.mean(h))


def analytic_constants(spec: ModelSpec, domain_radius: float | None = None) -> BoundConstants:
    """Closed-form bound constants on the ball of the given radius.

    The default radius 4 * sigma * sqrt(dim) covers essentially all of
    the sampling distribution's mass. Family A's effect is linear in the
    intervention, so its Hessian bound is zero; its confounder gradient
    norm is gamma everywhere. Family B's confounder gradient norm scales
    with the radius and its effect Hessian is diagonal with entries
    +-2/sqrt(dim).
    """
    if domain_radius is None:
        domain_radius = 4.0 * spec.sigma * np.sqrt(spec.dim)
    if domain_radius <= 0:
        raise ValueError("domain_radius must be positive")
    r = float(domain_radius)
    g, a = spec.gamma, spec.alpha
    if spec.family == "A":
        h_max = abs(g) * r
        return BoundConstants(
            l_z=2.0 * a * h_max + (1.0 + a),
            l_h=abs(g),
            sigma_h_phi=0.0,
            l_e=1.0 + abs(g) * (2.0 * a * h_max + 1.0 + a),
            domain_radius=r,
        )
    return BoundConstants(
        l_z=a,
        l_h=abs(g) * r,
        sigma_h_phi=2.0 / np.sqrt(spec.dim),
        l_e=2.0 * r / np.sqrt(spec.dim) + a * abs(g) * r,
        domain_radius=r,
    )
