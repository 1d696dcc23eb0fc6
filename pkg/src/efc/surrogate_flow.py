"""Surrogate interventions by descending the squared confounder mismatch.

Given a query (t_star, h_target), the solver integrates

    d t(s) / ds = -grad_t || h(t(s)) - h_target ||^2

with fixed-step Euler updates, starting at t_star, until the mismatch has
shrunk below a relative tolerance. For linear confounders the limit has a
closed form (the orthogonal projection onto the target level set) which is
used instead of integration. A lockstep batch variant stops on the batch
mean mismatch, which is how deliberately interrupted (mismatched)
surrogates are produced.

Fixed-step Euler is deliberate: adaptive or accelerated schemes may reach
a different point of a nonconvex level set, which would change the
estimand.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .confounders import FunctionalConfounder
from .data_model import InterventionQuery
from .errors import NonFiniteError, SingularProjectionError

__all__ = [
    "FlowConfig",
    "FlowStatus",
    "SurrogateResult",
    "euler_solve",
    "euler_solve_batch",
    "batch_solve_to_mismatch",
    "closed_form_linear",
    "dump_trajectory",
]


class FlowStatus(enum.Enum):
    CONVERGED = "converged"
    MAX_STEPS_REACHED = "max_steps_reached"
    DIVERGED = "diverged"


@dataclass(frozen=True)
class FlowConfig:
    """Integration controls for the mismatch descent.

    ``rel_tolerance`` is relative to the mismatch at initialization;
    ``divergence_factor`` times the initial mismatch flags a runaway
    trajectory as diverged instead of looping until the step cap.
    """

    step_size: float = 0.05
    rel_tolerance: float = 1e-4
    max_steps: int = 100_000
    divergence_factor: float = 1e6
    record_trajectory: bool = False

    def __post_init__(self):
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if not (0 < self.rel_tolerance < 1):
            raise ValueError("rel_tolerance must lie in (0, 1)")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        if self.divergence_factor <= 1:
            raise ValueError("divergence_factor must exceed 1")


@dataclass(frozen=True)
class SurrogateResult:
    """Outcome of one surrogate search.

    ``max_mismatch`` is the largest squared mismatch over all iterates
    (including the initial point), which the error-bound diagnostics
    consume. ``trajectory`` holds every iterate when recording was
    requested.
    """

    t_hat: np.ndarray
    steps_taken: int
    final_mismatch: float
    initial_mismatch: float
    max_mismatch: float
    status: FlowStatus
    trajectory: Optional[list[np.ndarray]] = None


def _as_matrix(queries: Sequence[InterventionQuery]) -> tuple[np.ndarray, np.ndarray]:
    t_stars = np.stack([q.t_star for q in queries])
    h_targets = np.stack([q.h_target for q in queries])
    return t_stars, h_targets


def _integrate(
    conf: FunctionalConfounder,
    t_stars: np.ndarray,
    h_targets: np.ndarray,
    cfg: FlowConfig,
    batch_delta: Optional[float],
) -> list[SurrogateResult]:
    """Shared Euler engine.

    With ``batch_delta`` None every query stops on its own relative
    criterion. Otherwise all queries advance in lockstep and stop
    together once the batch mean mismatch (over non-diverged queries)
    first reaches max(batch_delta**2, rel_tolerance * initial mean);
    every result then reports the shared step count.
    """
    n, _ = t_stars.shape
    if h_targets.shape != (n, conf.output_dim):
        raise ValueError("h_targets shape does not match confounder output")
    x = np.array(t_stars, dtype=float)
    resid = conf.value_batch(x) - h_targets
    m0 = np.sum(resid * resid, axis=1)
    m = m0.copy()
    max_m = m0.copy()
    per_query = batch_delta is None
    # status codes: 0 active, 1 converged, 2 diverged, 3 step-capped
    status = np.zeros(n, dtype=int)
    steps = np.zeros(n, dtype=int)
    if per_query:
        status[m0 <= 0.0] = 1
    trajectory = [x.copy()] if cfg.record_trajectory else None

    if per_query:
        stop_now = not np.any(status == 0)
    else:
        threshold = max(batch_delta**2, cfg.rel_tolerance * float(np.mean(m0)))
        stop_now = float(np.mean(m0)) <= threshold

    k = 0
    while not stop_now and k < cfg.max_steps:
        k += 1
        active = status == 0
        xa = x[active]
        jac = conf.grad_batch(xa)
        xa = xa - 2.0 * cfg.step_size * np.einsum("ntd,nd->nt", jac, resid[active])
        if not np.all(np.isfinite(xa)):
            raise NonFiniteError("Euler iterate became non-finite")
        x[active] = xa
        resid_a = conf.value_batch(xa) - h_targets[active]
        resid[active] = resid_a
        m[active] = np.sum(resid_a * resid_a, axis=1)
        max_m[active] = np.maximum(max_m[active], m[active])
        if trajectory is not None:
            trajectory.append(x.copy())

        diverged = active & (m > cfg.divergence_factor * m0) & (m0 > 0)
        status[diverged] = 2
        steps[diverged] = k
        if per_query:
            converged = (status == 0) & (m <= cfg.rel_tolerance * m0)
            status[converged] = 1
            steps[converged] = k
            stop_now = not np.any(status == 0)
        else:
            steps[status == 0] = k
            alive = status != 2
            stop_now = not np.any(alive) or float(np.mean(m[alive])) <= threshold

    if per_query:
        status[status == 0] = 3
        steps[status == 3] = k
    else:
        # Interrupted queries that happen to meet their own criterion are
        # converged; the rest stopped early, which the step-cap status records.
        # Every result reports the shared step count, diverged ones included.
        own = m <= cfg.rel_tolerance * m0
        status[(status == 0) & own] = 1
        status[status == 0] = 3
        steps[:] = k

    code_map = {1: FlowStatus.CONVERGED, 2: FlowStatus.DIVERGED, 3: FlowStatus.MAX_STEPS_REACHED}
    results = []
    for i in range(n):
        traj_i = None
        if trajectory is not None:
            traj_i = [snap[i].copy() for snap in trajectory[: steps[i] + 1]]
        results.append(
            SurrogateResult(
                t_hat=x[i].copy(),
                steps_taken=int(steps[i]),
                final_mismatch=float(m[i]),
                initial_mismatch=float(m0[i]),
                max_mismatch=float(max_m[i]),
                status=code_map[int(status[i])],
                trajectory=traj_i,
            )
        )
    return results


def euler_solve(
    conf: FunctionalConfounder, query: InterventionQuery, cfg: FlowConfig = FlowConfig()
) -> SurrogateResult:
    """Integrate one query until its mismatch falls below the relative tolerance.

    A query already on the target level set returns immediately with zero
    steps. Divergence and hitting the step cap are reported as statuses;
    only a non-finite iterate raises.
    """
    t_stars, h_targets = _as_matrix([query])
    return _integrate(conf, t_stars, h_targets, cfg, batch_delta=None)[0]


def euler_solve_batch(
    conf: FunctionalConfounder,
    queries: Sequence[InterventionQuery],
    cfg: FlowConfig = FlowConfig(),
) -> list[SurrogateResult]:
    """Vectorized per-query solves; results match looping :func:`euler_solve`."""
    if len(queries) == 0:
        return []
    t_stars, h_targets = _as_matrix(queries)
    return _integrate(conf, t_stars, h_targets, cfg, batch_delta=None)


def batch_solve_to_mismatch(
    conf: FunctionalConfounder,
    queries: Sequence[InterventionQuery],
    delta: float,
    cfg: FlowConfig = FlowConfig(),
) -> list[SurrogateResult]:
    """Lockstep integration stopped when the batch mean mismatch reaches delta**2.

    All results carry the same step count. With delta = 0 the stopping
    rule reduces to the relative tolerance on the batch mean.
    """
    if len(queries) == 0:
        raise ValueError("queries must be nonempty")
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    t_stars, h_targets = _as_matrix(queries)
    return _integrate(conf, t_stars, h_targets, cfg, batch_delta=float(delta))


_COND_LIMIT = 1e12


def closed_form_linear(
    conf: FunctionalConfounder, query: InterventionQuery
) -> SurrogateResult:
    """Exact flow limit for linear confounders: project onto the target level set.

    t' = t* - W (W^T W)^{-1} (h(t*) - h_target), reported with zero steps.
    A query already on the level set short-circuits to t* before any
    factorization, so a rank-deficient W only fails when the projection is
    actually needed.
    """
    if not conf.is_linear:
        raise TypeError("closed-form surrogates require a linear confounder")
    t_star = np.asarray(query.t_star, dtype=float)
    resid = conf.value(t_star) - query.h_target
    m0 = float(resid @ resid)
    if m0 == 0.0:
        return SurrogateResult(
            t_hat=t_star.copy(),
            steps_taken=0,
            final_mismatch=0.0,
            initial_mismatch=0.0,
            max_mismatch=0.0,
            status=FlowStatus.CONVERGED,
            trajectory=None,
        )
    w = conf.weight_matrix()
    gram = w.T @ w
    sing = np.linalg.svd(gram, compute_uv=False)
    if sing[0] == 0.0 or sing[-1] == 0.0 or sing[0] / sing[-1] > _COND_LIMIT:
        raise SingularProjectionError(
            "confounder weight matrix is numerically rank-deficient"
        )
    t_hat = t_star - w @ np.linalg.solve(gram, resid)
    final_resid = conf.value(t_hat) - query.h_target
    final = float(final_resid @ final_resid)
    return SurrogateResult(
        t_hat=t_hat,
        steps_taken=0,
        final_mismatch=final,
        initial_mismatch=m0,
        max_mismatch=max(m0, final),
        status=FlowStatus.CONVERGED,
        trajectory=None,
    )


def dump_trajectory(result: SurrogateResult, conf: FunctionalConfounder, h_target, path) -> None:
    """Write a recorded trajectory as CSV (step, coordinates, mismatch) for inspection."""
    if result.trajectory is None:
        raise ValueError("result carries no trajectory; rerun with record_trajectory")
    h_target = np.asarray(h_target, dtype=float).reshape(-1)
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        dim = result.trajectory[0].shape[0]
        writer.writerow(["step"] + [f"t_{i}" for i in range(dim)] + ["mismatch"])
        for k, point in enumerate(result.trajectory):
            resid = conf.value(point) - h_target
            writer.writerow(
                [k] + ["%.17g" % v for v in point] + ["%.17g" % float(resid @ resid)]
            )
