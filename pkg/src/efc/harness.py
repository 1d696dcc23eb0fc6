"""Config-driven experiment sweeps with seeded replication and CSV output.

Each sweep cell simulates train and evaluation sets, fits the outcome
model with cross-validated ridge strength, builds evaluation queries, and
scores the surrogate-based estimator against the analytic conditional
effect alongside the confounded baseline. Results are plain CSV rows (one
per cell and seed) meant for external plotting; reruns of the same config
are byte-identical.

The four experiments differ only in how surrogates are solved:
``confounding_strength`` and ``positivity_sigma`` use the estimator's
default route (closed form for linear confounders); ``mismatch_delta``
interrupts lockstep integration at a target batch mean mismatch; and
``step_size`` forces per-query Euler at the step under study. The
genotype study has its own pipeline entry point and is not a sweep cell.

For the bilinear family the Euler step must shrink with the gradient
scale or integration is unstable; unless an explicit step is under study
the harness caps the step at ``stability_margin / (gamma^2 dim sigma^2)``.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import product
from pathlib import Path
from typing import Sequence

import numpy as np

from .causal_models import (
    DEFAULT_NOISE_SD,
    ModelSpec,
    confounder_for,
    sample,
    true_conditional_effect,
)
from .data_model import RngSeed, make_eval_queries
from .errors import MalformedFileError
from .estimators import baseline_conditional_effect
from .regression import cross_validate, fit_krr
from .surrogate_flow import (
    FlowConfig,
    FlowStatus,
    batch_solve_to_mismatch,
    closed_form_linear,
    euler_solve_batch,
)

__all__ = [
    "EXPERIMENTS",
    "RESULT_COLUMNS",
    "SweepConfig",
    "run_sweep",
    "write_results",
    "read_results",
    "summarize",
    "write_summary",
]

EXPERIMENTS = ("confounding_strength", "positivity_sigma", "mismatch_delta", "step_size")

RESULT_COLUMNS = [
    "experiment",
    "family",
    "gamma",
    "sigma",
    "alpha",
    "delta",
    "step_size",
    "seed",
    "rmse_lode",
    "rmse_baseline",
    "diverged_count",
    "mean_steps",
    "error",
]

_KEY_COLUMNS = RESULT_COLUMNS[:7]

_DEFAULT_RIDGE_GRID = (1e-6, 1e-4, 1e-2, 1.0, 1e2)


@dataclass(frozen=True)
class SweepConfig:
    """One experiment's grid, replication counts, and solver defaults.

    Grids default to single points so any subset of axes can be swept.
    ``step_grid`` entries are only consulted by the ``step_size``
    experiment; elsewhere the flow config (with the stability cap)
    governs integration.
    """

    experiment: str
    family: str = "A"
    gamma_grid: tuple[float, ...] = (1.0,)
    sigma_grid: tuple[float, ...] = (1.0,)
    alpha_grid: tuple[float, ...] = (1.0,)
    delta_grid: tuple[float, ...] = (0.0,)
    step_grid: tuple[float, ...] = (0.05,)
    n_train: int = 1000
    n_eval: int = 1000
    n_seeds: int = 10
    base_seed: int = 0
    dim: int = 20
    noise_sd: float = DEFAULT_NOISE_SD
    flow: FlowConfig = field(default_factory=FlowConfig)
    ridge_grid: tuple[float, ...] = _DEFAULT_RIDGE_GRID
    cv_folds: int = 5
    stability_margin: float = 0.25

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"experiment must be one of {EXPERIMENTS}")
        for grid in (self.gamma_grid, self.sigma_grid, self.alpha_grid,
                     self.delta_grid, self.step_grid, self.ridge_grid):
            if len(grid) == 0:
                raise ValueError("grids must be nonempty")
        if min(self.n_train, self.n_eval, self.n_seeds) < 1:
            raise ValueError("counts must be positive")

    def cells(self) -> list[tuple[float, float, float, float, float]]:
        return list(
            product(self.gamma_grid, self.sigma_grid, self.alpha_grid,
                    self.delta_grid, self.step_grid)
        )


def _stable_step(cfg: SweepConfig, spec: ModelSpec) -> float:
    if spec.family == "A":
        limit = cfg.stability_margin / max(spec.gamma**2, 1e-12)
    else:
        limit = cfg.stability_margin / max(spec.gamma**2 * spec.dim * spec.sigma**2, 1e-12)
    return min(cfg.flow.step_size, limit)


def _run_cell(cfg: SweepConfig, cell, seed_index: int, stream_base: int) -> dict:
    gamma, sigma, alpha, delta, step = cell
    row = {
        "experiment": cfg.experiment,
        "family": cfg.family,
        "gamma": gamma,
        "sigma": sigma,
        "alpha": alpha,
        "delta": delta,
        "step_size": step,
        "seed": seed_index,
        "rmse_lode": math.nan,
        "rmse_baseline": math.nan,
        "diverged_count": 0,
        "mean_steps": math.nan,
        "error": "",
    }
    try:
        spec = ModelSpec(
            family=cfg.family, dim=cfg.dim, gamma=gamma, alpha=alpha,
            sigma=sigma, noise_sd=cfg.noise_sd,
        )
        conf = confounder_for(spec)
        train = sample(spec, cfg.n_train, RngSeed(cfg.base_seed, stream_base))
        evalset = sample(spec, cfg.n_eval, RngSeed(cfg.base_seed, stream_base + 1))
        queries = make_eval_queries(evalset, conf, RngSeed(cfg.base_seed, stream_base + 2))

        ridge, _ = cross_validate(
            train, cfg.cv_folds, cfg.ridge_grid, kind="krr",
            rng=RngSeed(cfg.base_seed, stream_base + 3),
        )
        model = fit_krr(train, ridge=ridge)

        if cfg.experiment == "mismatch_delta":
            flow = replace(cfg.flow, step_size=_stable_step(cfg, spec))
            results = batch_solve_to_mismatch(conf, queries, delta, flow)
        elif cfg.experiment == "step_size":
            flow = replace(cfg.flow, step_size=step)
            results = euler_solve_batch(conf, queries, flow)
        elif conf.is_linear:
            results = [closed_form_linear(conf, q) for q in queries]
        else:
            flow = replace(cfg.flow, step_size=_stable_step(cfg, spec))
            results = euler_solve_batch(conf, queries, flow)

        truth = np.array(
            [true_conditional_effect(spec, q.t_star, float(q.h_target[0])) for q in queries]
        )
        ok = np.array([r.status is not FlowStatus.DIVERGED for r in results])
        row["diverged_count"] = int((~ok).sum())
        row["mean_steps"] = float(np.mean([r.steps_taken for r in results]))
        baseline = np.array([baseline_conditional_effect(model, q).value for q in queries])
        row["rmse_baseline"] = float(np.sqrt(np.mean((baseline - truth) ** 2)))
        if ok.any():
            t_hats = np.stack([r.t_hat for r in results])[ok]
            lode = model.predict_batch(t_hats)
            row["rmse_lode"] = float(np.sqrt(np.mean((lode - truth[ok]) ** 2)))
    except Exception as exc:  # cell failures land in the error column
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def run_sweep(cfg: SweepConfig, threads: int = 1) -> list[dict]:
    """Execute every grid cell for every seed; rows come back in grid order."""
    cells = cfg.cells()
    tasks = []
    for cell_idx, cell in enumerate(cells):
        for seed_index in range(cfg.n_seeds):
            flat = cell_idx * cfg.n_seeds + seed_index
            tasks.append((cell, seed_index, flat * 4))
    if threads <= 1:
        return [_run_cell(cfg, cell, seed, base) for cell, seed, base in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(_run_cell, cfg, cell, seed, base) for cell, seed, base in tasks]
        return [f.result() for f in futures]


def _format_value(key: str, value) -> str:
    if key in ("experiment", "family", "error"):
        return str(value)
    if key in ("seed", "diverged_count"):
        return str(int(value))
    return "%.17g" % float(value)


def write_results(rows: Sequence[dict], path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_COLUMNS)
        for row in rows:
            writer.writerow([_format_value(k, row[k]) for k in RESULT_COLUMNS])


def read_results(path) -> list[dict]:
    path = Path(path)
    with path.open("r", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedFileError(f"{path} is empty") from None
        if header != RESULT_COLUMNS:
            raise MalformedFileError(f"{path}: unexpected header {header!r}")
        rows = []
        for lineno, raw in enumerate(reader, start=2):
            if not raw:
                continue
            if len(raw) != len(RESULT_COLUMNS):
                raise MalformedFileError(f"{path}:{lineno}: ragged row")
            row = dict(zip(RESULT_COLUMNS, raw))
            try:
                for key in ("gamma", "sigma", "alpha", "delta", "step_size",
                            "rmse_lode", "rmse_baseline", "mean_steps"):
                    row[key] = float(row[key])
                row["seed"] = int(row["seed"])
                row["diverged_count"] = int(row["diverged_count"])
            except ValueError:
                raise MalformedFileError(f"{path}:{lineno}: non-numeric cell") from None
            rows.append(row)
    return rows


SUMMARY_COLUMNS = _KEY_COLUMNS + [
    "n_seeds",
    "rmse_lode_mean",
    "rmse_lode_sd",
    "rmse_baseline_mean",
    "rmse_baseline_sd",
    "diverged_mean",
    "mean_steps_mean",
]


def summarize(rows: Sequence[dict]) -> list[dict]:
    """Per-cell mean and sample standard deviation (n-1 denominator) across seeds.

    Rows carrying an error are excluded. Output order follows the sorted
    cell key, so it does not depend on input row order. With a single
    seed the sd fields are NaN.
    """
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        if row.get("error"):
            continue
        key = tuple(row[k] for k in _KEY_COLUMNS)
        groups.setdefault(key, []).append(row)
    out = []
    for key in sorted(groups, key=lambda k: tuple(str(v) for v in k[:2]) + k[2:]):
        members = groups[key]
        lode = np.array([m["rmse_lode"] for m in members], dtype=float)
        base = np.array([m["rmse_baseline"] for m in members], dtype=float)
        entry = dict(zip(_KEY_COLUMNS, key))
        entry.update(
            n_seeds=len(members),
            rmse_lode_mean=float(np.mean(lode)),
            rmse_lode_sd=float(np.std(lode, ddof=1)) if len(members) > 1 else math.nan,
            rmse_baseline_mean=float(np.mean(base)),
            rmse_baseline_sd=float(np.std(base, ddof=1)) if len(members) > 1 else math.nan,
            diverged_mean=float(np.mean([m["diverged_count"] for m in members])),
            mean_steps_mean=float(np.mean([m["mean_steps"] for m in members])),
        )
        out.append(entry)
    return out


def write_summary(rows: Sequence[dict], path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for row in rows:
            formatted = []
            for key in SUMMARY_COLUMNS:
                if key in ("experiment", "family"):
                    formatted.append(str(row[key]))
                elif key == "n_seeds":
                    formatted.append(str(int(row[key])))
                else:
                    formatted.append("%.17g" % float(row[key]))
            writer.writerow(formatted)
