"""Outcome models: degree-2 polynomial kernel ridge and L1-penalized logistic regression.

Both models are immutable after fitting and predict deterministically.
The kernel ridge dual system is solved by Cholesky factorization; the
logistic lasso is fit by proximal gradient with backtracking, which keeps
the penalized objective nonincreasing at every accepted iterate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .data_model import Dataset, RngSeed
from .errors import (
    DimensionMismatchError,
    EmptyDatasetError,
    FoldTooSmallError,
    NumericalFailureError,
)

__all__ = [
    "KernelRidgeModel",
    "LogisticLassoModel",
    "fit_krr",
    "fit_logistic_lasso",
    "cross_validate",
    "save_model",
    "load_model",
]

_DUAL_RESIDUAL_TOL = 1e-8


def _poly2_kernel(a: np.ndarray, b: np.ndarray, offset: float) -> np.ndarray:
    return (a @ b.T + offset) ** 2


@dataclass(frozen=True)
class KernelRidgeModel:
    """Degree-2 polynomial kernel ridge regression in dual form."""

    train_points: np.ndarray
    dual_coef: np.ndarray
    ridge: float
    kernel_offset: float = 1.0

    @property
    def dim(self) -> int:
        return self.train_points.shape[1]

    def predict_batch(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or points.shape[1] != self.dim:
            raise DimensionMismatchError(
                f"expected an (n, {self.dim}) array, got {points.shape}"
            )
        return _poly2_kernel(points, self.train_points, self.kernel_offset) @ self.dual_coef

    def predict(self, t) -> float:
        t = np.asarray(t, dtype=float).reshape(-1)
        return float(self.predict_batch(t[None, :])[0])


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass(frozen=True)
class LogisticLassoModel:
    """Linear logistic model with an L1-penalized weight vector."""

    weights: np.ndarray
    intercept: float
    l1_penalty: float
    objective_history: tuple[float, ...] = field(default=(), repr=False)

    @property
    def dim(self) -> int:
        return self.weights.shape[0]

    def predict_batch(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or points.shape[1] != self.dim:
            raise DimensionMismatchError(
                f"expected an (n, {self.dim}) array, got {points.shape}"
            )
        return _sigmoid(points @ self.weights + self.intercept)

    def predict(self, t) -> float:
        t = np.asarray(t, dtype=float).reshape(-1)
        return float(self.predict_batch(t[None, :])[0])


def fit_krr(data: Dataset, ridge: float, kernel_offset: float = 1.0) -> KernelRidgeModel:
    """Solve (K + ridge I) a = y with K the degree-2 polynomial kernel matrix.

    Raises NumericalFailureError if the regularized kernel matrix is not
    positive definite to factorization tolerance, or if the dual residual
    exceeds 1e-8 * ||y||.
    """
    if data.n < 1:
        raise EmptyDatasetError("kernel ridge needs at least one row")
    if data.outcomes is None:
        raise ValueError("dataset has no outcomes to fit")
    if ridge <= 0:
        raise ValueError("ridge must be positive")
    x = np.asarray(data.points)
    y = np.asarray(data.outcomes)
    k = _poly2_kernel(x, x, kernel_offset)
    system = k + ridge * np.eye(data.n)
    try:
        factor = cho_factor(system, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError(f"kernel system not SPD: {exc}") from exc
    dual = cho_solve(factor, y, check_finite=False)
    # iterative refinement: small ridges leave the system ill-conditioned
    # enough that one factored solve misses the residual tolerance
    y_norm = max(np.linalg.norm(y), 1e-300)
    residual = np.linalg.norm(res_vec := y - system @ dual)
    for _ in range(5):
        if residual <= _DUAL_RESIDUAL_TOL * y_norm:
            break
        dual = dual + cho_solve(factor, res_vec, check_finite=False)
        improved = np.linalg.norm(res_vec := y - system @ dual)
        if improved >= 0.5 * residual:  # stalled; more passes cannot help
            residual = improved
            break
        residual = improved
    if residual > _DUAL_RESIDUAL_TOL * y_norm:
        raise NumericalFailureError(
            f"dual solve residual {residual:.3e} exceeds tolerance"
        )
    return KernelRidgeModel(
        train_points=x.copy(), dual_coef=dual, ridge=float(ridge), kernel_offset=float(kernel_offset)
    )


def _logloss_terms(z: np.ndarray, y: np.ndarray) -> float:
    # mean of softplus(z) - y*z, numerically stable for large |z|
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def _soft_threshold(v: np.ndarray, t: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def fit_logistic_lasso(
    data: Dataset,
    l1_penalty: float,
    max_iter: int = 10_000,
    rel_tol: float = 1e-8,
    init: Optional[tuple[np.ndarray, float]] = None,
) -> LogisticLassoModel:
    """Minimize mean log-loss + l1_penalty * ||w||_1 (intercept unpenalized).

    Proximal gradient with backtracking: a candidate step is accepted only
    if it satisfies the quadratic upper-bound condition and does not
    increase the penalized objective, so the recorded objective history is
    monotone nonincreasing. Stops on relative objective change below
    ``rel_tol`` or after ``max_iter`` accepted iterations. ``init`` warm
    starts the solve, which speeds up penalty paths.
    """
    if data.outcomes is None:
        raise ValueError("dataset has no outcomes to fit")
    y = np.asarray(data.outcomes)
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ValueError("logistic lasso requires outcomes in {0, 1}")
    if l1_penalty < 0:
        raise ValueError("l1_penalty must be nonnegative")
    x = np.asarray(data.points)
    n, dim = x.shape

    if init is None:
        w = np.zeros(dim)
        ybar = min(max(float(y.mean()), 1e-12), 1.0 - 1e-12)
        b = float(np.log(ybar / (1.0 - ybar)))
    else:
        w = np.array(init[0], dtype=float).reshape(dim)
        b = float(init[1])

    step = 1.0
    z = x @ w + b
    f_cur = _logloss_terms(z, y)
    obj_cur = f_cur + l1_penalty * np.abs(w).sum()
    history = [obj_cur]
    for _ in range(max_iter):
        p = _sigmoid(z)
        grad_w = x.T @ (p - y) / n
        grad_b = float(np.mean(p - y))
        accepted = False
        for _ in range(80):
            w_new = _soft_threshold(w - step * grad_w, step * l1_penalty)
            b_new = b - step * grad_b
            dw = w_new - w
            db = b_new - b
            z_new = x @ w_new + b_new
            f_new = _logloss_terms(z_new, y)
            quad = (
                f_cur
                + grad_w @ dw
                + grad_b * db
                + (dw @ dw + db * db) / (2.0 * step)
            )
            obj_new = f_new + l1_penalty * np.abs(w_new).sum()
            if f_new <= quad and obj_new <= obj_cur:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        w, b, z, f_cur = w_new, float(b_new), z_new, f_new
        drop = obj_cur - obj_new
        obj_cur = obj_new
        history.append(obj_cur)
        if drop <= rel_tol * max(1.0, abs(obj_cur)):
            break
        step *= 1.25

    return LogisticLassoModel(
        weights=w,
        intercept=b,
        l1_penalty=float(l1_penalty),
        objective_history=tuple(history),
    )


def _fold_slices(n: int, folds: int, rng: RngSeed) -> list[np.ndarray]:
    if folds < 2:
        raise ValueError("folds must be at least 2")
    if n < folds:
        raise FoldTooSmallError(f"cannot split {n} rows into {folds} folds")
    order = rng.generator().permutation(n)
    return [np.sort(chunk) for chunk in np.array_split(order, folds)]


def _subset(data: Dataset, idx: np.ndarray) -> Dataset:
    cache = None if data.confounder_cache is None else data.confounder_cache[idx]
    return Dataset(points=data.points[idx], outcomes=data.outcomes[idx], confounder_cache=cache)


def cross_validate(
    data: Dataset,
    folds: int,
    grid: Sequence[float],
    kind: str,
    rng: RngSeed,
    kernel_offset: float = 1.0,
) -> tuple[float, list[float]]:
    """K-fold selection over a penalty grid; returns (chosen value, per-value mean loss).

    Validation loss is mean squared error for ``kind="krr"`` and mean
    log-loss for ``kind="lasso"``. Fold assignment is a pure function of
    the seed. Ties are broken toward the larger penalty.
    """
    if kind not in ("krr", "lasso"):
        raise ValueError("kind must be 'krr' or 'lasso'")
    if len(grid) == 0:
        raise ValueError("grid must be nonempty")
    fold_idx = _fold_slices(data.n, folds, rng)
    all_idx = np.arange(data.n)
    fold_loss: dict[tuple[int, float], float] = {}
    for fold, val in enumerate(fold_idx):
        train_mask = np.ones(data.n, dtype=bool)
        train_mask[val] = False
        train = _subset(data, all_idx[train_mask])
        if kind == "krr":
            for lam in grid:
                # a ridge the solver cannot meet tolerance for simply loses
                try:
                    model = fit_krr(train, ridge=lam, kernel_offset=kernel_offset)
                except NumericalFailureError:
                    fold_loss[(fold, lam)] = np.inf
                    continue
                pred = model.predict_batch(data.points[val])
                fold_loss[(fold, lam)] = float(np.mean((pred - data.outcomes[val]) ** 2))
        else:
            # warm start down the penalty path; strongest penalty first
            warm = None
            for lam in sorted(set(grid), reverse=True):
                model = fit_logistic_lasso(train, l1_penalty=lam, init=warm)
                warm = (model.weights, model.intercept)
                z = data.points[val] @ model.weights + model.intercept
                fold_loss[(fold, lam)] = _logloss_terms(z, data.outcomes[val])
    losses = [
        float(np.mean([fold_loss[(fold, lam)] for fold in range(folds)]))
        for lam in grid
    ]
    best_loss = min(losses)
    chosen = max(lam for lam, loss in zip(grid, losses) if loss == best_loss)
    return float(chosen), losses


def save_model(model, path) -> None:
    """Serialize a fitted model to JSON."""
    if isinstance(model, KernelRidgeModel):
        payload = {
            "kind": "kernel_ridge",
            "ridge": model.ridge,
            "kernel_offset": model.kernel_offset,
            "train_points": model.train_points.tolist(),
            "dual_coef": model.dual_coef.tolist(),
        }
    elif isinstance(model, LogisticLassoModel):
        payload = {
            "kind": "logistic_lasso",
            "l1_penalty": model.l1_penalty,
            "weights": model.weights.tolist(),
            "intercept": model.intercept,
        }
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    Path(path).write_text(json.dumps(payload) + "\n")


def load_model(path):
    payload = json.loads(Path(path).read_text())
    kind = payload.get("kind")
    if kind == "kernel_ridge":
        return KernelRidgeModel(
            train_points=np.asarray(payload["train_points"], dtype=float),
            dual_coef=np.asarray(payload["dual_coef"], dtype=float),
            ridge=float(payload["ridge"]),
            kernel_offset=float(payload["kernel_offset"]),
        )
    if kind == "logistic_lasso":
        return LogisticLassoModel(
            weights=np.asarray(payload["weights"], dtype=float),
            intercept=float(payload["intercept"]),
            l1_penalty=float(payload["l1_penalty"]),
        )
    raise ValueError(f"unknown model kind {kind!r}")
