"""Functional confounders: scalar or vector fields h(t) with analytic gradients.

Three concrete families are provided. ``LinearSum`` and ``LinearMap`` are
linear (constant Jacobian), ``PairwiseBilinear`` is quadratic. All are
immutable and safe to share across threads.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DimensionMismatchError

__all__ = [
    "FunctionalConfounder",
    "LinearSum",
    "PairwiseBilinear",
    "LinearMap",
    "check_grad",
    "save_linear_map",
    "load_linear_map",
]


class FunctionalConfounder:
    """Interface shared by all confounder families.

    ``value(t)`` returns the confounder as a length-``output_dim`` vector,
    ``grad(t)`` the (dim, output_dim) Jacobian. Batched variants operate on
    row-stacked inputs and must agree elementwise with the single-point ones.
    """

    dim: int
    output_dim: int
    is_linear: bool = False

    def _check(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float).reshape(-1)
        if t.shape[0] != self.dim:
            raise DimensionMismatchError(
                f"expected a length-{self.dim} vector, got length {t.shape[0]}"
            )
        return t

    def _check_batch(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or points.shape[1] != self.dim:
            raise DimensionMismatchError(
                f"expected an (n, {self.dim}) array, got shape {points.shape}"
            )
        return points

    def value(self, t) -> np.ndarray:
        raise NotImplementedError

    def grad(self, t) -> np.ndarray:
        raise NotImplementedError

    def value_batch(self, points) -> np.ndarray:
        points = self._check_batch(points)
        return np.stack([self.value(p) for p in points]) if len(points) else np.zeros((0, self.output_dim))

    def grad_batch(self, points) -> np.ndarray:
        points = self._check_batch(points)
        return np.stack([self.grad(p) for p in points]) if len(points) else np.zeros((0, self.dim, self.output_dim))


@dataclass(frozen=True)
class LinearSum(FunctionalConfounder):
    """h(t) = gamma * sum_i t_i / sqrt(T); scalar output."""

    gamma: float
    dim: int
    output_dim: int = 1
    is_linear: bool = True

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("LinearSum requires dim >= 2")
        if not np.isfinite(self.gamma):
            raise ValueError("gamma must be finite")

    def value(self, t) -> np.ndarray:
        t = self._check(t)
        return np.array([self.gamma * t.sum() / np.sqrt(self.dim)])

    def grad(self, t) -> np.ndarray:
        self._check(t)
        return np.full((self.dim, 1), self.gamma / np.sqrt(self.dim))

    def value_batch(self, points) -> np.ndarray:
        points = self._check_batch(points)
        return (self.gamma * points.sum(axis=1) / np.sqrt(self.dim))[:, None]

    def grad_batch(self, points) -> np.ndarray:
        points = self._check_batch(points)
        return np.full((points.shape[0], self.dim, 1), self.gamma / np.sqrt(self.dim))

    def weight_matrix(self) -> np.ndarray:
        return np.full((self.dim, 1), self.gamma / np.sqrt(self.dim))

    def offset_vector(self) -> np.ndarray:
        return np.zeros(self.dim)


@dataclass(frozen=True)
class PairwiseBilinear(FunctionalConfounder):
    """h(t) = gamma * sum over even i of t_i * t_{i+1}; scalar output, dim even."""

    gamma: float
    dim: int
    output_dim: int = 1
    is_linear: bool = False

    def __post_init__(self):
        if self.dim < 2 or self.dim % 2 != 0:
            raise ValueError("PairwiseBilinear requires an even dim >= 2")
        if not np.isfinite(self.gamma):
            raise ValueError("gamma must be finite")

    def value(self, t) -> np.ndarray:
        t = self._check(t)
        return np.array([self.gamma * np.sum(t[0::2] * t[1::2])])

    def grad(self, t) -> np.ndarray:
        t = self._check(t)
        g = np.empty(self.dim)
        g[0::2] = self.gamma * t[1::2]
        g[1::2] = self.gamma * t[0::2]
        return g[:, None]

    def value_batch(self, points) -> np.ndarray:
        points = self._check_batch(points)
        return (self.gamma * np.sum(points[:, 0::2] * points[:, 1::2], axis=1))[:, None]

    def grad_batch(self, points) -> np.ndarray:
        points = self._check_batch(points)
        g = np.empty_like(points)
        g[:, 0::2] = self.gamma * points[:, 1::2]
        g[:, 1::2] = self.gamma * points[:, 0::2]
        return g[:, :, None]


@dataclass(frozen=True)
class LinearMap(FunctionalConfounder):
    """h(t) = W^T (t - offset) for a (dim, d) weight matrix W.

    The optional offset supports confounders defined on shifted
    coordinates (for instance column-centered genotype matrices); the
    Jacobian is W regardless.
    """

    weights: np.ndarray
    offset: Optional[np.ndarray] = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 2:
            raise ValueError("weights must be a (dim, d) matrix")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        w = w.copy()
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)
        if self.offset is not None:
            off = np.asarray(self.offset, dtype=float).reshape(-1)
            if off.shape[0] != w.shape[0]:
                raise ValueError("offset length must match weight rows")
            if not np.all(np.isfinite(off)):
                raise ValueError("offset must be finite")
            off = off.copy()
            off.flags.writeable = False
            object.__setattr__(self, "offset", off)

    @property
    def dim(self) -> int:
        return self.weights.shape[0]

    @property
    def output_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def is_linear(self) -> bool:
        return True

    def value(self, t) -> np.ndarray:
        t = self._check(t)
        if self.offset is not None:
            t = t - self.offset
        return self.weights.T @ t

    def grad(self, t) -> np.ndarray:
        self._check(t)
        return self.weights

    def value_batch(self, points) -> np.ndarray:
        points = self._check_batch(points)
        if self.offset is not None:
            points = points - self.offset
        return points @ self.weights

    def grad_batch(self, points) -> np.ndarray:
        points = self._check_batch(points)
        return np.broadcast_to(
            self.weights, (points.shape[0],) + self.weights.shape
        )

    def weight_matrix(self) -> np.ndarray:
        return np.asarray(self.weights)

    def offset_vector(self) -> np.ndarray:
        return np.zeros(self.dim) if self.offset is None else np.asarray(self.offset)


def check_grad(conf: FunctionalConfounder, t, eps: float = 1e-5) -> float:
    """Max relative residual between the analytic Jacobian and central differences."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    t = np.asarray(t, dtype=float).reshape(-1)
    analytic = conf.grad(t)
    numeric = np.empty_like(analytic)
    for i in range(conf.dim):
        step = np.zeros_like(t)
        step[i] = eps
        numeric[i, :] = (conf.value(t + step) - conf.value(t - step)) / (2 * eps)
    return float(np.max(np.abs(analytic - numeric) / (1.0 + np.abs(analytic))))


def save_linear_map(conf: LinearMap, path) -> None:
    """Write the weight matrix as CSV, one row per input coordinate."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        for row in conf.weights:
            writer.writerow(["%.17g" % v for v in row])


def load_linear_map(path) -> LinearMap:
    with Path(path).open("r", newline="") as fh:
        rows = [[float(cell) for cell in row] for row in csv.reader(fh) if row]
    return LinearMap(weights=np.asarray(rows, dtype=float))
