"""Core data containers, seeded randomness, and dataset file I/O.

Everything here is immutable after construction: arrays are marked
read-only so containers can be shared freely across threads.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import EmptyDatasetError, EmptyFileError, MalformedFileError

__all__ = [
    "RngSeed",
    "Dataset",
    "InterventionQuery",
    "load_dataset",
    "save_dataset",
    "write_metadata",
    "make_eval_queries",
]


@dataclass(frozen=True)
class RngSeed:
    """A (seed, stream_id) pair that fully determines every random draw.

    Identical pairs reproduce identical draws regardless of scheduling,
    so per-task substreams are made by handing each task its own
    ``stream_id`` under a shared ``seed``.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        if self.seed < 0 or self.stream_id < 0:
            raise ValueError("seed and stream_id must be nonnegative")

    def generator(self) -> np.random.Generator:
        """Fresh generator; repeated calls restart the identical stream."""
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        return np.random.default_rng(seq)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Dataset:
    """Rows of pre-outcome vectors with outcomes and optional cached confounder values.

    Attributes
    ----------
    points : (n, dim) array
        One pre-outcome vector per row.
    outcomes : (n,) array or None
        Real-valued for regression targets, {0, 1} for binary ones.
    confounder_cache : (n, d) array or None
        Confounder values evaluated at each row, if already computed.
    """

    points: np.ndarray
    outcomes: Optional[np.ndarray] = None
    confounder_cache: Optional[np.ndarray] = None

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        if points.ndim != 2:
            raise ValueError("points must be a 2-d array")
        if not np.all(np.isfinite(points)):
            raise ValueError("points contain non-finite entries")
        object.__setattr__(self, "points", _readonly(points))
        if self.outcomes is not None:
            y = np.asarray(self.outcomes, dtype=float).reshape(-1)
            if y.shape[0] != points.shape[0]:
                raise ValueError("outcomes length must match point rows")
            if not np.all(np.isfinite(y)):
                raise ValueError("outcomes contain non-finite entries")
            object.__setattr__(self, "outcomes", _readonly(y))
        if self.confounder_cache is not None:
            cache = np.asarray(self.confounder_cache, dtype=float)
            if cache.ndim == 1:
                cache = cache.reshape(-1, 1)
            if cache.shape[0] != points.shape[0]:
                raise ValueError("confounder_cache rows must match point rows")
            if not np.all(np.isfinite(cache)):
                raise ValueError("confounder_cache contains non-finite entries")
            object.__setattr__(self, "confounder_cache", _readonly(cache))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class InterventionQuery:
    """A conditional-effect query: intervene at ``t_star`` holding the confounder at ``h_target``."""

    t_star: np.ndarray
    h_target: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t_star, dtype=float).reshape(-1)
        h = np.asarray(self.h_target, dtype=float).reshape(-1)
        if not np.all(np.isfinite(t)) or not np.all(np.isfinite(h)):
            raise ValueError("query vectors must be finite")
        object.__setattr__(self, "t_star", _readonly(t))
        object.__setattr__(self, "h_target", _readonly(h))

    @property
    def dim(self) -> int:
        return self.t_star.shape[0]


# 17 significant digits round-trips any finite double exactly.
_FLOAT_FMT = "%.17g"


def _expected_header(dim: int, has_outcome: bool) -> list[str]:
    names = [f"t_{i}" for i in range(dim)]
    if has_outcome:
        names.append("y")
    return names


def save_dataset(data: Dataset, path) -> None:
    """Write a dataset as CSV with header ``t_0,...,t_{T-1}[,y]``."""
    path = Path(path)
    has_outcome = data.outcomes is not None
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_expected_header(data.dim, has_outcome))
        for i in range(data.n):
            row = [_FLOAT_FMT % v for v in data.points[i]]
            if has_outcome:
                row.append(_FLOAT_FMT % data.outcomes[i])
            writer.writerow(row)


def load_dataset(path, has_outcome: bool = True) -> Dataset:
    """Parse a dataset CSV written by :func:`save_dataset`.

    Raises
    ------
    EmptyFileError
        If the file has no header row.
    MalformedFileError
        On a wrong header, ragged rows, or non-numeric cells.
    """
    path = Path(path)
    with path.open("r", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFileError(f"{path} is empty") from None
        header = [name.strip() for name in header]
        dim = len(header) - 1 if has_outcome else len(header)
        if dim < 1 or header != _expected_header(dim, has_outcome):
            raise MalformedFileError(f"{path}: unexpected header {header!r}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise MalformedFileError(f"{path}:{lineno}: ragged row")
            try:
                rows.append([float(cell) for cell in row])
            except ValueError:
                raise MalformedFileError(
                    f"{path}:{lineno}: non-numeric cell"
                ) from None
    values = np.asarray(rows, dtype=float).reshape(len(rows), len(header))
    if has_outcome:
        return Dataset(points=values[:, :-1], outcomes=values[:, -1])
    return Dataset(points=values)


def write_metadata(path, dim: int, model: Optional[dict] = None, seed: Optional[int] = None) -> None:
    """Emit the sidecar JSON describing a generated dataset."""
    payload = {"dim": dim, "model": model, "seed": seed}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def _random_derangement(n: int, gen: np.random.Generator) -> np.ndarray:
    """Uniform permutation with no fixed point (identity when n == 1)."""
    if n == 1:
        return np.zeros(1, dtype=int)
    idx = np.arange(n)
    while True:
        perm = gen.permutation(n)
        if not np.any(perm == idx):
            return perm


def make_eval_queries(dataset: Dataset, conf, rng: RngSeed) -> list[InterventionQuery]:
    """One query per row: the row's own point paired with another row's confounder value.

    Row ``i`` is paired with ``h(points[pi(i)])`` for a uniformly random
    fixed-point-free permutation ``pi``, so targets are drawn from the
    marginal distribution of the confounder while generically differing
    from ``h(t_star)``.
    """
    if dataset.n == 0:
        raise EmptyDatasetError("cannot build queries from an empty dataset")
    gen = rng.generator()
    perm = _random_derangement(dataset.n, gen)
    h_values = conf.value_batch(dataset.points)
    return [
        InterventionQuery(t_star=dataset.points[i], h_target=h_values[perm[i]])
        for i in range(dataset.n)
    ]
