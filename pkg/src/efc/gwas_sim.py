"""Synthetic genotype data with planted population-structure confounding.

Genotypes follow a two-level allele-frequency model: ancestral
frequencies are drawn uniformly, per-population ones from a Beta whose
concentration is set by the fixation index, and each individual's dosage
is the mean of two Bernoulli alleles, giving entries in {0, 0.5, 1}. The
binary phenotype mixes a sparse set of causal variants with a population
effect, so naive coefficient rankings pick up structure-proxy variants.

The population-structure confounder is the top-K truncated SVD of the
column-normalized genotype matrix, folded back into raw genotype
coordinates so interventions on single variants stay well-defined.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .confounders import LinearMap
from .data_model import Dataset, RngSeed
from .errors import MalformedFileError, SvdFailureError
from .estimators import SnpEffect, gwas_snp_effect
from .regression import cross_validate, fit_logistic_lasso
from .surrogate_flow import FlowConfig

__all__ = [
    "GenotypeData",
    "PcaConfounder",
    "GwasConfig",
    "SnpRanking",
    "generate_genotypes",
    "build_pca_confounder",
    "run_gwas_pipeline",
    "save_genotypes",
    "load_genotypes",
]

_VALID_DOSAGES = (0.0, 0.5, 1.0)


@dataclass(frozen=True)
class GenotypeData:
    """Genotype dosage matrix with phenotype and synthetic ground truth."""

    genotypes: np.ndarray
    phenotype: np.ndarray
    pop_labels: np.ndarray
    causal_snps: dict[int, float]
    allele_freqs: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.genotypes, dtype=float)
        if g.ndim != 2:
            raise ValueError("genotypes must be a 2-d matrix")
        if not np.all(np.isin(g, _VALID_DOSAGES)):
            raise ValueError("genotype entries must be 0, 0.5, or 1")
        y = np.asarray(self.phenotype, dtype=float).reshape(-1)
        if y.shape[0] != g.shape[0] or not np.all((y == 0) | (y == 1)):
            raise ValueError("phenotype must be binary with one entry per row")
        p = np.asarray(self.allele_freqs, dtype=float).reshape(-1)
        if p.shape[0] != g.shape[1] or np.any(p <= 0) or np.any(p >= 1):
            raise ValueError("allele_freqs must lie strictly in (0, 1), one per column")
        if any(not 0 <= i < g.shape[1] for i in self.causal_snps):
            raise ValueError("causal indices out of range")
        object.__setattr__(self, "genotypes", g)
        object.__setattr__(self, "phenotype", y)
        object.__setattr__(self, "pop_labels", np.asarray(self.pop_labels, dtype=int))
        object.__setattr__(self, "allele_freqs", p)

    @property
    def n(self) -> int:
        return self.genotypes.shape[0]

    @property
    def n_snps(self) -> int:
        return self.genotypes.shape[1]


@dataclass(frozen=True)
class PcaConfounder:
    """Top-K population-structure axes as a linear confounder on raw genotypes.

    ``confounder`` maps a raw dosage vector t to Sigma V^T applied to the
    column-normalized coordinates, i.e. h(t) = W^T (t - column_means)
    with W rows rescaled by the per-column normalization. Dropped
    (monomorphic) columns get zero weight rows and are listed in
    ``dropped_columns``.
    """

    confounder: LinearMap
    singular_values: np.ndarray
    n_components: int
    dropped_columns: tuple[int, ...] = ()


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-np.clip(z, -60, 60)))


def generate_genotypes(
    n: int,
    n_snps: int,
    n_pops: int = 2,
    fst: float = 0.2,
    n_causal: int = 0,
    effect_size: float = 1.0,
    pop_effect: float = 0.0,
    rng: RngSeed = RngSeed(0),
    prevalence: float = 1.0 / 3.0,
) -> GenotypeData:
    """Draw a genotype matrix with population structure and a planted phenotype signal.

    Ancestral frequencies are Uniform(0.05, 0.95); population frequencies
    are Beta(p(1-F)/F, (1-p)(1-F)/F), so F near 0 collapses onto the
    ancestral values and large F separates populations. The phenotype
    logit is a sparse causal sum plus ``pop_effect`` times the centered
    population score, with an intercept solved so the expected prevalence
    matches ``prevalence``.
    """
    if n_pops < 2:
        raise ValueError("n_pops must be at least 2")
    if not 0 < fst < 1:
        raise ValueError("fst must lie in (0, 1)")
    if n_causal < 0 or n_causal > n_snps:
        raise ValueError("n_causal out of range")
    gen = rng.generator()
    ancestral = gen.uniform(0.05, 0.95, size=n_snps)
    conc = (1.0 - fst) / fst
    pop_freqs = gen.beta(ancestral * conc, (1.0 - ancestral) * conc, size=(n_pops, n_snps))
    pop_freqs = np.clip(pop_freqs, 1e-6, 1.0 - 1e-6)
    pops = gen.integers(0, n_pops, size=n)
    freq_rows = pop_freqs[pops]
    alleles = (gen.random((n, n_snps)) < freq_rows).astype(float) + (
        gen.random((n, n_snps)) < freq_rows
    ).astype(float)
    genotypes = alleles / 2.0

    causal: dict[int, float] = {}
    logit = np.zeros(n)
    if n_causal:
        idx = gen.choice(n_snps, size=n_causal, replace=False)
        signs = gen.choice([-1.0, 1.0], size=n_causal)
        for i, s in zip(idx, signs):
            causal[int(i)] = float(s * effect_size)
        beta = np.array([causal[int(i)] for i in idx])
        logit = genotypes[:, idx] @ beta
    if pop_effect != 0.0:
        score = pops - (n_pops - 1) / 2.0
        logit = logit + pop_effect * score

    lo, hi = -40.0, 40.0
    for _ in range(200):
        mid = (lo + hi) / 2.0
        if float(np.mean(_sigmoid(logit + mid))) < prevalence:
            lo = mid
        else:
            hi = mid
    intercept = (lo + hi) / 2.0
    phenotype = (gen.random(n) < _sigmoid(logit + intercept)).astype(float)
    return GenotypeData(
        genotypes=genotypes,
        phenotype=phenotype,
        pop_labels=pops,
        causal_snps=causal,
        allele_freqs=ancestral,
    )


def build_pca_confounder(geno: GenotypeData, n_components: int = 10) -> PcaConfounder:
    """Truncated SVD of the normalized genotype matrix, in raw-dosage coordinates.

    Columns are centered by their mean dosage and scaled by
    sqrt(mean * (1 - mean)); monomorphic columns cannot be scaled and are
    dropped with a warning. The top-K right singular vectors times their
    singular values give the per-variant loadings, rescaled back so the
    confounder consumes raw dosage vectors.
    """
    g = geno.genotypes
    n, s = g.shape
    if not 1 <= n_components <= min(n, s):
        raise ValueError("n_components must be between 1 and min(n, n_snps)")
    means = g.mean(axis=0)
    keep = (means > 0.0) & (means < 1.0)
    dropped = tuple(int(i) for i in np.nonzero(~keep)[0])
    if dropped:
        warnings.warn(f"dropping {len(dropped)} monomorphic columns", stacklevel=2)
    scale = np.sqrt(means[keep] * (1.0 - means[keep]))
    normalized = (g[:, keep] - means[keep]) / scale
    try:
        _, sing, vt = np.linalg.svd(normalized, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise SvdFailureError(str(exc)) from exc
    k = n_components
    weights = np.zeros((s, k))
    weights[keep] = (vt[:k].T * sing[:k]) / scale[:, None]
    conf = LinearMap(weights=weights, offset=means)
    return PcaConfounder(
        confounder=conf,
        singular_values=sing[:k].copy(),
        n_components=k,
        dropped_columns=dropped,
    )


@dataclass(frozen=True)
class GwasConfig:
    """Controls for the end-to-end per-variant effect pipeline."""

    train_fraction: float = 0.6
    cv_folds: int = 5
    l1_grid: tuple[float, ...] = (1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0)
    n_components: int = 10
    effect_threshold: float = 0.1
    flow: FlowConfig = field(default_factory=FlowConfig)
    seed: int = 0


@dataclass(frozen=True)
class SnpRanking:
    snp_index: int
    effect: float
    lasso_coef: float
    selected: bool


def run_gwas_pipeline(geno: GenotypeData, cfg: GwasConfig = GwasConfig()) -> list[SnpRanking]:
    """Fit the outcome model on a split, then rank variants by estimated effect.

    Train/validation: a seeded 60-40 split with k-fold selection of the
    L1 penalty inside the training portion. Effects are then computed for
    every variant over all individuals, with surrogates taken against the
    population-structure confounder built from the full matrix. The
    returned ranking is sorted by absolute effect, with the raw model
    coefficient alongside for comparison.
    """
    n = geno.n
    split_gen = RngSeed(cfg.seed, 1).generator()
    order = split_gen.permutation(n)
    n_train = max(int(round(cfg.train_fraction * n)), 1)
    train_idx = np.sort(order[:n_train])

    train_data = Dataset(
        points=geno.genotypes[train_idx], outcomes=geno.phenotype[train_idx]
    )
    chosen, _ = cross_validate(
        train_data, cfg.cv_folds, cfg.l1_grid, kind="lasso", rng=RngSeed(cfg.seed, 2)
    )
    model = fit_logistic_lasso(train_data, l1_penalty=chosen)

    pca = build_pca_confounder(geno, n_components=cfg.n_components)
    h_all = pca.confounder.value_batch(geno.genotypes)
    full_data = Dataset(
        points=geno.genotypes, outcomes=geno.phenotype, confounder_cache=h_all
    )
    effects: list[SnpEffect] = []
    h2_rng = RngSeed(cfg.seed, 3)
    for snp in range(geno.n_snps):
        effects.append(
            gwas_snp_effect(model, pca.confounder, full_data, snp, cfg.flow, h2_rng)
        )
    ranking = [
        SnpRanking(
            snp_index=e.snp_index,
            effect=e.value,
            lasso_coef=float(model.weights[e.snp_index]),
            selected=abs(e.value) > cfg.effect_threshold,
        )
        for e in effects
    ]
    ranking.sort(key=lambda r: (-abs(r.effect), r.snp_index))
    return ranking


def save_genotypes(geno: GenotypeData, path) -> None:
    """Write genotypes as CSV: one row per individual, variant columns then ``y``."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"snp_{j}" for j in range(geno.n_snps)] + ["y"])
        for i in range(geno.n):
            row = ["%g" % v for v in geno.genotypes[i]]
            row.append("%g" % geno.phenotype[i])
            writer.writerow(row)


def load_genotypes(path, rng: Optional[RngSeed] = None) -> tuple[np.ndarray, np.ndarray]:
    """Read a genotype CSV, imputing NA cells from each column's marginal.

    Returns (dosage matrix, phenotype vector). Missing entries are filled
    by sampling uniformly from the column's observed values, which needs a
    seed; files without missing cells load deterministically without one.
    """
    with Path(path).open("r", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedFileError(f"{path} is empty") from None
        if not header or header[-1].strip() != "y":
            raise MalformedFileError(f"{path}: last column must be 'y'")
        n_snps = len(header) - 1
        cells: list[list[Optional[float]]] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise MalformedFileError(f"{path}:{lineno}: ragged row")
            parsed: list[Optional[float]] = []
            for cell in row:
                cell = cell.strip()
                if cell.upper() in ("NA", "NAN", ""):
                    parsed.append(None)
                else:
                    try:
                        parsed.append(float(cell))
                    except ValueError:
                        raise MalformedFileError(
                            f"{path}:{lineno}: non-numeric cell {cell!r}"
                        ) from None
            cells.append(parsed)
    n = len(cells)
    matrix = np.full((n, n_snps), np.nan)
    phenotype = np.zeros(n)
    for i, row in enumerate(cells):
        if row[-1] is None:
            raise MalformedFileError(f"{path}: missing phenotype in row {i}")
        phenotype[i] = row[-1]
        for j in range(n_snps):
            if row[j] is not None:
                matrix[i, j] = row[j]
    missing = np.isnan(matrix)
    if missing.any():
        if rng is None:
            raise ValueError("file has missing genotypes; an RngSeed is required to impute")
        gen = rng.generator()
        for j in np.nonzero(missing.any(axis=0))[0]:
            observed = matrix[~missing[:, j], j]
            if observed.size == 0:
                raise MalformedFileError(f"{path}: column {j} is entirely missing")
            rows = np.nonzero(missing[:, j])[0]
            matrix[rows, j] = gen.choice(observed, size=rows.size, replace=True)
    return matrix, phenotype
