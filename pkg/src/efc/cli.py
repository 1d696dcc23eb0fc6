"""Command-line entry points.

Subcommands: simulate, fit, estimate, sweep, summarize, check (cred,
bound, support, fpos), gwas-sim, gwas-run. All accept --seed and --out;
sweep accepts --threads. Outputs are CSV files plus JSON sidecars or
one-line JSON reports, meant to be consumed by external plotting.
"""

from __future__ import annotations

import csv
import json
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from .causal_models import (
    ModelSpec,
    analytic_constants,
    confounder_for,
    sample,
)
from .confounders import LinearSum, PairwiseBilinear, load_linear_map
from .data_model import (
    InterventionQuery,
    RngSeed,
    load_dataset,
    save_dataset,
    write_metadata,
)
from .diagnostics import (
    cred_residual,
    fpos_dependence_check,
    model_gradient_field,
    support_score,
    surrogate_error_bound,
)
from .estimators import (
    baseline_conditional_effect,
    lode_conditional_effect,
)
from .gwas_sim import (
    GenotypeData,
    GwasConfig,
    generate_genotypes,
    run_gwas_pipeline,
    save_genotypes,
)
from .harness import (
    SweepConfig,
    read_results,
    run_sweep,
    summarize,
    write_results,
    write_summary,
)
from .regression import cross_validate, fit_krr, fit_logistic_lasso, load_model, save_model
from .surrogate_flow import FlowConfig, euler_solve


def _flow_options(fn):
    fn = click.option("--step-size", type=float, default=0.05, show_default=True)(fn)
    fn = click.option("--rel-tolerance", type=float, default=1e-4, show_default=True)(fn)
    fn = click.option("--max-steps", type=int, default=100_000, show_default=True)(fn)
    return fn


_threads_option = click.option(
    "--threads", type=int, default=1, show_default=True,
    help="worker threads; commands without parallel work accept and ignore this",
)


def _emit(payload: dict, out) -> None:
    line = json.dumps(payload)
    click.echo(line)
    if out is not None:
        Path(out).write_text(line + "\n")


def _make_flow(step_size, rel_tolerance, max_steps) -> FlowConfig:
    return FlowConfig(step_size=step_size, rel_tolerance=rel_tolerance, max_steps=max_steps)


def _model_spec(family, dim, gamma, alpha, sigma, noise_sd) -> ModelSpec:
    return ModelSpec(family=family, dim=dim, gamma=gamma, alpha=alpha, sigma=sigma, noise_sd=noise_sd)


@click.group()
def main():
    """Effect estimation with functional confounders."""


@main.command()
@click.option("--family", type=click.Choice(["A", "B"]), required=True)
@click.option("--n", type=int, required=True)
@click.option("--dim", type=int, default=20, show_default=True)
@click.option("--gamma", type=float, default=1.0, show_default=True)
@click.option("--alpha", type=float, default=1.0, show_default=True)
@click.option("--sigma", type=float, default=1.0, show_default=True)
@click.option("--noise-sd", type=float, default=None, help="defaults to sqrt(0.1)")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@_threads_option
def simulate(family, n, dim, gamma, alpha, sigma, noise_sd, seed, out, threads):
    """Sample a simulated dataset to CSV with a JSON metadata sidecar."""
    kwargs = {} if noise_sd is None else {"noise_sd": noise_sd}
    spec = ModelSpec(family=family, dim=dim, gamma=gamma, alpha=alpha, sigma=sigma, **kwargs)
    data = sample(spec, n, RngSeed(seed))
    save_dataset(data, out)
    write_metadata(
        Path(out).with_suffix(".meta.json"),
        dim=spec.dim,
        model={
            "family": spec.family,
            "gamma": spec.gamma,
            "alpha": spec.alpha,
            "sigma": spec.sigma,
            "noise_sd": spec.noise_sd,
            "n": n,
        },
        seed=seed,
    )
    click.echo(f"wrote {n} rows to {out}")


@main.command()
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--kind", type=click.Choice(["krr", "lasso"]), default="krr", show_default=True)
@click.option("--penalty", type=float, default=None,
              help="ridge (krr) or L1 strength (lasso); chosen by CV when omitted")
@click.option("--cv-folds", type=int, default=5, show_default=True)
@click.option("--grid", type=str, default="1e-6,1e-4,1e-2,1,1e2",
              help="comma-separated CV grid used when --penalty is omitted")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@_threads_option
def fit(data_path, kind, penalty, cv_folds, grid, seed, out, threads):
    """Fit an outcome model on a dataset CSV and save it as JSON."""
    data = load_dataset(data_path, has_outcome=True)
    if penalty is None:
        grid_values = tuple(float(v) for v in grid.split(","))
        penalty, _ = cross_validate(data, cv_folds, grid_values, kind=kind, rng=RngSeed(seed))
    if kind == "krr":
        model = fit_krr(data, ridge=penalty)
    else:
        model = fit_logistic_lasso(data, l1_penalty=penalty)
    save_model(model, out)
    click.echo(f"fitted {kind} (penalty={penalty:g}) -> {out}")


def _load_confounder(kind, gamma, dim, confounder_file):
    if kind == "linear-map":
        if confounder_file is None:
            raise click.UsageError("--confounder-file is required for linear-map")
        return load_linear_map(confounder_file)
    if kind == "linear-sum":
        return LinearSum(gamma=gamma, dim=dim)
    return PairwiseBilinear(gamma=gamma, dim=dim)


def _load_queries(path) -> list[InterventionQuery]:
    with Path(path).open("r", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        t_cols = [i for i, name in enumerate(header) if name.startswith("t_")]
        h_cols = [i for i, name in enumerate(header) if name.startswith("h_")]
        if not t_cols or not h_cols:
            raise click.UsageError("query CSV needs t_* and h_* columns")
        queries = []
        for row in reader:
            if not row:
                continue
            t = np.array([float(row[i]) for i in t_cols])
            h = np.array([float(row[i]) for i in h_cols])
            queries.append(InterventionQuery(t_star=t, h_target=h))
    return queries


@main.command()
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--queries", "query_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--confounder-kind", type=click.Choice(["linear-sum", "pairwise-bilinear", "linear-map"]),
              default="linear-sum", show_default=True)
@click.option("--gamma", type=float, default=1.0, show_default=True)
@click.option("--dim", type=int, default=20, show_default=True)
@click.option("--confounder-file", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--method", type=click.Choice(["lode", "baseline", "both"]), default="both",
              show_default=True)
@_flow_options
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@_threads_option
def estimate(model_path, query_path, confounder_kind, gamma, dim, confounder_file,
             method, step_size, rel_tolerance, max_steps, seed, out, threads):
    """Estimate conditional effects for each query row."""
    model = load_model(model_path)
    conf = _load_confounder(confounder_kind, gamma, dim, confounder_file)
    queries = _load_queries(query_path)
    flow = _make_flow(step_size, rel_tolerance, max_steps)
    with Path(out).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["query_id", "method", "value", "steps", "final_mismatch", "status"])
        for qid, query in enumerate(queries):
            if method in ("lode", "both"):
                est = lode_conditional_effect(model, conf, query, flow)
                surr = est.surrogate
                writer.writerow([
                    qid, est.method,
                    "" if est.value is None else "%.17g" % est.value,
                    surr.steps_taken, "%.17g" % surr.final_mismatch, surr.status.value,
                ])
            if method in ("baseline", "both"):
                est = baseline_conditional_effect(model, query)
                writer.writerow([qid, est.method, "%.17g" % est.value, "", "", ""])
    click.echo(f"wrote estimates for {len(queries)} queries to {out}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--seed", type=int, default=None, help="overrides the config's base seed")
@click.option("--threads", type=int, default=1, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def sweep(config_path, seed, threads, out):
    """Run a sweep described by a JSON config and write the results CSV."""
    raw = json.loads(Path(config_path).read_text())
    flow = FlowConfig(**raw.pop("flow", {}))
    for key in ("gamma_grid", "sigma_grid", "alpha_grid", "delta_grid", "step_grid", "ridge_grid"):
        if key in raw:
            raw[key] = tuple(raw[key])
    cfg = SweepConfig(flow=flow, **raw)
    if seed is not None:
        cfg = replace(cfg, base_seed=seed)
    rows = run_sweep(cfg, threads=threads)
    write_results(rows, out)
    click.echo(f"wrote {len(rows)} rows to {out}")


@main.command(name="summarize")
@click.option("--results", "results_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--seed", type=int, default=0, show_default=True,
              help="unused; aggregation is deterministic")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@_threads_option
def summarize_cmd(results_path, seed, out, threads):
    """Aggregate a results CSV to per-cell means and standard deviations."""
    rows = read_results(results_path)
    write_summary(summarize(rows), out)
    click.echo(f"wrote summary to {out}")


@main.group()
def check():
    """Diagnostics; each subcommand prints a one-line JSON report."""


@check.command()
@click.option("--family", type=click.Choice(["A", "B"]), required=True)
@click.option("--dim", type=int, default=20, show_default=True)
@click.option("--gamma", type=float, default=1.0, show_default=True)
@click.option("--alpha", type=float, default=1.0, show_default=True)
@click.option("--sigma", type=float, default=1.0, show_default=True)
@click.option("--points", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@_threads_option
def cred(family, dim, gamma, alpha, sigma, points, seed, out, threads):
    """Orthogonality residual of a simulated family's outcome gradient."""
    spec = _model_spec(family, dim, gamma, alpha, sigma, 0.0)
    conf = confounder_for(spec)
    gen = RngSeed(seed).generator()
    probes = [(gen.normal(0, sigma, dim), gen.normal(0, 1)) for _ in range(points)]
    residual = cred_residual(model_gradient_field(spec), conf, probes)
    _emit({"check": "cred", "family": family, "points": points,
           "max_residual": residual}, out)


@check.command()
@click.option("--family", type=click.Choice(["A", "B"]), required=True)
@click.option("--dim", type=int, default=4, show_default=True)
@click.option("--gamma", type=float, default=1.0, show_default=True)
@click.option("--alpha", type=float, default=1.0, show_default=True)
@click.option("--sigma", type=float, default=1.0, show_default=True)
@_flow_options
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@_threads_option
def bound(family, dim, gamma, alpha, sigma, step_size, rel_tolerance, max_steps, seed, out, threads):
    """Solve one random query and evaluate the error-bound terms for it."""
    spec = _model_spec(family, dim, gamma, alpha, sigma, 0.0)
    conf = confounder_for(spec)
    gen = RngSeed(seed).generator()
    t_star = gen.normal(0, sigma, dim)
    h_target = conf.value(gen.normal(0, sigma, dim))
    query = InterventionQuery(t_star=t_star, h_target=h_target)
    flow = replace(_make_flow(step_size, rel_tolerance, max_steps), record_trajectory=True)
    surr = euler_solve(conf, query, flow)
    report = surrogate_error_bound(analytic_constants(spec), surr, flow)
    _emit({
        "check": "bound", "family": family, "steps": surr.steps_taken,
        "status": surr.status.value,
        "accumulation_term": report.accumulation_term,
        "mismatch_term": report.mismatch_term,
        "total": report.total,
        "note": report.dropped_terms_note,
    }, out)


@check.command()
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--point", type=str, required=True, help="comma-separated coordinates")
@click.option("--k", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True,
              help="unused; the score is deterministic")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@_threads_option
def support(data_path, point, k, seed, out, threads):
    """Nearest-neighbor support percentile of a point against a dataset."""
    data = load_dataset(data_path, has_outcome=True)
    t_hat = np.array([float(v) for v in point.split(",")])
    dist, pct = support_score(data, t_hat, k=k)
    _emit({"check": "support", "k": k, "distance": dist,
           "percentile": pct, "flagged": pct >= 99.0}, out)


@check.command()
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False), required=True,
              help="CSV with columns g and h")
@click.option("--seed", type=int, default=0, show_default=True,
              help="unused; the score is deterministic")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@_threads_option
def fpos(data_path, seed, out, threads):
    """Dependence of an intervened function on the confounder (variance explained)."""
    with Path(data_path).open("r", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if "g" not in header or "h" not in header:
            raise click.UsageError("fpos CSV needs columns named g and h")
        gi, hi = header.index("g"), header.index("h")
        g, h = [], []
        for row in reader:
            if row:
                g.append(float(row[gi]))
                h.append(float(row[hi]))
    score = fpos_dependence_check(np.array(g), np.array(h))
    _emit({"check": "fpos", "score": score, "flagged": score >= 0.99}, out)


@main.command(name="gwas-sim")
@click.option("--n", type=int, default=2000, show_default=True)
@click.option("--snps", type=int, default=200, show_default=True)
@click.option("--pops", type=int, default=2, show_default=True)
@click.option("--fst", type=float, default=0.2, show_default=True)
@click.option("--causal", type=int, default=10, show_default=True)
@click.option("--effect-size", type=float, default=1.0, show_default=True)
@click.option("--pop-effect", type=float, default=2.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@_threads_option
def gwas_sim_cmd(n, snps, pops, fst, causal, effect_size, pop_effect, seed, out, threads):
    """Generate a synthetic genotype study with planted structure confounding."""
    geno = generate_genotypes(
        n=n, n_snps=snps, n_pops=pops, fst=fst, n_causal=causal,
        effect_size=effect_size, pop_effect=pop_effect, rng=RngSeed(seed),
    )
    save_genotypes(geno, out)
    truth = {
        "causal_snps": {str(k): v for k, v in geno.causal_snps.items()},
        "pop_labels": geno.pop_labels.tolist(),
        "allele_freqs": geno.allele_freqs.tolist(),
        "seed": seed,
    }
    Path(out).with_suffix(".truth.json").write_text(json.dumps(truth) + "\n")
    click.echo(f"wrote {n} individuals x {snps} variants to {out}")


@main.command(name="gwas-run")
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--components", type=int, default=10, show_default=True)
@click.option("--threshold", type=float, default=0.1, show_default=True)
@click.option("--train-fraction", type=float, default=0.6, show_default=True)
@click.option("--cv-folds", type=int, default=5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@_threads_option
def gwas_run_cmd(data_path, components, threshold, train_fraction, cv_folds, seed, out, threads):
    """Run the per-variant effect pipeline on a genotype CSV."""
    from .gwas_sim import load_genotypes

    matrix, phenotype = load_genotypes(data_path, rng=RngSeed(seed, 99))
    geno = GenotypeData(
        genotypes=matrix, phenotype=phenotype,
        pop_labels=np.zeros(matrix.shape[0], dtype=int),
        causal_snps={}, allele_freqs=np.clip(matrix.mean(axis=0), 1e-6, 1 - 1e-6),
    )
    cfg = GwasConfig(
        train_fraction=train_fraction, cv_folds=cv_folds,
        n_components=components, effect_threshold=threshold, seed=seed,
    )
    ranking = run_gwas_pipeline(geno, cfg)
    with Path(out).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["snp", "effect", "coef", "selected_flag"])
        for row in ranking:
            writer.writerow([row.snp_index, "%.17g" % row.effect,
                             "%.17g" % row.lasso_coef, int(row.selected)])
    click.echo(f"wrote ranked effects for {len(ranking)} variants to {out}")


if __name__ == "__main__":
    main()
