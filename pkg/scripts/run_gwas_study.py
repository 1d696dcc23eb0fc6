#!/usr/bin/env python3
"""Desk-scale genotype study: planted causal variants under structure confounding.

Generates synthetic cohorts, runs the per-variant effect pipeline, and
reports recall of the planted variants at a fixed selection size for the
surrogate-corrected effect ranking versus the raw model-coefficient
ranking, followed by a null-cohort false-positive audit.
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from efc.data_model import RngSeed
from efc.gwas_sim import GwasConfig, generate_genotypes, run_gwas_pipeline


def recall_at(ranking, causal, size, key):
    ordered = sorted(ranking, key=key)
    top = {r.snp_index for r in ordered[:size]}
    return len(top & causal) / max(len(causal), 1)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=2000)
    parser.add_argument("--snps", type=int, default=200)
    parser.add_argument("--causal", type=int, default=10)
    parser.add_argument("--effect-size", type=float, default=1.0)
    parser.add_argument("--pop-effect", type=float, default=4.0)
    parser.add_argument("--fst", type=float, default=0.5)
    parser.add_argument("--seeds", type=int, default=10)
    parser.add_argument("--selection-size", type=int, default=20)
    parser.add_argument("--out", type=Path, default=Path("gwas_study.csv"))
    args = parser.parse_args()

    rows = []
    for seed in range(args.seeds):
        geno = generate_genotypes(
            n=args.n, n_snps=args.snps, n_pops=2, fst=args.fst,
            n_causal=args.causal, effect_size=args.effect_size,
            pop_effect=args.pop_effect, rng=RngSeed(seed),
        )
        ranking = run_gwas_pipeline(geno, GwasConfig(seed=seed))
        causal = set(geno.causal_snps)
        by_effect = recall_at(ranking, causal, args.selection_size,
                              key=lambda r: (-abs(r.effect), r.snp_index))
        by_coef = recall_at(ranking, causal, args.selection_size,
                            key=lambda r: (-abs(r.lasso_coef), r.snp_index))
        rows.append({"seed": seed, "recall_effect": by_effect, "recall_coef": by_coef,
                     "n_selected": sum(r.selected for r in ranking)})
        print(f"seed {seed}: effect-ranking recall {by_effect:.2f}, "
              f"coefficient-ranking recall {by_coef:.2f}")

    null_fracs = []
    for seed in range(args.seeds):
        geno = generate_genotypes(
            n=args.n, n_snps=args.snps, n_pops=2, fst=args.fst,
            n_causal=0, pop_effect=0.0, rng=RngSeed(1000 + seed),
        )
        ranking = run_gwas_pipeline(geno, GwasConfig(seed=seed))
        null_fracs.append(float(np.mean([r.selected for r in ranking])))
        print(f"null seed {seed}: fraction selected {null_fracs[-1]:.3f}")

    with args.out.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["seed", "recall_effect", "recall_coef", "n_selected"])
        writer.writeheader()
        writer.writerows(rows)
    print(f"mean effect-ranking recall {np.mean([r['recall_effect'] for r in rows]):.3f} vs "
          f"coefficient {np.mean([r['recall_coef'] for r in rows]):.3f}; "
          f"null selection rate {np.mean(null_fracs):.4f}")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
