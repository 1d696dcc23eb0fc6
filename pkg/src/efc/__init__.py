"""Causal effect estimation with functional confounders.

When the confounder is a known function h of the pre-outcome variables,
two confounder values never co-occur with one intervention value, so the
usual positivity assumption fails. This package estimates conditional and
average effects anyway by descending the confounder mismatch along its
gradient: the resulting surrogate intervention shares the queried
conditional effect but sits on the target confounder level set, where a
fitted outcome model identifies it. Alongside the estimator live the
simulated benchmark families with analytic oracles, an error-bound
evaluator, support and dependence diagnostics, and a synthetic
genotype-association pipeline with population-structure confounding.
"""

from .causal_models import (
    BoundConstants,
    ModelSpec,
    analytic_constants,
    confounder_for,
    sample,
    true_average_effect,
    true_conditional_effect,
)
from .confounders import (
    FunctionalConfounder,
    LinearMap,
    LinearSum,
    PairwiseBilinear,
    check_grad,
)
from .data_model import (
    Dataset,
    InterventionQuery,
    RngSeed,
    load_dataset,
    make_eval_queries,
    save_dataset,
)
from .diagnostics import (
    BoundReport,
    cred_residual,
    fpos_dependence_check,
    support_score,
    surrogate_error_bound,
)
from .estimators import (
    EffectEstimate,
    baseline_conditional_effect,
    functional_effect,
    gwas_snp_effect,
    lode_average_effect,
    lode_conditional_effect,
)
from .gwas_sim import (
    GenotypeData,
    GwasConfig,
    PcaConfounder,
    build_pca_confounder,
    generate_genotypes,
    run_gwas_pipeline,
)
from .harness import SweepConfig, run_sweep, summarize
from .regression import (
    KernelRidgeModel,
    LogisticLassoModel,
    cross_validate,
    fit_krr,
    fit_logistic_lasso,
)
from .surrogate_flow import (
    FlowConfig,
    FlowStatus,
    SurrogateResult,
    batch_solve_to_mismatch,
    closed_form_linear,
    euler_solve,
)

__version__ = "0.1.0"
