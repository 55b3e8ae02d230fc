"""Spectral regularization learning with random feature approximation."""

__version__ = "0.1.0"

from .features import (
    FeatureMap,
    MemoryBudgetError,
    approx_kernel,
    designer_basis,
    embed,
    feature_matrix,
    sample_feature_map,
)
from .oracles import (
    DesignerKernel,
    ExactKernel,
    FeatureMapKernel,
    GaussianKernel,
    MonteCarloKernel,
    krr_gram_fit,
    krr_predict,
)
from .filters import (
    AuditReport,
    Heavyball,
    Landweber,
    SpectralCutoff,
    SpectralFilter,
    Tikhonov,
    audit_filter,
    filter_value,
    make_filter,
    qualification_sufficient,
    residual_value,
)
from .estimator import (
    DivergenceError,
    RfModel,
    assemble_empirical_operators,
    fit_iterative,
    fit_spectral,
    load_model,
    mse,
    predict,
    save_model,
)
from .diagnostics import (
    DesignerProblem,
    HardLearningError,
    compute_f_star,
    effective_dimension,
    effective_dimension_comparison,
    excess_risk_exact,
    make_designer_problem,
    sample_dataset,
    sup_norm_f_star,
)
from .harness import (
    ExperimentPlan,
    default_heatmap_plan,
    default_rate_plan,
    ingest_csv_dataset,
    lambda_schedule,
    m_schedule,
    run_heatmap,
    run_plateau_check,
    run_rate_sweep,
    trial_seed,
)
