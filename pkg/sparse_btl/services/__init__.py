"""
数值服务层
似然、诊断、图、求解、推断与读写
"""
from sparse_btl.services.likelihood import (
    BTLLikelihood,
    btl_prob,
    gradient,
    hessian,
    loss,
    regularized_loss,
    rescale_covariates,
)
from sparse_btl.services.diagnostics import (
    check_identifiability,
    compute_diagnostics,
    find_sparse_null_direction,
)
from sparse_btl.services.graph import (
    connected_components,
    is_connected,
    largest_component_restrict,
    make_rng,
    sample_er_graph,
)
from sparse_btl.services.solver import default_tuning, fit, fit_path, kkt_residual, soft_threshold_block
from sparse_btl.services.refit import two_stage_refit
from sparse_btl.services.debias import debias_alpha
from sparse_btl.services.bootstrap import gof_bootstrap, gof_statistic, gof_test
from sparse_btl.services.ranking import (
    one_sided_rank,
    rank_ci,
    rank_threshold_test,
    sigma_hat,
    topk_screen,
)
from sparse_btl.services.dataset_io import load_dataset, summarize_dataset, write_dataset
from sparse_btl.services.report_io import read_config, read_report, write_config, write_report

__all__ = [
    # Likelihood
    "BTLLikelihood",
    "btl_prob",
    "gradient",
    "hessian",
    "loss",
    "regularized_loss",
    "rescale_covariates",
    # Diagnostics
    "check_identifiability",
    "compute_diagnostics",
    "find_sparse_null_direction",
    # Graph
    "connected_components",
    "is_connected",
    "largest_component_restrict",
    "make_rng",
    "sample_er_graph",
    # Solver
    "default_tuning",
    "fit",
    "fit_path",
    "kkt_residual",
    "soft_threshold_block",
    "two_stage_refit",
    # Inference
    "debias_alpha",
    "gof_bootstrap",
    "gof_statistic",
    "gof_test",
    "one_sided_rank",
    "rank_ci",
    "rank_threshold_test",
    "sigma_hat",
    "topk_screen",
    # IO
    "load_dataset",
    "summarize_dataset",
    "write_dataset",
    "read_config",
    "read_report",
    "write_config",
    "write_report",
]
