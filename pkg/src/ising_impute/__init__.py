"""Bayesian Ising network estimation with iterative imputation of missing binary responses."""

__version__ = "0.1.0"

from .dataset import MISSING, ObservedDataset
from .datagen import (
    MissingnessSpec,
    apply_missingness,
    load_true_parameters,
    sample_ising_exact,
    sample_ising_gibbs,
    study_missingness,
)
from .errors import (
    DimensionTooLargeError,
    EmptyCompleteCaseError,
    IsingImputeError,
    RecoveryError,
    SPDError,
    ValidationError,
)
from .fit import (
    ChainConfig,
    FitResult,
    fit_complete_case,
    fit_methods,
    fit_single_imputation,
    gelman_rubin,
    impute_column,
    listwise_delete,
    run_fit,
)
from .gibbs import GaussianPosterior, PriorSpec, sample_alpha, sample_beta
from .identifiability import RestrictedDistribution, recover_from_restricted, restricted_distribution
from .ising import (
    conditional_logit,
    conditional_success_prob,
    log_normalizing_constant,
    log_pmf,
    normalizing_constant,
    pseudo_log_likelihood,
)
from .metrics import ReplicationSet, auc, jaccard, mse_bias, roc_curve
from .polyagamma import RngStream, pg_mean, sample_pg, sample_pg1
from .vech import TransformSet, duplication_matrix, vech, vech_inverse

__all__ = [name for name in dir() if not name.startswith("_")]
