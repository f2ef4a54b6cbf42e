"""VICReg objective, analytic gradients, training and probes on synthetic data."""

from ._vicreg import (
    TrainedRun,
    algorithm1_loss,
    avg_correlation_coefficient,
    config_keys,
    covariance_matrix,
    covariance_term,
    covariance_term_backward,
    dataset_from_config,
    default_config,
    generate_dataset,
    gradcheck,
    invariance_term,
    knn_classify,
    l2_normalize_rows,
    linear_probe,
    standardize_columns,
    train,
    variance_term,
    variance_term_backward,
    vicreg_loss,
    vicreg_loss_backward,
)

__all__ = [
    "TrainedRun",
    "algorithm1_loss",
    "avg_correlation_coefficient",
    "config_keys",
    "covariance_matrix",
    "covariance_term",
    "covariance_term_backward",
    "dataset_from_config",
    "default_config",
    "generate_dataset",
    "gradcheck",
    "invariance_term",
    "knn_classify",
    "l2_normalize_rows",
    "linear_probe",
    "standardize_columns",
    "train",
    "variance_term",
    "variance_term_backward",
    "vicreg_loss",
    "vicreg_loss_backward",
]
