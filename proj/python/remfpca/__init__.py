"""Regularized multivariate functional PCA (C++ core)."""

from ._remfpca import (
    BasisSystem,
    MFDataset,
    Model,
    RemfpcaError,
    apply_weights,
    ari,
    choose_k_by_silhouette,
    cross_validate,
    eval_pcs,
    fit,
    kmedoids,
    mrae,
    nmi,
    reconstruct,
    rescale_weights,
    run_experiment,
    scores,
    silhouette,
    simulate,
    smooth,
    true_eigenvalue,
)

__all__ = [
    "BasisSystem",
    "MFDataset",
    "Model",
    "RemfpcaError",
    "apply_weights",
    "ari",
    "choose_k_by_silhouette",
    "cross_validate",
    "eval_pcs",
    "fit",
    "kmedoids",
    "mrae",
    "nmi",
    "reconstruct",
    "rescale_weights",
    "run_experiment",
    "scores",
    "silhouette",
    "simulate",
    "smooth",
    "true_eigenvalue",
]
