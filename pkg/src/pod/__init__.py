"""Proper orthogonal decomposition baseline."""
from .basis import (
    PodBasis,
    PodSweep,
    PodSweepRow,
    energy_spectrum,
    feature_weights,
    fit_pod,
    jacobi_svd,
    pod_project,
    pod_reconstruct,
    pod_sweep,
    reconstruction_error,
)
from .checkpoint import POD_MAGIC, load_basis, save_basis

__all__ = [
    "PodBasis",
    "PodSweep",
    "PodSweepRow",
    "energy_spectrum",
    "feature_weights",
    "fit_pod",
    "jacobi_svd",
    "pod_project",
    "pod_reconstruct",
    "pod_sweep",
    "reconstruction_error",
    "POD_MAGIC",
    "load_basis",
    "save_basis",
]
