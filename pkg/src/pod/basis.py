"""Proper orthogonal decomposition of snapshot matrices.

Snapshots are rows of an M×D matrix (flattened C·H·W fields). The basis is
the top-k right singular vectors of the mean-centred matrix. With optional
per-feature weights w the decomposition is taken in the weighted inner
product: rows are scaled by √w before the SVD and coefficients are computed
from the scaled anomaly, so the training error in that metric is exactly
sqrt(Σ_{j>k} σ_j²).
"""
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy.linalg

from ..data.grid import LatitudeWeights
from ..tensor.ops import Tensor
from ..utils.error_handler import ConfigurationError, DataError, NumericalError, ShapeError
from ..utils.logger import get_logger

logger = get_logger(__name__)

RANK_TOLERANCE = 1e-12
JACOBI_TOLERANCE = 1e-12
JACOBI_MAX_SWEEPS = 60
SVD_METHODS = ("lapack", "jacobi")


@dataclass
class PodBasis:
    """Mean field, orthonormal modes [D, k] and their singular values."""
    mean: Tensor
    modes: Tensor
    singular_values: Tensor
    discarded_energy: float = 0.0
    weights: Optional[Tensor] = field(default=None, repr=False)
    field_shape: Optional[Tuple[int, int, int]] = None

    def __post_init__(self):
        d, k = self.modes.shape
        if self.mean.shape != (d,) or self.singular_values.shape != (k,):
            raise ShapeError("PodBasis", self.mean.shape, self.modes.shape, self.singular_values.shape)
        if self.weights is not None and self.weights.shape != (d,):
            raise ShapeError("PodBasis", self.weights.shape, (d,), detail="feature weights")
        if self.field_shape is None:
            self.field_shape = (1, 1, d)
        if int(np.prod(self.field_shape)) != d:
            raise ShapeError("PodBasis", self.field_shape, (d,), detail="field shape must flatten to D")

    @property
    def k(self) -> int:
        return self.modes.shape[1]

    @property
    def dim(self) -> int:
        return self.modes.shape[0]

    @property
    def weighted(self) -> bool:
        return self.weights is not None

    @property
    def compression_ratio(self) -> float:
        return self.dim / self.k

    @property
    def total_energy(self) -> float:
        return float(np.sum(self.singular_values ** 2) + self.discarded_energy)

    def truncate(self, k: int) -> "PodBasis":
        """Keep the leading ``k`` modes; the rest move to the discarded energy."""
        if not 1 <= k <= self.k:
            raise ConfigurationError(f"pod.k={k} must lie in [1, {self.k}]")
        dropped = float(np.sum(self.singular_values[k:] ** 2))
        return PodBasis(
            self.mean, self.modes[:, :k], self.singular_values[:k],
            self.discarded_energy + dropped, self.weights, self.field_shape,
        )

    def project(self, X) -> Tensor:
        return pod_project(self, X)

    def reconstruct(self, coeffs) -> Tensor:
        return pod_reconstruct(self, coeffs)


def feature_weights(weights: LatitudeWeights, field_shape: Tuple[int, int, int]) -> Tensor:
    """Broadcast latitude weights over a [C, H, W] field and flatten."""
    c, h, w = field_shape
    if len(weights) != h:
        raise ShapeError("feature_weights", (len(weights),), (h,))
    return np.broadcast_to(weights.w[None, :, None], (c, h, w)).reshape(-1).copy()


def _as_matrix(snapshots) -> Tuple[Tensor, Optional[Tuple[int, int, int]]]:
    X = np.asarray(getattr(snapshots, "values", snapshots), dtype=np.float64)
    if X.ndim == 4:
        return X.reshape(len(X), -1), tuple(X.shape[1:])
    if X.ndim != 2:
        raise ShapeError("fit_pod", X.shape, detail="snapshots must be [M, D] or [M, C, H, W]")
    return X, None


def _resolve_weights(weights, dim: int, field_shape) -> Optional[Tensor]:
    if weights is None:
        return None
    if isinstance(weights, LatitudeWeights):
        if field_shape is None:
            raise ShapeError("fit_pod", (len(weights),), (dim,), detail="latitude weights need [M, C, H, W] snapshots")
        return feature_weights(weights, field_shape)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (dim,):
        raise ShapeError("fit_pod", w.shape, (dim,), detail="feature weights")
    if np.any(w < 0):
        raise DataError("POD feature weights must be non-negative")
    return w


def jacobi_svd(A: Tensor, tol: float = JACOBI_TOLERANCE) -> Tuple[Tensor, Tensor, Tensor]:
    """One-sided Jacobi SVD on the columns of A (m×n, n ≤ m preferred).

    Returns (B, sigma, V) with A·V = B, columns of B mutually orthogonal with
    norms sigma (sorted non-increasing) and V orthogonal.
    """
    B = np.array(A, dtype=np.float64, copy=True)
    n = B.shape[1]
    V = np.eye(n)
    for _ in range(JACOBI_MAX_SWEEPS):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = B[:, p] @ B[:, p]
                beta = B[:, q] @ B[:, q]
                gamma = B[:, p] @ B[:, q]
                if gamma == 0.0 or abs(gamma) <= tol * np.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = (1.0 if zeta >= 0 else -1.0) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                bp = B[:, p].copy()
                B[:, p] = c * bp - s * B[:, q]
                B[:, q] = s * bp + c * B[:, q]
                vp = V[:, p].copy()
                V[:, p] = c * vp - s * V[:, q]
                V[:, q] = s * vp + c * V[:, q]
        if not rotated:
            break
    else:
        raise NumericalError(f"Jacobi SVD did not converge in {JACOBI_MAX_SWEEPS} sweeps")
    sigma = np.linalg.norm(B, axis=0)
    order = np.argsort(-sigma, kind="stable")
    return B[:, order], sigma[order], V[:, order]


def _complete_orthonormal(modes: Tensor, valid: int) -> Tensor:
    """Replace columns from ``valid`` on with an orthonormal completion of the first ``valid``."""
    d, k = modes.shape
    if valid >= k:
        return modes
    candidates = np.hstack([modes[:, :valid], np.eye(d)])
    q, _ = scipy.linalg.qr(candidates, mode="economic", pivoting=False)
    out = modes.copy()
    out[:, valid:] = q[:, valid:k]
    return out


def _right_singular_vectors(Y: Tensor, k: int, method: str) -> Tuple[Tensor, Tensor]:
    """(sigma over min(M, D), first k right singular vectors as a [D, k] matrix)."""
    if method == "lapack":
        try:
            _, sigma, vt = scipy.linalg.svd(Y, full_matrices=False, lapack_driver="gesdd")
        except np.linalg.LinAlgError:
            _, sigma, vt = scipy.linalg.svd(Y, full_matrices=False, lapack_driver="gesvd")
        return sigma, vt[:k].T
    m, d = Y.shape
    if m <= d:
        # Yᵀ·V = B  ⇒  Y = V·Σ·(B/σ)ᵀ, so the D-space vectors are the scaled columns of B
        B, sigma, _ = jacobi_svd(Y.T)
        scale = sigma[0] if sigma.size and sigma[0] > 0 else 1.0
        valid = int(np.sum(sigma > RANK_TOLERANCE * scale)) if sigma.size and sigma[0] > 0 else 0
        modes = np.zeros((d, k))
        used = min(valid, k)
        modes[:, :used] = B[:, :used] / sigma[:used]
        return sigma, _complete_orthonormal(modes, used)
    _, sigma, V = jacobi_svd(Y)
    return sigma, V[:, :k]


def fit_pod(
    snapshots,
    k: int,
    weights=None,
    method: str = "lapack",
) -> PodBasis:
    """Fit a k-mode POD basis.

    Args:
        snapshots: [M, D] matrix or [M, C, H, W] fields (finite)
        k: Number of modes, 1 ≤ k ≤ min(M, D)
        weights: Optional LatitudeWeights (needs 4-D snapshots) or [D] feature weights
        method: "lapack" (scipy gesdd) or "jacobi" (one-sided Jacobi)

    Returns:
        PodBasis with orthonormal modes and non-increasing singular values
    """
    X, field_shape = _as_matrix(snapshots)
    m, d = X.shape
    if method not in SVD_METHODS:
        raise ConfigurationError(f"pod.method must be one of {SVD_METHODS}, got {method!r}")
    if not 1 <= k <= min(m, d):
        raise ConfigurationError(f"pod.k={k} must lie in [1, min(M, D)] = [1, {min(m, d)}]")
    if not np.all(np.isfinite(X)):
        raise DataError("POD snapshots must be finite")

    w = _resolve_weights(weights, d, field_shape)
    mean = X.mean(axis=0)
    Y = X - mean
    if w is not None:
        Y = Y * np.sqrt(w)[None, :]

    sigma, modes = _right_singular_vectors(Y, k, method)
    if sigma[0] > 0 and sigma[k - 1] < RANK_TOLERANCE * sigma[0]:
        logger.warning(
            f"POD basis is rank deficient: sigma_{k}={sigma[k - 1]:.3e} < {RANK_TOLERANCE:g}*sigma_1={sigma[0]:.3e}"
        )
    discarded = float(np.sum(sigma[k:] ** 2))
    basis = PodBasis(mean, modes, sigma[:k].copy(), discarded, w, field_shape)
    logger.debug(
        f"POD fit: M={m}, D={d}, k={k}, method={method}, weighted={w is not None}, "
        f"captured energy={1.0 - discarded / basis.total_energy if basis.total_energy > 0 else 1.0:.6f}"
    )
    return basis


def _flat(basis: PodBasis, X, op: str) -> Tuple[Tensor, bool]:
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim in (1, 3)
    if X.ndim in (3, 4):
        X = X.reshape((1 if X.ndim == 3 else len(X)), -1)
    elif X.ndim == 1:
        X = X[None]
    if X.ndim != 2 or X.shape[1] != basis.dim:
        raise ShapeError(op, X.shape, (basis.dim,), detail="field length must equal the basis dimension")
    return X, single


def pod_project(basis: PodBasis, X) -> Tensor:
    """Coefficients modesᵀ·(X − mean) (weighted anomaly when the basis is weighted)."""
    rows, single = _flat(basis, X, "pod_project")
    anomaly = rows - basis.mean
    if basis.weights is not None:
        anomaly = anomaly * np.sqrt(basis.weights)
    coeffs = anomaly @ basis.modes
    return coeffs[0] if single else coeffs


def pod_reconstruct(basis: PodBasis, coeffs) -> Tensor:
    """mean + modes·coeffs, flattened; zero-weight features reconstruct to the mean."""
    c = np.asarray(coeffs, dtype=np.float64)
    single = c.ndim == 1
    c = np.atleast_2d(c)
    if c.ndim != 2 or c.shape[1] != basis.k:
        raise ShapeError("pod_reconstruct", c.shape, (basis.k,), detail="coefficient count must equal k")
    anomaly = c @ basis.modes.T
    if basis.weights is not None:
        root = np.sqrt(basis.weights)
        anomaly = np.divide(anomaly, root, out=np.zeros_like(anomaly), where=root > 0)
    out = basis.mean + anomaly
    return out[0] if single else out


def energy_spectrum(basis: PodBasis) -> Tensor:
    """Cumulative captured-energy fraction for k = 1..basis.k."""
    total = basis.total_energy
    if total <= 0:
        return np.ones(basis.k)
    return np.cumsum(basis.singular_values ** 2) / total


def reconstruction_error(basis: PodBasis, snapshots, weights=None) -> float:
    """Root of the (weighted) mean squared reconstruction error over all features."""
    X, field_shape = _as_matrix(snapshots)
    w = _resolve_weights(weights, X.shape[1], field_shape)
    recon = pod_reconstruct(basis, pod_project(basis, X))
    sq = (X - np.atleast_2d(recon)) ** 2
    if w is not None:
        sq = sq * w[None, :]
    return float(np.sqrt(np.mean(sq)))


@dataclass
class PodSweepRow:
    k: int
    compression_ratio: float
    train_lw_rmse: float
    test_lw_rmse: float


@dataclass
class PodSweep:
    rows: List[PodSweepRow]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(r) for r in self.rows], columns=[f.name for f in fields(PodSweepRow)])

    def write_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.17g")
        return path


def pod_sweep(
    snapshots,
    k_list: Sequence[int],
    weights=None,
    held_out=None,
    method: str = "lapack",
) -> PodSweep:
    """Reconstruction error versus mode count.

    The basis is fitted once at max(k_list) and truncated for each k, which
    gives the same subspaces as independent fits. Training errors are the
    pooled LW-RMSE in the fitting metric and are non-increasing in k; held-out
    errors (NaN when no held-out data is given) carry no such guarantee.
    """
    ks = [int(k) for k in k_list]
    if not ks:
        raise ConfigurationError("pod.k_list must not be empty")
    if any(b <= a for a, b in zip(ks, ks[1:])):
        raise ConfigurationError(f"pod.k_list must be strictly ascending, got {ks}")
    full = fit_pod(snapshots, ks[-1], weights=weights, method=method)
    rows = []
    for k in ks:
        basis = full.truncate(k)
        train_error = reconstruction_error(basis, snapshots, weights)
        test_error = float("nan") if held_out is None else reconstruction_error(basis, held_out, weights)
        rows.append(PodSweepRow(k, basis.compression_ratio, train_error, test_error))
        logger.debug(f"POD sweep k={k}: train={train_error:.6e} test={test_error:.6e}")
    return PodSweep(rows)
