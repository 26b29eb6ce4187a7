"""Least-squares inference of the delayed linear operator and rollout.

    L* = argmin_L ‖Z_future − L·Z_td‖_F² (+ λ‖L‖_F²)

λ = 0 uses QR with column pivoting on Z_tdᵀ, falling back to the
minimum-norm SVD solver when Z_tdᵀ is rank deficient or underdetermined.
λ > 0 solves the regularized normal equations by Cholesky.
"""
from dataclasses import dataclass
from typing import Dict

import numpy as np
import scipy.linalg

from ..tensor.ops import Tensor
from ..utils.error_handler import ConfigurationError, InsufficientDataError, NumericalError, ShapeError
from ..utils.logger import get_logger
from .delay import delay_vector

logger = get_logger(__name__)


@dataclass(frozen=True)
class DelayRom:
    """z_{k+1} = L·z_k^td with L of shape [n, n·d]."""
    L: Tensor
    d: int

    def __post_init__(self):
        L = np.asarray(self.L, dtype=np.float64)
        if self.d < 1:
            raise ConfigurationError(f"rom.d must be at least 1, got {self.d}")
        if L.ndim != 2 or L.shape[1] != L.shape[0] * self.d:
            raise ShapeError("DelayRom", L.shape, detail=f"L must be [n, n*d] with d={self.d}")
        if not np.all(np.isfinite(L)):
            raise NumericalError("operator contains non-finite entries")
        L.setflags(write=False)
        object.__setattr__(self, "L", L)

    @property
    def n(self) -> int:
        return self.L.shape[0]

    @classmethod
    def persistence(cls, n: int, d: int) -> "DelayRom":
        """Operator that repeats the newest state: L = [I 0 … 0]."""
        L = np.zeros((n, n * d))
        L[:, :n] = np.eye(n)
        return cls(L, d)

    def companion(self) -> Tensor:
        """[n·d, n·d] one-step map of the delay vector."""
        n, d = self.n, self.d
        top = self.L
        if d == 1:
            return top.copy()
        shift = np.hstack([np.eye(n * (d - 1)), np.zeros((n * (d - 1), n))])
        return np.vstack([top, shift])

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(scipy.linalg.eigvals(self.companion()))))


@dataclass(frozen=True)
class EquationBudget:
    unknowns_per_row: int
    equations: int
    total_unknowns: int
    underdetermined: bool

    def as_dict(self) -> Dict[str, object]:
        return {
            "unknowns_per_row": self.unknowns_per_row,
            "equations": self.equations,
            "total_unknowns": self.total_unknowns,
            "underdetermined": self.underdetermined,
        }


def equation_budget(n: int, d: int, N: int) -> EquationBudget:
    """Unknowns per output row (n·d) against available equations (N − d)."""
    equations = max(N - d, 0)
    return EquationBudget(n * d, equations, n * n * d, n * d > equations)


def _check_pair(z_td: Tensor, z_future: Tensor):
    z_td = np.asarray(z_td, dtype=np.float64)
    z_future = np.asarray(z_future, dtype=np.float64)
    if z_td.ndim != 2 or z_future.ndim != 2:
        raise ShapeError("fit_operator", z_td.shape, z_future.shape, detail="expected 2-D matrices")
    if z_td.shape[1] != z_future.shape[1]:
        raise ShapeError("fit_operator", z_td.shape, z_future.shape, detail="column counts differ")
    n = z_future.shape[0]
    if n == 0 or z_td.shape[0] % n:
        raise ShapeError("fit_operator", z_td.shape, z_future.shape, detail="Z_td rows must be a multiple of n")
    if z_td.shape[1] == 0:
        raise InsufficientDataError("fit_operator needs at least one column")
    if not (np.all(np.isfinite(z_td)) and np.all(np.isfinite(z_future))):
        raise NumericalError("fit_operator inputs contain non-finite values")
    return z_td, z_future, n, z_td.shape[0] // n


def _solve_pivoted_qr(A: Tensor, B: Tensor) -> Tensor:
    """Least squares A·X ≈ B; min-norm when A lacks full column rank."""
    m, p = A.shape
    if m >= p:
        q, r, perm = scipy.linalg.qr(A, mode="economic", pivoting=True)
        diag = np.abs(np.diag(r))
        tol = max(m, p) * np.finfo(np.float64).eps * (diag[0] if diag.size else 0.0)
        rank = int(np.sum(diag > tol))
        if rank == p:
            solution = np.empty((p, B.shape[1]))
            solution[perm] = scipy.linalg.solve_triangular(r, q.T @ B)
            return solution
        logger.warning(f"delay matrix is rank deficient (rank {rank} < {p}); using the minimum-norm solution")
    solution, _, _, _ = scipy.linalg.lstsq(A, B, lapack_driver="gelsd")
    return solution


def fit_operator(z_td: Tensor, z_future: Tensor, ridge: float = 0.0) -> DelayRom:
    """Infer L from delay matrices.

    Args:
        z_td: [n·d, m] delay vectors as columns
        z_future: [n, m] next states
        ridge: Tikhonov weight λ ≥ 0

    Returns:
        DelayRom with L minimizing the (regularized) Frobenius residual
    """
    if ridge < 0:
        raise ConfigurationError(f"rom.ridge must be non-negative, got {ridge}")
    z_td, z_future, n, d = _check_pair(z_td, z_future)
    if z_td.shape[1] < z_td.shape[0]:
        logger.warning(f"underdetermined fit: {z_td.shape[0]} unknowns per row but only {z_td.shape[1]} equations")
    if ridge == 0.0:
        L = _solve_pivoted_qr(z_td.T, z_future.T).T
    else:
        gram = z_td @ z_td.T + ridge * np.eye(z_td.shape[0])
        try:
            factor = scipy.linalg.cho_factor(gram)
        except np.linalg.LinAlgError as e:
            raise NumericalError("Cholesky factorization of the regularized Gram matrix failed", original_error=e)
        L = scipy.linalg.cho_solve(factor, z_td @ z_future.T).T
    if not np.all(np.isfinite(L)):
        raise NumericalError("operator fit produced non-finite entries")
    return DelayRom(L, d)


def one_step_residual(rom: DelayRom, z_td: Tensor, z_future: Tensor) -> float:
    """‖Z_future − L·Z_td‖_F / ‖Z_future‖_F (0 when Z_future is zero)."""
    residual = np.linalg.norm(z_future - rom.L @ z_td)
    scale = np.linalg.norm(z_future)
    return float(residual / scale) if scale > 0 else float(residual)


def rollout(rom: DelayRom, init_window, T: int) -> Tensor:
    """Predict z_1..z_T from a [d, n] window (oldest first, newest last)."""
    window = np.array(init_window, dtype=np.float64)
    if window.ndim == 1 and rom.n == 1:
        window = window[:, None]
    if window.shape != (rom.d, rom.n):
        raise ShapeError("rollout", window.shape, (rom.d, rom.n), detail="window must hold exactly d states")
    if T < 0:
        raise ConfigurationError(f"forecast horizon must be non-negative, got {T}")
    out = np.empty((T, rom.n))
    for t in range(T):
        z = rom.L @ delay_vector(window)
        out[t] = z
        window = np.vstack([window[1:], z[None, :]])
    return out
