"""Symmetric-matrix primitives and the proximal maps used by the ADMM.

All functions accept a single ``(p, p)`` matrix or a stack ``(T, p, p)``
and operate on the trailing two axes.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EigenPair:
    values: np.ndarray
    vectors: np.ndarray

    def reconstruct(self):
        return (self.vectors * self.values[..., None, :]) @ np.swapaxes(self.vectors, -1, -2)


def symmetrize(A):
    A = np.asarray(A, dtype=np.float64)
    return 0.5 * (A + np.swapaxes(A, -1, -2))


def sym_eigen(A):
    """Full eigendecomposition of a symmetric matrix (ascending values)."""
    A = np.asarray(A, dtype=np.float64)
    if not np.all(np.isfinite(A)):
        raise ValueError("sym_eigen: matrix has non-finite entries")
    values, vectors = np.linalg.eigh(symmetrize(A))
    return EigenPair(values, vectors)


def logdet_prox_eigenvalue_map(eta, weight=2.0):
    """Positive root of ``weight * u**2 + eta * u - 1 = 0``.

    With the default weight 2 this is ``(-eta + sqrt(eta**2 + 8)) / 4``.
    For eta > 0 the algebraically equal ``2 / (eta + sqrt(eta**2 + 4 weight))``
    is used so large eta keeps full relative precision.
    """
    eta = np.asarray(eta, dtype=np.float64)
    root = np.sqrt(eta * eta + 4.0 * weight)
    with np.errstate(divide="ignore", invalid="ignore"):
        stable = 2.0 / (eta + root)
    out = np.where(eta > 0, stable, (root - eta) / (2.0 * weight))
    return out if out.ndim else float(out)


def logdet_prox(A, weight=2.0):
    """Minimiser of ``-log det U + <A, U> + (weight / 2) ||U||_F^2`` over PD U.

    Equivalently U solves ``-inv(U) + weight * U + A = 0``; the result is
    exactly symmetric.
    """
    pair = sym_eigen(A)
    u = logdet_prox_eigenvalue_map(pair.values, weight)
    U = (pair.vectors * u[..., None, :]) @ np.swapaxes(pair.vectors, -1, -2)
    return symmetrize(U)


def _offdiag_mask(p):
    return ~np.eye(p, dtype=bool)


def soft_threshold_offdiag(A, kappa):
    """Entry-wise soft threshold of off-diagonal entries; diagonal passes."""
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    A = np.asarray(A, dtype=np.float64)
    out = np.sign(A) * np.maximum(np.abs(A) - kappa, 0.0)
    idx = np.arange(A.shape[-1])
    out[..., idx, idx] = A[..., idx, idx]
    return out


def group_soft_threshold(Q, kappa):
    """Proximal map of ``kappa * ||.||_F``.

    Returns the exact zero matrix whenever ``||Q||_F <= kappa`` (and for
    Q = 0). For stacked input each matrix is thresholded separately.
    """
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    Q = np.asarray(Q, dtype=np.float64)
    norm = np.sqrt(np.sum(Q * Q, axis=(-2, -1)))
    keep = norm > kappa
    safe = np.where(keep, norm, 1.0)
    scale = np.where(keep, (norm - kappa) / safe, 0.0)
    return Q * scale[..., None, None]


def norms(A):
    """Frobenius, element-max, off-diagonal l1 and max-row-sum norms."""
    A = np.asarray(A, dtype=np.float64)
    absA = np.abs(A)
    return {
        "frobenius": float(np.sqrt(np.sum(A * A))),
        "max_abs": float(absA.max()) if absA.size else 0.0,
        "l1_offdiag": float(absA[_offdiag_mask(A.shape[0])].sum()),
        "operator_inf": float(absA.sum(axis=1).max()) if absA.size else 0.0,
    }


def operator_inf_norm(A):
    return float(np.abs(np.asarray(A)).sum(axis=1).max())
