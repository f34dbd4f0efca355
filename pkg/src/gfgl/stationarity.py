"""First-order optimality certificate for GFGL solutions.

For every l in 1..T a minimiser satisfies

    sum_{t>=l} (S_t - inv(Theta_t)) + lambda1 sum_{t>=l} R1_t + lambda2 R2_l = 0

with R1_t an l1 subgradient of the off-diagonal entries of Theta_t and
R2_l a subgradient of the Frobenius norm at Gamma_l = Theta_l - Theta_{l-1}
(R2_1 = 0). The checker fixes every forced subgradient and picks the free
ones to make the remaining violation as small as possible.
"""

from dataclasses import dataclass

import numpy as np

from .core import LocalCovarianceSeq, NotPositiveDefiniteError, PrecisionSequence


@dataclass(frozen=True)
class SubgradientPair:
    """Forced subgradients plus masks of the entries left free.

    ``R1[t]`` holds sign(Theta_t) on off-diagonal nonzeros and 0 elsewhere;
    ``R1_free[t]`` marks off-diagonal zeros, whose subgradient can be any
    value in [-1, 1]. ``R2[l]`` is Gamma_l / ||Gamma_l||_F where the jump is
    nonzero; ``R2_free[l]`` marks zero jumps (any point of the Frobenius unit
    ball). ``R2[0]`` is 0 and never free.
    """

    R1: np.ndarray
    R1_free: np.ndarray
    R2: np.ndarray
    R2_free: np.ndarray
    gamma: np.ndarray


def build_subgradients(theta_hat, zero_tol=1e-9):
    if zero_tol < 0:
        raise ValueError("zero_tol must be nonnegative")
    if not isinstance(theta_hat, PrecisionSequence):
        theta_hat = PrecisionSequence(theta_hat)
    theta = theta_hat.matrices
    T, p, _ = theta.shape
    off = ~np.eye(p, dtype=bool)
    gamma = theta_hat.differences()

    nonzero = (np.abs(theta) > zero_tol) & off
    R1 = np.where(nonzero, np.sign(theta), 0.0)
    R1_free = off & ~nonzero

    R2 = np.zeros_like(theta)
    R2_free = np.zeros(T, dtype=bool)
    if T > 1:
        if theta_hat.jump_indicators is not None and zero_tol == 0:
            jumps = theta_hat.jump_indicators[1:].copy()
        else:
            jumps = np.linalg.norm(gamma[1:], axis=(1, 2)) > zero_tol
        norms = np.linalg.norm(gamma[1:], axis=(1, 2))
        jumps &= norms > 0
        R2[1:][jumps] = gamma[1:][jumps] / norms[jumps][:, None, None]
        R2_free[1:] = ~jumps
    return SubgradientPair(R1, R1_free, R2, R2_free, gamma)


@dataclass(frozen=True)
class KKTReport:
    max_residual: float
    per_l: np.ndarray
    feasible: bool


def kkt_residual(theta_hat, S, reg, zero_tol=1e-9):
    """Element-max violation of the stationarity equations, per l.

    Parameters
    ----------
    theta_hat : PrecisionSequence
    S : LocalCovarianceSeq or array-like (T, p, p)
    reg : RegularizationConfig
    zero_tol : float
        Entries (and jump norms) at or below this are treated as zero.

    Returns
    -------
    KKTReport
    """
    if not isinstance(theta_hat, PrecisionSequence):
        theta_hat = PrecisionSequence(theta_hat)
    S = S.matrices if isinstance(S, LocalCovarianceSeq) else np.asarray(S, dtype=float)
    theta = theta_hat.matrices
    if S.shape != theta.shape:
        raise ValueError(f"shape mismatch: theta {theta.shape} vs S {S.shape}")
    try:
        inv = np.linalg.inv(theta)
    except np.linalg.LinAlgError:
        inv = None
    if inv is None or not np.all(np.isfinite(inv)):
        for t in range(theta.shape[0]):
            if np.linalg.matrix_rank(theta[t]) < theta.shape[1]:
                raise NotPositiveDefiniteError(f"Theta at t={t + 1} is singular", index=t + 1)
    sub = build_subgradients(theta_hat, zero_tol)
    lam1, lam2 = reg.lambda1, reg.lambda2

    grad = S - inv
    # suffix sums over t >= l
    tail_grad = np.cumsum(grad[::-1], axis=0)[::-1]
    tail_r1 = np.cumsum(sub.R1[::-1], axis=0)[::-1]
    tail_free = np.cumsum(sub.R1_free[::-1].astype(float), axis=0)[::-1]

    T = theta.shape[0]
    per_l = np.empty(T)
    for l in range(T):
        E = tail_grad[l] + lam1 * tail_r1[l] + lam2 * sub.R2[l]
        # each free R1 entry may cancel up to lam1 of the violation
        slack = lam1 * tail_free[l]
        E = np.sign(E) * np.maximum(np.abs(E) - slack, 0.0)
        if sub.R2_free[l]:
            norm = np.linalg.norm(E)
            E = E * max(0.0, 1.0 - lam2 / norm) if norm > 0 else E
        per_l[l] = np.abs(E).max()

    feasible = bool(np.all(np.abs(sub.R1) <= 1 + 1e-12)
                    and np.all(np.linalg.norm(sub.R2, axis=(1, 2)) <= 1 + 1e-12))
    return KKTReport(float(per_l.max()), per_l, feasible)
