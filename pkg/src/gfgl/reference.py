"""Slow, independent oracle solvers for desk-scale verification.

Nothing here shares code with the ADMM: the conic oracle hands the GFGL
program to a generic interior-point solver through cvxpy, and the
subgradient oracle is a plain projected subgradient method.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .core import LocalCovarianceSeq, gfgl_objective

MAX_P = 3
MAX_T = 10


@dataclass(frozen=True)
class OracleResult:
    objective: float
    precisions: np.ndarray
    converged: bool
    method: str


def _stack(S):
    return S.matrices if isinstance(S, LocalCovarianceSeq) else np.asarray(S, dtype=float)


def _check_size(S, enforce):
    T, p, _ = S.shape
    if enforce and (p > MAX_P or T > MAX_T):
        raise ValueError(f"oracle limited to p <= {MAX_P}, T <= {MAX_T}; got p={p}, T={T}")


def _conic(S, reg, constant):
    import cvxpy as cp

    T, p, _ = S.shape
    off = 1.0 - np.eye(p)
    if constant:
        U = cp.Variable((p, p), PSD=True)
        Sbar = S.mean(axis=0)
        obj = T * (-cp.log_det(U) + cp.trace(Sbar @ U)
                   + reg.lambda1 * cp.sum(cp.abs(cp.multiply(off, U))))
        prob = cp.Problem(cp.Minimize(obj))
        prob.solve(solver="CLARABEL")
        Us = np.repeat(np.asarray(U.value)[None], T, axis=0)
    else:
        Us_var = [cp.Variable((p, p), PSD=True) for _ in range(T)]
        obj = 0
        for t, U in enumerate(Us_var):
            obj += -cp.log_det(U) + cp.trace(S[t] @ U)
            obj += reg.lambda1 * cp.sum(cp.abs(cp.multiply(off, U)))
        for t in range(1, T):
            obj += reg.lambda2 * cp.norm(Us_var[t] - Us_var[t - 1], "fro")
        prob = cp.Problem(cp.Minimize(obj))
        prob.solve(solver="CLARABEL")
        Us = np.stack([np.asarray(U.value) for U in Us_var])
    Us = 0.5 * (Us + np.swapaxes(Us, 1, 2))
    ok = prob.status == "optimal"
    return Us, ok


def _project_pd(A, floor):
    w, V = np.linalg.eigh(0.5 * (A + np.swapaxes(A, -1, -2)))
    return (V * np.maximum(w, floor)[..., None, :]) @ np.swapaxes(V, -1, -2)


def _subgradient(S, reg, constant, restarts, iters, seed):
    T, p, _ = S.shape
    rng = np.random.default_rng(seed)
    off = ~np.eye(p, dtype=bool)
    floor = 1e-6
    best_val, best, stable = np.inf, None, False
    for _ in range(restarts):
        A = rng.standard_normal((p, p))
        U = np.repeat((np.eye(p) + 0.1 * (A @ A.T))[None], T, axis=0)
        if constant:
            U[:] = U[0]
        history = []
        for k in range(1, iters + 1):
            g = S - np.linalg.inv(U) + reg.lambda1 * np.sign(U) * off
            if T > 1:
                d = np.diff(U, axis=0)
                n = np.linalg.norm(d, axis=(1, 2))
                unit = np.where(n[:, None, None] > 0, d / np.where(n > 0, n, 1)[:, None, None], 0)
                g[1:] += reg.lambda2 * unit
                g[:-1] -= reg.lambda2 * unit
            if constant:
                g[:] = g.mean(axis=0)
            U = _project_pd(U - g / (np.linalg.norm(g) + 1e-12) * (0.5 / np.sqrt(k)), floor)
            val = gfgl_objective(U, S, reg)
            history.append(val)
            if val < best_val:
                best_val, best = val, U.copy()
        tail = np.array(history[-max(10, iters // 10):])
        stable |= bool(tail.max() - tail.min() <= 1e-4 * max(1.0, abs(best_val)))
    return best, stable


def oracle_gfgl(S, reg, method="conic", constant=False, restarts=5, iters=20_000,
                seed=0, enforce_size=True):
    """Minimise the GFGL objective by an independent route.

    Parameters
    ----------
    S : LocalCovarianceSeq or array (T, p, p)
    reg : RegularizationConfig
    method : {"conic", "subgradient"}
        ``conic`` solves the convex program with an interior-point solver;
        ``subgradient`` runs projected subgradient descent with step
        ``0.5 / sqrt(k)`` from several random starts and keeps the best
        point (an upper bound on the minimum).
    constant : bool
        Restrict to sequences with all matrices equal.

    Returns
    -------
    OracleResult
        ``converged`` is False (and a warning is issued) when the
        underlying method reports failure or has not stabilised.
    """
    S = _stack(S)
    _check_size(S, enforce_size)
    if method == "conic":
        U, ok = _conic(S, reg, constant)
    elif method == "subgradient":
        U, ok = _subgradient(S, reg, constant, restarts, iters, seed)
    else:
        raise ValueError(f"unknown oracle method {method!r}")
    if not ok:
        warnings.warn(f"{method} oracle did not stabilise", RuntimeWarning, stacklevel=2)
    U = _project_pd(U, 1e-12)
    return OracleResult(gfgl_objective(U, S, reg), U, ok, method)


def _glasso_newton(S, lam, theta0, max_iter=100, tol=1e-13):
    """Newton polish of a single graphical-lasso problem on a fixed
    support and sign pattern."""
    p = S.shape[0]
    iu = [(i, j) for i in range(p) for j in range(i, p)
          if i == j or theta0[i, j] != 0]
    sign = np.sign(theta0)

    def assemble(v):
        th = np.zeros((p, p))
        for (i, j), x in zip(iu, v):
            th[i, j] = th[j, i] = x
        return th

    def objective(th):
        w = np.linalg.eigvalsh(th)
        if w[0] <= 0:
            return np.inf
        off = ~np.eye(p, dtype=bool)
        return -np.log(w).sum() + np.sum(S * th) + lam * np.abs(th[off]).sum()

    v = np.array([theta0[i, j] for i, j in iu])
    for _ in range(max_iter):
        th = assemble(v)
        inv = np.linalg.inv(th)
        G = S - inv + lam * sign * (1 - np.eye(p))
        grad = np.array([G[i, j] if i == j else 2 * G[i, j] for i, j in iu])
        H = np.empty((len(iu), len(iu)))
        for a, (i, j) in enumerate(iu):
            for b, (k, l) in enumerate(iu):
                # second derivative of -log det along symmetric directions
                val = inv[i, k] * inv[l, j] + inv[i, l] * inv[k, j]
                if i == j:
                    val *= 0.5
                if k == l:
                    val *= 0.5
                H[a, b] = val
        step = np.linalg.solve(H, grad)
        t, f0 = 1.0, objective(th)
        while objective(assemble(v - t * step)) > f0 and t > 1e-12:
            t *= 0.5
        v = v - t * step
        if np.abs(grad).max() < tol:
            break
    return assemble(v)


def glasso_reference(S, lam):
    """Single-matrix graphical lasso solved to ~1e-12 stationarity.

    Minimises ``-log det U + tr(S U) + lam * sum_{i != j} |U_ij|``.
    Conic solve for the support, Newton polish on it.
    """
    S = np.asarray(S, dtype=float)
    from .core import RegularizationConfig

    res = oracle_gfgl(S[None], RegularizationConfig(lam, 0.0), enforce_size=False)
    theta = res.precisions[0].copy()
    # entries the conic solver left near zero belong to the zero pattern
    scale = np.abs(theta).max()
    theta[np.abs(theta) < 1e-6 * scale] = 0.0
    return _glasso_newton(S, lam, theta)
