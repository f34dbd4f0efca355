"""Multi-block ADMM for the group-fused graphical lasso.

The augmented Lagrangian splits the precision sequence into a primal copy
``U`` (carries the log-det loss), an l1 copy ``V1``, a lagged copy ``V2``
and the jump variables ``W`` with the consensus constraints

    U[t] = V1[t]                        t = 0 .. T-1
    U[t] = V2[t]                        t = 0 .. T-2
    V1[t] - V2[t-1] = W[t]              t = 1 .. T-1

Each sweep minimises the Lagrangian over ``(U, W)`` and then jointly over
``(V1, V2)``, followed by scaled dual ascent. Arrays are 0-based in time;
``V2[T-1]`` and ``W[0]`` are unused and stay at their initial values.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .core import (
    LocalCovarianceSeq,
    PrecisionSequence,
    RegularizationConfig,
    Segmentation,
    gfgl_objective,
)
from .matops import (
    group_soft_threshold,
    logdet_prox_eigenvalue_map,
    soft_threshold_offdiag,
    symmetrize,
)

logger = logging.getLogger(__name__)


class SolverError(RuntimeError):
    pass


class NumericalFailureError(SolverError):
    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class UnboundedObjectiveError(SolverError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    reg: RegularizationConfig
    gamma_v1: float = 1.0
    gamma_v2: float = 1.0
    gamma_w: float = 1.0
    tol_primal: float = 1e-5
    tol_dual: float = 1e-5
    max_iter: int = 2000
    record_history: bool = False
    threads: int = 1
    # >0: after this many iterations with an unchanged jump pattern, jump to
    # the exact solution restricted to that pattern (see _block_restart)
    block_restart: int = 0
    # iterates with an eigenvalue above this are treated as divergent
    divergence_bound: float = 1e10
    # residual balancing: every ``adapt_every`` iterations rescale all step
    # weights by ``adapt_factor`` when one residual exceeds ``adapt_ratio``
    # times the other; stops after ``adapt_limit`` iterations
    adapt_every: int = 10
    adapt_ratio: float = 10.0
    adapt_factor: float = 2.0
    adapt_limit: int = 10_000

    def __post_init__(self):
        for name in ("gamma_v1", "gamma_v2", "gamma_w", "tol_primal", "tol_dual"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v}")
        if int(self.max_iter) < 1:
            raise ValueError("max_iter must be a positive integer")
        if int(self.threads) < 1:
            raise ValueError("threads must be >= 1")
        if int(self.adapt_every) < 0 or self.adapt_ratio <= 1 or self.adapt_factor <= 1:
            raise ValueError("need adapt_every >= 0, adapt_ratio > 1 and adapt_factor > 1")

    @classmethod
    def from_lambdas(cls, lambda1, lambda2, **kwargs):
        return cls(RegularizationConfig(lambda1, lambda2), **kwargs)


@dataclass
class SolverState:
    """All ADMM iterates; duals are in scaled form (multiplier / gamma)."""

    U: np.ndarray
    V1: np.ndarray
    V2: np.ndarray
    W: np.ndarray
    dual_v1: np.ndarray
    dual_v2: np.ndarray
    dual_w: np.ndarray
    iteration: int = 0
    eps_primal: float = math.inf
    eps_dual: float = math.inf

    @classmethod
    def cold(cls, T, p):
        eye = np.broadcast_to(np.eye(p), (T, p, p))
        zeros = np.zeros((T, p, p))
        return cls(
            U=eye.copy(), V1=eye.copy(), V2=eye.copy(), W=zeros.copy(),
            dual_v1=zeros.copy(), dual_v2=zeros.copy(), dual_w=zeros.copy())

    @property
    def shape(self):
        return self.U.shape

    def copy(self):
        return replace(self, **{k: getattr(self, k).copy() for k in _ARRAYS})

    def validate(self, T=None, p=None):
        shape = self.U.shape
        if len(shape) != 3 or shape[1] != shape[2]:
            raise ValueError(f"state arrays must be (T, p, p), got {shape}")
        if T is not None and shape != (T, p, p):
            raise ValueError(f"state shape {shape} does not match data ({T}, {p}, {p})")
        for k in _ARRAYS:
            if getattr(self, k).shape != shape:
                raise ValueError(f"state array {k} has shape {getattr(self, k).shape}, "
                                 f"expected {shape}")


_ARRAYS = ("U", "V1", "V2", "W", "dual_v1", "dual_v2", "dual_w")


@dataclass(frozen=True)
class SolveResult:
    precisions: PrecisionSequence
    segmentation: Segmentation
    iterations: int
    converged: bool
    final_objective: float
    eps_primal: float
    eps_dual: float
    state: SolverState = field(repr=False)
    residual_history: tuple = None
    objective_history: tuple = None

    @property
    def jump_norms(self):
        """Frobenius norm of each jump variable; entry 0 is always 0."""
        return np.linalg.norm(self.state.W, axis=(1, 2))


def compute_residuals(state, previous=None, cfg=None):
    """Primal and dual residuals of an ADMM state.

    ``eps_primal`` is the largest Frobenius violation of any consensus
    constraint. ``eps_dual`` is the largest gamma-weighted Frobenius change
    of V1, V2 or W relative to ``previous`` (0 when no previous state).
    """
    U, V1, V2, W = state.U, state.V1, state.V2, state.W
    fro = lambda a: np.sqrt(np.sum(a * a, axis=(-2, -1)))  # noqa: E731
    parts = [fro(U - V1).max()]
    if U.shape[0] > 1:
        parts.append(fro(U[:-1] - V2[:-1]).max())
        parts.append(fro(V1[1:] - V2[:-1] - W[1:]).max())
    eps_primal = float(max(parts))
    if previous is None:
        return eps_primal, 0.0
    g1, g2, gw = (1.0, 1.0, 1.0) if cfg is None else (cfg.gamma_v1, cfg.gamma_v2, cfg.gamma_w)
    dual = [g1 * fro(V1 - previous.V1).max()]
    if U.shape[0] > 1:
        dual.append(g2 * fro(V2[:-1] - previous.V2[:-1]).max())
        dual.append(gw * fro(W[1:] - previous.W[1:]).max())
    return eps_primal, float(max(dual))


def _chunks(T, n):
    bounds = np.linspace(0, T, min(n, T) + 1).astype(int)
    return [(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


class _PrimalUpdater:
    """Per-time log-det proximal step, optionally split across threads.

    Every matrix is decomposed independently, so chunking the time axis
    leaves each result bitwise unchanged.
    """

    def __init__(self, threads):
        self.threads = threads
        self.pool = ThreadPoolExecutor(threads) if threads > 1 else None

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()

    @staticmethod
    def _block(A, weight):
        eta, L = np.linalg.eigh(A)
        u = logdet_prox_eigenvalue_map(eta, weight)
        return symmetrize((L * u[:, None, :]) @ np.swapaxes(L, 1, 2))

    def __call__(self, A, weight):
        """``weight`` is a scalar or a (T, 1) column of quadratic weights."""
        if self.pool is None or A.shape[0] < 2:
            return self._block(A, weight)
        out = np.empty_like(A)
        weight = np.broadcast_to(weight, (A.shape[0], 1))

        def work(bounds):
            a, b = bounds
            out[a:b] = self._block(A[a:b], weight[a:b])

        list(self.pool.map(work, _chunks(A.shape[0], self.threads)))
        return out


def _admm_step(state, S, cfg, primal, weights=None):
    """One sweep. ``weights`` (T,) scales the loss and l1 term per time
    point; None means unit weights."""
    lam1, lam2 = cfg.reg.lambda1, cfg.reg.lambda2
    g1, g2, gw = cfg.gamma_v1, cfg.gamma_v2, cfg.gamma_w
    U, V1, V2, W = state.U, state.V1, state.V2, state.W
    D1, D2, DW = state.dual_v1, state.dual_v2, state.dual_w
    T = U.shape[0]

    # U: -w inv(U) + w S + g1 (U - V1 + D1) + g2 (U - V2 + D2) = 0. The last
    # time point has no V2 term; the current U stands in for it, which adds
    # a proximal term and leaves fixed points unchanged.
    target = g1 * (V1 - D1)
    target[:-1] += g2 * (V2[:-1] - D2[:-1])
    target[-1] += g2 * U[-1]
    if weights is None:
        U_new = primal(S - target, g1 + g2)
        l1_scale = lam1
    else:
        w = weights[:, None, None]
        U_new = primal(S - target / w, (g1 + g2) / weights[:, None])
        l1_scale = lam1 * weights[:, None, None]

    W_new = np.zeros_like(W)
    V1_new = np.empty_like(V1)
    V2_new = V2.copy()
    x = U_new + D1
    kappa = np.broadcast_to(l1_scale, (T, 1, 1))
    V1_new[0] = _soft_offdiag(x[0], kappa[0] / g1)
    if T > 1:
        W_new[1:] = group_soft_threshold(V1[1:] - V2[:-1] + DW[1:], lam2 / gw)
        # joint (V1[t], V2[t-1]) minimisation: eliminate V2 in closed form,
        # soft-threshold V1, then back-substitute
        y = U_new[:-1] + D2[:-1]
        z = W_new[1:] - DW[1:]
        h = g2 * gw / (g2 + gw)
        mix = (g1 * x[1:] + h * (y + z)) / (g1 + h)
        V1_new[1:] = _soft_offdiag(mix, kappa[1:] / (g1 + h))
        V2_new[:-1] = (g2 * y + gw * (V1_new[1:] - z)) / (g2 + gw)

    D1_new = D1 + U_new - V1_new
    D2_new = D2.copy()
    DW_new = DW.copy()
    if T > 1:
        D2_new[:-1] += U_new[:-1] - V2_new[:-1]
        DW_new[1:] += V1_new[1:] - V2_new[:-1] - W_new[1:]
    return SolverState(U_new, V1_new, V2_new, W_new, D1_new, D2_new, DW_new,
                       iteration=state.iteration + 1)


def _soft_offdiag(A, kappa):
    # kappa may be an array broadcastable against A (per-time thresholds)
    if np.ndim(kappa) == 0:
        return soft_threshold_offdiag(A, float(kappa))
    out = np.sign(A) * np.maximum(np.abs(A) - kappa, 0.0)
    idx = np.arange(A.shape[-1])
    out[..., idx, idx] = A[..., idx, idx]
    return out


def _check_finite(state, it):
    for k in _ARRAYS:
        if not np.all(np.isfinite(getattr(state, k))):
            raise NumericalFailureError(
                f"non-finite value in {k} at iteration {it}", iteration=it)


def _extract_precisions(state):
    """Block-constant precision sequence read off V1 and the jump pattern.

    V1 is averaged over each segment delimited by nonzero W. Zeros shared
    by all V1 in a segment remain exact zeros.
    """
    V1 = symmetrize(state.V1)
    T, p, _ = V1.shape
    jumps = np.zeros(T, dtype=bool)
    if T > 1:
        jumps[1:] = np.any(state.W[1:] != 0, axis=(1, 2))
    labels = np.cumsum(jumps)
    theta = np.empty_like(V1)
    for k in range(labels[-1] + 1):
        members = labels == k
        theta[members] = V1[members].mean(axis=0)
    min_eig = np.linalg.eigvalsh(theta)[:, 0]
    if np.any(min_eig < -1e-8):
        t = int(np.argmax(min_eig < -1e-8))
        raise NumericalFailureError(
            f"estimated precision at t={t + 1} is indefinite "
            f"(smallest eigenvalue {min_eig[t]:.3e})", iteration=state.iteration)
    fix = min_eig <= 0
    if np.any(fix):
        theta[fix] += 1e-8 * np.eye(p)
    cps = tuple(int(t) + 1 for t in np.flatnonzero(jumps))
    return PrecisionSequence(theta, jump_indicators=jumps), Segmentation(cps, T)


def _as_cov(S):
    if isinstance(S, LocalCovarianceSeq):
        return S
    return LocalCovarianceSeq(S)


def _jump_pattern(state):
    jumps = np.zeros(state.W.shape[0], dtype=bool)
    if jumps.size > 1:
        jumps[1:] = np.any(state.W[1:] != 0, axis=(1, 2))
    return jumps


def state_from_solution(S, theta, R1, cfg):
    """ADMM state whose duals certify ``theta`` through the stationarity
    equations.

    ``R1`` holds the l1 subgradients (off-diagonal, in [-1, 1]). The jump
    multipliers follow from suffix sums of the per-time gradients, so if
    ``theta`` is optimal the returned state is an ADMM fixed point.
    """
    S = _as_cov(S).matrices
    theta = np.asarray(theta, dtype=float)
    lam1 = cfg.reg.lambda1
    g1, g2, gw = cfg.gamma_v1, cfg.gamma_v2, cfg.gamma_w
    grad = S - np.linalg.inv(theta) + lam1 * R1
    yw = -np.cumsum(grad[::-1], axis=0)[::-1]
    yw[0] = 0.0
    W = np.zeros_like(theta)
    W[1:] = theta[1:] - theta[:-1]
    D2 = np.zeros_like(theta)
    D2[:-1] = -yw[1:] / g2
    return SolverState(
        U=theta.copy(), V1=theta.copy(), V2=theta.copy(), W=W,
        dual_v1=(lam1 * R1 + yw) / g1, dual_v2=D2, dual_w=yw / gw)


def _solve_restricted(S, jumps, cfg, tol=1e-10, max_iter=5_000):
    """Exact minimiser over sequences that are constant between the marked
    jumps. Returns ``(theta_blocks, R1_blocks, labels)`` or None.
    """
    T, p, _ = S.shape
    labels = np.cumsum(jumps)
    B = labels[-1] + 1
    counts = np.bincount(labels, minlength=B).astype(float)
    block_S = np.zeros((B, p, p))
    np.add.at(block_S, labels, S)
    block_S /= counts[:, None, None]
    # dividing the restricted objective by T keeps the weights O(1)
    weights = counts / T
    sub_cfg = replace(cfg, reg=RegularizationConfig(cfg.reg.lambda1, cfg.reg.lambda2 / T),
                      tol_primal=tol, tol_dual=tol, max_iter=max_iter, block_restart=0,
                      record_history=False, threads=1)
    state = SolverState.cold(B, p)
    primal = _PrimalUpdater(1)
    base, scale = sub_cfg, 1.0
    with np.errstate(all="ignore"):
        for it in range(1, max_iter + 1):
            new = _admm_step(state, block_S, sub_cfg, primal, weights)
            eps_p, eps_d = compute_residuals(new, state, sub_cfg)
            state = new
            if not np.isfinite(eps_p + eps_d):
                return None
            if eps_p <= tol and eps_d <= tol:
                break
            sub_cfg, scale = _balance(sub_cfg, base, scale, state, eps_p, eps_d, it)
    theta_b = symmetrize(state.V1)
    if np.linalg.eigvalsh(theta_b)[:, 0].min() <= 0:
        return None
    # l1 subgradients recovered from the block multipliers
    y1 = sub_cfg.gamma_v1 * state.dual_v1
    yw = sub_cfg.gamma_w * state.dual_w
    yw[0] = 0.0
    R1_b = (y1 - yw) / (cfg.reg.lambda1 * weights[:, None, None])
    off = ~np.eye(p, dtype=bool)
    R1_b = np.where(theta_b != 0, np.sign(theta_b), np.clip(R1_b, -1.0, 1.0)) * off
    return theta_b, R1_b, labels


def _block_restart(S, jumps, cfg, max_rounds=25):
    """Working-set jump to a (near) fixed point.

    Starting from ``jumps``, repeatedly solve the restricted problem, lift
    it to a full ADMM state and add, within every block whose implied
    fusion subgradient leaves the unit ball, the time point of largest
    violation. Stops when the lifted state certifies itself or no new
    jump can be added; the caller resumes plain ADMM from the result.
    """
    lam2 = cfg.reg.lambda2
    jumps = jumps.copy()
    lifted = None
    for _ in range(max_rounds):
        solved = _solve_restricted(S, jumps, cfg)
        if solved is None:
            break
        theta_b, R1_b, labels = solved
        lifted = state_from_solution(S, theta_b[labels], R1_b[labels], cfg)
        if lam2 == 0:
            break
        # jumps merged away by the restricted solve
        active = np.zeros_like(jumps)
        active[1:] = np.any(lifted.W[1:] != 0, axis=(1, 2))
        ratio = np.linalg.norm(cfg.gamma_w * lifted.dual_w, axis=(1, 2)) / lam2
        ratio[active] = 0.0
        ratio[0] = 0.0
        if ratio.max() <= 1.0 + 1e-9:
            break
        new = active.copy()
        block = np.cumsum(active)
        for k in np.unique(block[ratio > 1.0 + 1e-9]):
            members = np.flatnonzero(block == k)
            new[members[np.argmax(ratio[members])]] = True
        if np.array_equal(new, jumps):
            break
        jumps = new
    return lifted


def _scaled(cfg, scale):
    return replace(cfg, gamma_v1=cfg.gamma_v1 * scale, gamma_v2=cfg.gamma_v2 * scale,
                   gamma_w=cfg.gamma_w * scale)


def _rescale_duals(state, factor):
    # scaled duals are multiplier / gamma, so they shrink as gamma grows
    for k in ("dual_v1", "dual_v2", "dual_w"):
        setattr(state, k, getattr(state, k) / factor)


def _balance(cfg, base, scale, state, eps_p, eps_d, it):
    """Residual balancing; returns the (possibly rescaled) config and scale."""
    if not cfg.adapt_every or it % cfg.adapt_every or it > cfg.adapt_limit:
        return cfg, scale
    # compare residuals relative to their tolerances
    rp, rd = eps_p / cfg.tol_primal, eps_d / cfg.tol_dual
    if rp > cfg.adapt_ratio * rd:
        factor = cfg.adapt_factor
    elif rd > cfg.adapt_ratio * rp:
        factor = 1.0 / cfg.adapt_factor
    else:
        return cfg, scale
    _rescale_duals(state, factor)
    return _scaled(base, scale * factor), scale * factor


def _check_bounded(S, cfg):
    """Raise when the objective has no minimiser.

    With lambda1 > 0 the only unbounded directions grow a diagonal entry
    that no data point penalises: a variable with zero observed variance
    at some time point (lambda2 = 0) or at every time point (lambda2 > 0).
    """
    diag = np.diagonal(S, axis1=1, axis2=2)
    dead = np.all(diag == 0, axis=0) if cfg.reg.lambda2 > 0 else np.any(diag == 0, axis=0)
    if np.any(dead):
        j = int(np.argmax(dead))
        raise UnboundedObjectiveError(
            f"objective is unbounded below: variable {j + 1} has zero observed variance")


def warm_start_solve(S, cfg, init):
    """Run the ADMM from ``init`` (which is not modified)."""
    S = _as_cov(S)
    T, p = S.T, S.p
    init.validate(T, p)
    _check_bounded(S.matrices, cfg)
    state = init.copy()
    state.iteration = 0
    data = S.matrices
    primal = _PrimalUpdater(int(cfg.threads))
    res_hist, obj_hist = [], []
    converged = False
    eps_p = eps_d = math.inf
    pattern, stable, restarts = None, 0, {}
    base, scale = cfg, 1.0
    try:
        for it in range(1, int(cfg.max_iter) + 1):
            new = _admm_step(state, data, cfg, primal)
            _check_finite(new, it)
            if np.abs(new.U).max() > cfg.divergence_bound:
                raise UnboundedObjectiveError(
                    f"iterates diverged at iteration {it}; the objective is likely "
                    "unbounded below (a variable with zero observed variance?)")
            eps_p, eps_d = compute_residuals(new, state, cfg)
            new.eps_primal, new.eps_dual = eps_p, eps_d
            state = new
            if cfg.record_history:
                res_hist.append((eps_p, eps_d))
                obj_hist.append(gfgl_objective(state.U, data, cfg.reg))
            if eps_p <= cfg.tol_primal and eps_d <= cfg.tol_dual:
                converged = True
                break
            cfg, scale = _balance(cfg, base, scale, state, eps_p, eps_d, it)
            if cfg.block_restart:
                jumps = _jump_pattern(state)
                key = jumps.tobytes()
                stable = stable + 1 if key == pattern else 0
                pattern = key
                if stable >= cfg.block_restart and restarts.get(key, 0) < 3:
                    restarts[key] = restarts.get(key, 0) + 1
                    lifted = _block_restart(data, jumps, cfg)
                    logger.debug("block restart at iteration %d with %d jumps (%s)",
                                 it, int(jumps.sum()), "ok" if lifted is not None else "failed")
                    if lifted is not None:
                        lifted.iteration = state.iteration
                        state = lifted
                    stable = 0
    finally:
        primal.close()
    # hand back duals in the caller's scaling so the state can warm-start
    _rescale_duals(state, 1.0 / scale)
    cfg = base
    if not converged:
        logger.warning("ADMM stopped after %d iterations without converging "
                       "(eps_primal=%.3e, eps_dual=%.3e)", state.iteration, eps_p, eps_d)
    precisions, seg = _extract_precisions(state)
    return SolveResult(
        precisions=precisions,
        segmentation=seg,
        iterations=state.iteration,
        converged=converged,
        final_objective=gfgl_objective(precisions, data, cfg.reg),
        eps_primal=eps_p,
        eps_dual=eps_d,
        state=state,
        residual_history=tuple(res_hist) if cfg.record_history else None,
        objective_history=tuple(obj_hist) if cfg.record_history else None,
    )


def admm_solve(S, cfg):
    """Minimise the GFGL objective from the identity cold start.

    Parameters
    ----------
    S : LocalCovarianceSeq or array-like, shape (T, p, p)
    cfg : SolverConfig

    Returns
    -------
    SolveResult
        Precisions are exactly sparse and exactly constant between the
        detected changepoints.
    """
    S = _as_cov(S)
    return warm_start_solve(S, cfg, SolverState.cold(S.T, S.p))
