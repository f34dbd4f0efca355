"""Warm-started regularisation paths over the fusion penalty."""

import logging
from dataclasses import dataclass, replace

import numpy as np

from .core import LocalCovarianceSeq, RegularizationConfig
from .solver import SolverConfig, admm_solve, warm_start_solve

logger = logging.getLogger(__name__)

TOP_MARGIN = 1e-3


def lambda2_upper(S):
    """A fusion penalty at and above which the fit is constant in time.

    With the pooled solution every jump multiplier reduces to a suffix sum
    of ``S_t - mean(S)``, so the largest Frobenius norm of those sums
    (a CUSUM statistic) is enough to certify the constant solution.
    """
    S = S.matrices if isinstance(S, LocalCovarianceSeq) else np.asarray(S, dtype=float)
    centred = S - S.mean(axis=0)
    suffix = np.cumsum(centred[::-1], axis=0)[::-1]
    if suffix.shape[0] < 2:
        return 0.0
    return float(np.linalg.norm(suffix[1:], axis=(1, 2)).max())


@dataclass(frozen=True)
class PathPoint:
    lambda1: float
    lambda2: float
    n_changepoints: int
    changepoints: tuple
    objective: float
    iterations: int
    converged: bool
    eps_primal: float
    eps_dual: float

    def to_dict(self):
        return {
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "n_changepoints": self.n_changepoints,
            "changepoints": list(self.changepoints),
            "objective": self.objective,
            "iterations": self.iterations,
            "converged": self.converged,
            "eps_primal": self.eps_primal,
            "eps_dual": self.eps_dual,
        }


@dataclass(frozen=True)
class PathResult:
    points: tuple
    target_k: int | None = None
    selected: PathPoint | None = None
    selected_result: object = None

    def to_dict(self):
        return {
            "points": [pt.to_dict() for pt in self.points],
            "target_k": self.target_k,
            "selected": None if self.selected is None else self.selected.to_dict(),
        }


def default_lambda2_grid(S, n_points=20, ratio=0.05):
    """Geometric grid from just above :func:`lambda2_upper` down to
    ``ratio`` times it.

    At the bound itself the constant fit sits on the boundary of the
    optimality region and round-off can leave a vanishing jump, hence the
    small margin.
    """
    top = lambda2_upper(S) * (1 + TOP_MARGIN)
    if top == 0:
        return np.zeros(1)
    return np.geomspace(top, top * ratio, int(n_points))


def _point(cfg, res):
    return PathPoint(
        lambda1=cfg.reg.lambda1, lambda2=cfg.reg.lambda2,
        n_changepoints=len(res.segmentation.changepoints),
        changepoints=res.segmentation.changepoints,
        objective=res.final_objective, iterations=res.iterations,
        converged=res.converged, eps_primal=res.eps_primal, eps_dual=res.eps_dual)


def lambda2_path(S, base_cfg, lambda2_grid=None, lambda1_grid=None, target_k=None,
                 refine_steps=0, search_steps=12, warm_start=True):
    """Solve along a decreasing fusion-penalty grid.

    Parameters
    ----------
    S : LocalCovarianceSeq or array (T, p, p)
    base_cfg : SolverConfig
        Supplies lambda1 (unless ``lambda1_grid`` is given) and all solver
        settings.
    lambda2_grid : array-like, optional
        Sorted into decreasing order. Defaults to :func:`default_lambda2_grid`.
    lambda1_grid : array-like, optional
        Outer loop over sparsity penalties; each runs its own lambda2 sweep.
    target_k : int, optional
        Report the largest lambda2 whose fit has exactly ``target_k``
        changepoints. A sweep stops once it overshoots the target.
    refine_steps : int
        Bisection steps between the last grid point below the target and
        the first one attaining it, pushing the selection towards the
        largest such lambda2.
    search_steps : int
        Bisection budget used when the grid jumps past ``target_k``.
    warm_start : bool
        Start each solve from the previous grid point's final state.

    Returns
    -------
    PathResult
    """
    if not isinstance(S, LocalCovarianceSeq):
        S = LocalCovarianceSeq(S)
    grid = default_lambda2_grid(S) if lambda2_grid is None else np.asarray(lambda2_grid, float)
    grid = np.sort(grid)[::-1]
    l1s = [base_cfg.reg.lambda1] if lambda1_grid is None else list(lambda1_grid)
    points, selected, sel_res = [], None, None
    for lam1 in l1s:
        state = None
        below = None
        for lam2 in grid:
            cfg = replace(base_cfg, reg=RegularizationConfig(float(lam1), float(lam2)))
            res = warm_start_solve(S, cfg, state) if (warm_start and state is not None) \
                else admm_solve(S, cfg)
            state = res.state
            pt = _point(cfg, res)
            points.append(pt)
            logger.info("lambda1=%.4g lambda2=%.4g K=%d iterations=%d",
                        lam1, lam2, pt.n_changepoints, pt.iterations)
            if target_k is None:
                continue
            if pt.n_changepoints < target_k:
                below = (pt, res)
                continue
            if pt.n_changepoints == target_k:
                hit = _refine(S, base_cfg, lam1, below, (pt, res), target_k, refine_steps)
            else:
                hit = _bracket(S, base_cfg, lam1, below, (pt, res), target_k,
                               search_steps, refine_steps)
            if hit is not None and (selected is None or hit[0].lambda2 > selected.lambda2):
                selected, sel_res = hit
            break
    return PathResult(tuple(points), target_k, selected, sel_res)


def _refine(S, base_cfg, lam1, below, hit, target_k, steps):
    """Bisect in lambda2 between a fit with too few changepoints and one
    with exactly ``target_k``."""
    if below is None or steps <= 0:
        return hit
    lo, hi = hit[0].lambda2, below[0].lambda2
    state = below[1].state
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        cfg = replace(base_cfg, reg=RegularizationConfig(float(lam1), float(mid)))
        res = warm_start_solve(S, cfg, state)
        k = len(res.segmentation.changepoints)
        if k == target_k:
            hit, lo = (_point(cfg, res), res), mid
        elif k < target_k:
            hi, state = mid, res.state
        else:
            lo = mid
    return hit


def _bracket(S, base_cfg, lam1, below, over, target_k, steps, refine):
    """Bisect between a fit below and a fit above ``target_k`` changepoints
    looking for one with exactly ``target_k``; None when the budget runs
    out."""
    if below is None:
        return None
    hi, lo = below[0].lambda2, over[0].lambda2
    state = below[1].state
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        cfg = replace(base_cfg, reg=RegularizationConfig(float(lam1), float(mid)))
        res = warm_start_solve(S, cfg, state)
        k = len(res.segmentation.changepoints)
        if k == target_k:
            return _refine(S, base_cfg, lam1, below, (_point(cfg, res), res), target_k, refine)
        if k < target_k:
            hi, state, below = mid, res.state, (_point(cfg, res), res)
        else:
            lo = mid
    return None


def select_for_target(S, lambda1, target_k, n_points=20, ratio=0.05, refine_steps=0,
                      **solver_kwargs):
    """Target-K selection on the default grid for a fixed ``lambda1``.

    Returns the :class:`PathResult`; ``selected`` is None when no fit with
    exactly ``target_k`` changepoints was found.
    """
    cfg = SolverConfig(RegularizationConfig(lambda1, 0.0), **solver_kwargs)
    return lambda2_path(S, cfg, default_lambda2_grid(S, n_points, ratio),
                        target_k=target_k, refine_steps=refine_steps)
