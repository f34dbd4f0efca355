"""Changepoint and support metrics plus theory-condition diagnostics."""

from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from .core import GroundTruth
from .matops import operator_inf_norm
from .segmentation import max_overlap_alignment

MAX_FISHER_P = 60


class ChangepointErrors(NamedTuple):
    max_error: int | None
    count_error: int
    hausdorff_onesided: int


def changepoint_errors(est, truth):
    """Compare estimated and true changepoints.

    ``max_error`` pairs the k-th estimate with the k-th true changepoint and
    is ``None`` unless the counts agree. ``hausdorff_onesided`` is the
    largest distance from a true changepoint to its nearest estimate, with
    ``T`` standing in for infinity when nothing was estimated.
    """
    if est.T != truth.T:
        raise ValueError("segmentations cover different T")
    e = np.asarray(est.changepoints, dtype=int)
    t = np.asarray(truth.changepoints, dtype=int)
    count = len(e) - len(t)
    max_err = int(np.abs(e - t).max(initial=0)) if count == 0 else None
    if t.size == 0:
        haus = 0
    elif e.size == 0:
        haus = truth.T
    else:
        haus = int(np.abs(t[:, None] - e[None, :]).min(axis=1).max())
    return ChangepointErrors(max_err, count, haus)


class SignConsistency(NamedTuple):
    event: bool
    support_recovered: bool


def sign_consistency(theta_hat_block, theta_true_block, zero_tol=1e-9):
    """Sign agreement on the true support (diagonal included).

    An estimate within ``zero_tol`` of zero on the support counts as a
    wrong sign. ``support_recovered`` also requires every off-support entry
    to be within ``zero_tol`` of zero.
    """
    est = np.asarray(theta_hat_block, dtype=float)
    true = np.asarray(theta_true_block, dtype=float)
    if est.shape != true.shape:
        raise ValueError(f"shape mismatch {est.shape} vs {true.shape}")
    support = true != 0
    est_sign = np.where(np.abs(est) <= zero_tol, 0.0, np.sign(est))
    event = bool(np.all(est_sign[support] == np.sign(true[support])))
    clean = bool(np.all(np.abs(est[~support]) <= zero_tol))
    return SignConsistency(event, event and clean)


def fisher_matrix(theta0_block):
    """Kronecker product Sigma x Sigma with Sigma the inverse of the block.

    Rows and columns are indexed by the ordered pair ``(j, k)`` at position
    ``j * p + k``.
    """
    theta0 = np.asarray(theta0_block, dtype=float)
    p = theta0.shape[0]
    if p > MAX_FISHER_P:
        raise ValueError(f"p={p} too large for a dense p^2 x p^2 Fisher matrix "
                         f"(limit {MAX_FISHER_P})")
    sigma = np.linalg.inv(theta0)
    sigma = 0.5 * (sigma + sigma.T)
    return np.kron(sigma, sigma)


class Incoherence(NamedTuple):
    alpha: float
    K_Gamma0: float
    K_Sigma0: float


def incoherence_alpha(theta0_block):
    """Incoherence margin of a precision block.

    ``alpha = 1 - max_{e off support} || Gamma_{eM} Gamma_{MM}^{-1} ||_1``
    where M holds every ordered pair with a nonzero entry (the diagonal
    always included). An empty complement gives ``alpha = 1``.
    """
    theta0 = np.asarray(theta0_block, dtype=float)
    p = theta0.shape[0]
    gamma = fisher_matrix(theta0)
    support = (theta0 != 0) | np.eye(p, dtype=bool)
    m = np.flatnonzero(support.ravel())
    off = np.flatnonzero(~support.ravel())
    g_mm = gamma[np.ix_(m, m)]
    try:
        inv_mm = np.linalg.inv(g_mm)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("support block of the Fisher matrix is singular") from exc
    if off.size:
        rows = gamma[np.ix_(off, m)] @ inv_mm
        worst = float(np.abs(rows).sum(axis=1).max())
    else:
        worst = 0.0
    sigma = np.linalg.inv(theta0)
    return Incoherence(1.0 - worst, operator_inf_norm(inv_mm), operator_inf_norm(sigma))


def isserlis_covariance(sigma, edge_a, edge_b):
    """Exact Cov(X_j X_k, X_l X_m) = S_jl S_km + S_jm S_kl for Gaussian X."""
    s = np.asarray(sigma, dtype=float)
    (j, k), (l, m) = edge_a, edge_b
    return float(s[j, l] * s[k, m] + s[j, m] * s[k, l])


def kronecker_edge_covariance(gamma, edge_a, edge_b):
    """The same quantity read off the Kronecker Fisher matrix.

    A single entry of the Kronecker product only carries the first
    Isserlis term; the covariance of the symmetric edge variables adds the
    entry with the second pair transposed.
    """
    p = int(round(np.sqrt(gamma.shape[0])))
    (j, k), (l, m) = edge_a, edge_b
    return float(gamma[j * p + k, l * p + m] + gamma[j * p + k, m * p + l])


def edge_covariance_mc(sigma, edges_a, edges_b, n, seed):
    """Monte-Carlo covariance of products X_j X_k and X_l X_m.

    Returns one estimate per ``(edges_a[i], edges_b[i])`` pair.
    """
    sigma = np.asarray(sigma, dtype=float)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((int(n), sigma.shape[0])) @ np.linalg.cholesky(sigma).T
    out = []
    for (j, k), (l, m) in zip(edges_a, edges_b):
        za = x[:, j] * x[:, k]
        zb = x[:, l] * x[:, m]
        out.append(float(np.mean((za - za.mean()) * (zb - zb.mean()))))
    return np.array(out)


def _max_degree(theta):
    nz = (np.asarray(theta) != 0) & ~np.eye(theta.shape[0], dtype=bool)
    return int(nz.sum(axis=1).max())


def _theta_min(theta):
    off = ~np.eye(theta.shape[0], dtype=bool)
    vals = np.abs(theta[off & (theta != 0)])
    return float(vals.min()) if vals.size else None


def theory_constants(truth, lambda1=None, lambda2=None, delta_T=None, n_hat=None):
    """Quantities appearing in the consistency conditions.

    Returns a dict with per-block ``K_Sigma0``, ``K_Gamma0``, ``alpha``,
    ``degree`` and ``theta_min`` plus their worst cases, ``phi_max``,
    ``eta_min``, ``M`` (largest distance between any two block
    covariances), ``d_min`` and ``gamma_min = d_min / T``.

    Given ``lambda1`` and ``lambda2`` it adds the ratio diagnostics
    ``beta1 = eta_min gamma_min T / lambda2`` and
    ``beta2 = eta_min / (lambda1 sqrt(p(p-1)))``, and ``beta3`` when
    ``delta_T`` is also given. The informational sample-size constants
    ``v_C`` and ``v_theta`` use ``n_hat`` (default: the shortest true
    block) and are only reported when every alpha is positive.
    """
    if not isinstance(truth, GroundTruth):
        raise TypeError("truth must be a GroundTruth")
    p = truth.p
    blocks = []
    for theta in truth.block_precisions:
        inc = incoherence_alpha(theta) if p <= MAX_FISHER_P else None
        blocks.append({
            "K_Sigma0": operator_inf_norm(np.linalg.inv(theta)),
            "K_Gamma0": inc.K_Gamma0 if inc else None,
            "alpha": inc.alpha if inc else None,
            "degree": _max_degree(theta),
            "theta_min": _theta_min(theta),
        })
    seg = truth.segmentation
    d_min = int(min(seg.block_lengths))
    thetas = [b["theta_min"] for b in blocks if b["theta_min"] is not None]
    out = {
        "blocks": blocks,
        "phi_max": truth.phi_max,
        "eta_min": truth.eta_min,
        "M": truth.max_jump,
        "d": max(b["degree"] for b in blocks),
        "theta_min": min(thetas) if thetas else None,
        "K_Sigma0": max(b["K_Sigma0"] for b in blocks),
        "K_Gamma0": max(b["K_Gamma0"] for b in blocks) if blocks[0]["K_Gamma0"] is not None else None,
        "d_min": d_min,
        "gamma_min": d_min / truth.T,
    }
    eta = truth.eta_min
    if lambda1 is not None and lambda2 is not None and eta is not None:
        out["beta1"] = eta * out["gamma_min"] * truth.T / lambda2 if lambda2 > 0 else float("inf")
        out["beta2"] = eta / (lambda1 * np.sqrt(p * (p - 1)))
        if delta_T is not None:
            out["beta3"] = eta * truth.T * delta_T / lambda2 if lambda2 > 0 else float("inf")
    alphas = [b["alpha"] for b in blocks]
    if lambda1 is not None and lambda2 is not None and all(a is not None and a > 0 for a in alphas):
        rho = lambda2 / lambda1
        n = d_min if n_hat is None else n_hat
        alpha = min(alphas)
        k_s, k_g = out["K_Sigma0"], out["K_Gamma0"]
        factor = 1 + 16 / alpha * (1 + 2 * rho / n)
        out["v_C"] = 6 * factor * out["d"] * max(k_s * k_g, k_g ** 2 * k_s ** 3)
        if out["theta_min"] is not None:
            out["v_theta"] = 2 * k_s * factor / out["theta_min"]
    return out


@dataclass
class EvalReport:
    """Fit-versus-truth summary; serialise with :meth:`to_dict`."""

    cp_max_error: int | None
    cp_count_error: int
    hausdorff_onesided: int
    estimated_changepoints: list
    true_changepoints: list
    alignment: list
    sign_consistency: list
    support_recovered: list
    error_max: list
    error_frobenius: list
    incoherence_alpha: list
    constants: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        if d["cp_max_error"] is None:
            del d["cp_max_error"]
        return d


def evaluate_fit(block_estimates, est_seg, truth, lambda1=None, lambda2=None,
                 delta_T=None, zero_tol=1e-9):
    """Score estimated blocks against the truth.

    Each estimated block is compared with the true block it overlaps most.

    Parameters
    ----------
    block_estimates : array, shape (K_hat + 1, p, p)
    est_seg : Segmentation
    truth : GroundTruth
    """
    blocks = np.asarray(block_estimates, dtype=float)
    if blocks.shape[0] != est_seg.block_count:
        raise ValueError(f"{blocks.shape[0]} block estimates for {est_seg.block_count} blocks")
    true_seg = truth.segmentation
    errs = changepoint_errors(est_seg, true_seg)
    k_max, _ = max_overlap_alignment(est_seg, true_seg)
    signs, supp, e_max, e_fro = [], [], [], []
    for est, k in zip(blocks, k_max):
        target = truth.block_precisions[k]
        sc = sign_consistency(est, target, zero_tol)
        signs.append(sc.event)
        supp.append(sc.support_recovered)
        e_max.append(float(np.abs(est - target).max()))
        e_fro.append(float(np.linalg.norm(est - target)))
    consts = theory_constants(truth, lambda1, lambda2, delta_T,
                              n_hat=int(min(est_seg.block_lengths)))
    return EvalReport(
        cp_max_error=errs.max_error,
        cp_count_error=errs.count_error,
        hausdorff_onesided=errs.hausdorff_onesided,
        estimated_changepoints=list(est_seg.changepoints),
        true_changepoints=list(true_seg.changepoints),
        alignment=[int(k) for k in k_max],
        sign_consistency=signs,
        support_recovered=supp,
        error_max=e_max,
        error_frobenius=e_fro,
        incoherence_alpha=[b["alpha"] for b in consts["blocks"]],
        constants=consts,
    )

