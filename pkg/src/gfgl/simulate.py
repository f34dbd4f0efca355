"""Piecewise-constant Gaussian graphical model simulator."""

import itertools
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import GroundTruth, TimeSeries

GRAPH_MODELS = ("erdos_renyi", "chain", "identity")
STRUCTURE_CHANGES = ("redraw_all", "perturb_subset", "none")
MIN_EIGENVALUE = 0.05


@dataclass(frozen=True)
class SimSpec:
    """Settings for :func:`generate_truth`.

    ``edge_count`` (exact number of edges) takes precedence over
    ``edge_prob`` for Erdos-Renyi graphs. ``min_jump`` redraws the later
    blocks until every covariance jump has Frobenius norm at least that
    large.
    """

    p: int
    T: int
    true_changepoints: tuple = ()
    graph_model: str = "erdos_renyi"
    edge_count: int | None = None
    edge_prob: float | None = None
    base_diagonal: float = 1.0
    edge_weight_range: tuple = (0.3, 0.6)
    random_sign: bool = True
    structure_change: str = "redraw_all"
    perturb_edges: int = 1
    min_jump: float = 0.0
    max_redraws: int = 1000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "true_changepoints", tuple(int(c) for c in self.true_changepoints))
        object.__setattr__(self, "edge_weight_range", tuple(float(w) for w in self.edge_weight_range))
        if self.p < 2 or self.T < 1:
            raise ValueError("need p >= 2 and T >= 1")
        cps = self.true_changepoints
        if any(b <= a for a, b in zip(cps, cps[1:])) or (cps and (cps[0] < 2 or cps[-1] > self.T)):
            raise ValueError(f"changepoints must be strictly increasing within [2, {self.T}]")
        if self.graph_model not in GRAPH_MODELS:
            raise ValueError(f"graph_model must be one of {GRAPH_MODELS}")
        if self.structure_change not in STRUCTURE_CHANGES:
            raise ValueError(f"structure_change must be one of {STRUCTURE_CHANGES}")
        lo, hi = self.edge_weight_range
        if not 0 < lo <= hi:
            raise ValueError("edge_weight_range must satisfy 0 < low <= high")
        if self.base_diagonal < MIN_EIGENVALUE:
            raise ValueError(f"base_diagonal must be >= {MIN_EIGENVALUE}")
        if self.graph_model == "erdos_renyi" and self.edge_count is None and self.edge_prob is None:
            raise ValueError("erdos_renyi needs edge_count or edge_prob")

    def to_dict(self):
        d = asdict(self)
        d["true_changepoints"] = list(self.true_changepoints)
        d["edge_weight_range"] = list(self.edge_weight_range)
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown SimSpec keys: {sorted(unknown)}")
        return cls(**d)


def _all_pairs(p):
    return list(itertools.combinations(range(p), 2))


def _draw_edges(spec, rng):
    p = spec.p
    pairs = _all_pairs(p)
    if spec.graph_model == "identity":
        return []
    if spec.graph_model == "chain":
        return [(i, i + 1) for i in range(p - 1)]
    if spec.edge_count is not None:
        if spec.edge_count > len(pairs):
            raise ValueError(f"edge_count {spec.edge_count} exceeds {len(pairs)} possible pairs")
        idx = rng.choice(len(pairs), size=spec.edge_count, replace=False)
        return [pairs[i] for i in sorted(idx)]
    keep = rng.random(len(pairs)) < spec.edge_prob
    return [pr for pr, k in zip(pairs, keep) if k]


def _draw_weights(spec, n, rng):
    lo, hi = spec.edge_weight_range
    w = rng.uniform(lo, hi, size=n)
    if spec.random_sign:
        w *= rng.choice([-1.0, 1.0], size=n)
    return w


def _assemble(spec, edges, weights):
    theta = np.eye(spec.p) * spec.base_diagonal
    for (i, j), w in zip(edges, weights):
        theta[i, j] = theta[j, i] = w
    if np.linalg.eigvalsh(theta)[0] < MIN_EIGENVALUE:
        off = np.abs(theta - np.diag(np.diag(theta))).sum(axis=1)
        np.fill_diagonal(theta, off + spec.base_diagonal)
    if np.linalg.eigvalsh(theta)[0] < MIN_EIGENVALUE:
        raise ValueError("diagonal loading failed to make the precision matrix positive definite")
    return theta


def _perturb(spec, edges, weights, rng):
    edges, weights = list(edges), list(weights)
    m = min(spec.perturb_edges, len(edges))
    drop = set(rng.choice(len(edges), size=m, replace=False).tolist()) if m else set()
    edges = [e for i, e in enumerate(edges) if i not in drop]
    weights = [w for i, w in enumerate(weights) if i not in drop]
    free = [pr for pr in _all_pairs(spec.p) if pr not in set(edges)]
    add = min(spec.perturb_edges, len(free))
    for i in sorted(rng.choice(len(free), size=add, replace=False).tolist()):
        edges.append(free[i])
    weights.extend(_draw_weights(spec, add, rng))
    return edges, weights


def _blocks(spec, rng):
    edges = _draw_edges(spec, rng)
    weights = _draw_weights(spec, len(edges), rng)
    thetas = [_assemble(spec, edges, weights)]
    for _ in spec.true_changepoints:
        if spec.structure_change == "redraw_all":
            edges = _draw_edges(spec, rng)
            weights = _draw_weights(spec, len(edges), rng)
        elif spec.structure_change == "perturb_subset":
            edges, weights = _perturb(spec, edges, weights, rng)
        thetas.append(_assemble(spec, edges, weights))
    return np.stack(thetas)


def generate_truth(spec):
    """Draw block precisions/covariances for ``spec`` (deterministic per seed)."""
    rng = np.random.default_rng(spec.seed)
    for _ in range(max(1, spec.max_redraws)):
        thetas = _blocks(spec, rng)
        covs = np.linalg.inv(thetas)
        covs = 0.5 * (covs + np.swapaxes(covs, 1, 2))
        jumps = np.linalg.norm(np.diff(covs, axis=0), axis=(1, 2))
        if jumps.size == 0 or jumps.min() >= spec.min_jump:
            break
    else:
        raise ValueError(f"could not reach min_jump={spec.min_jump} "
                         f"in {spec.max_redraws} redraws")
    return _make_truth(thetas, spec.true_changepoints, spec.T)


def _make_truth(thetas, changepoints, T):
    """Build a GroundTruth whose precision blocks keep exact zeros."""
    thetas = np.asarray(thetas, dtype=float)
    covs = np.linalg.inv(thetas)
    covs = 0.5 * (covs + np.swapaxes(covs, 1, 2))
    return GroundTruth(covs, thetas, tuple(changepoints), T)


def sample_timeseries(truth, T=None, seed=0):
    """Draw x_t ~ N(0, Sigma_k) for the block containing each t."""
    T = truth.T if T is None else int(T)
    if T != truth.T:
        raise ValueError(f"truth covers T={truth.T}, requested T={T}")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((T, truth.p))
    chol = np.linalg.cholesky(truth.block_covariances)
    labels = truth.segmentation.labels()
    x = np.einsum("tij,tj->ti", chol[labels], z)
    return TimeSeries(x)


@dataclass(frozen=True)
class CovErrorExperiment:
    """Tail frequencies of ||mean(x x^T) - Sigma||_F against two bounds.

    ``tail_bound`` bounds P(error > eps) at each grid point (meaningful
    where ``tail_bound_in_domain``). ``fixed_threshold_bound`` bounds
    P(error >= fixed_threshold), observed as ``fixed_threshold_frequency``.
    """

    eps: np.ndarray
    frequency: np.ndarray
    tail_bound: np.ndarray
    tail_bound_in_domain: np.ndarray
    c_sigma: float
    fixed_threshold: float
    fixed_threshold_bound: float
    fixed_threshold_frequency: float
    n: int
    reps: int
    errors: np.ndarray = field(repr=False)

    @property
    def tail_bound_clipped(self):
        return np.minimum(1.0, self.tail_bound)


def frobenius_error_samples(sigma, n, reps, seed):
    """``reps`` draws of ||n^-1 sum x x^T - Sigma||_F for x ~ N(0, Sigma)."""
    sigma = np.asarray(sigma, dtype=float)
    rng = np.random.default_rng(seed)
    chol = np.linalg.cholesky(sigma)
    p = sigma.shape[0]
    errors = np.empty(reps)
    # chunk replicates to bound memory
    step = max(1, 2_000_000 // max(1, n * p))
    for a in range(0, reps, step):
        b = min(reps, a + step)
        x = rng.standard_normal((b - a, n, p)) @ chol.T
        emp = np.einsum("rni,rnj->rij", x, x) / n
        errors[a:b] = np.linalg.norm(emp - sigma, axis=(1, 2))
    return errors


def empirical_cov_error_experiment(block, n, reps, seed, eps=None):
    """Monte-Carlo exceedance of the empirical covariance error.

    The high-dimensional bound is ``4 p^2 exp(-n eps^2 / (2^7 c^2 p^2))``
    with ``c = 5 max_i Sigma_ii`` (Gaussian case). The standard-dimension
    bound states ``P(error >= 4 phi_max e^{-1/2} sqrt(p log n / n)) < 2 n^{-p/2}``
    and is evaluated at that single threshold.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if reps < 100:
        raise ValueError("reps must be >= 100")
    sigma = np.asarray(block, dtype=float)
    p = sigma.shape[0]
    errors = frobenius_error_samples(sigma, n, reps, seed)
    if eps is None:
        eps = np.linspace(0.0, 1.5 * errors.max(), 31)
    eps = np.asarray(eps, dtype=float)
    freq = np.array([np.mean(errors > e) if e > 0 else np.mean(errors >= e) for e in eps])
    c_sigma = 5.0 * float(np.max(np.diag(sigma)))
    bound1 = 4 * p ** 2 * np.exp(-n * eps ** 2 / (2 ** 7 * c_sigma ** 2 * p ** 2))
    in_domain = (eps > 0) & (eps < 2 ** 3 * c_sigma * p)
    phi_max = float(np.linalg.eigvalsh(sigma)[-1])
    thr2 = 4 * phi_max * np.exp(-0.5) * np.sqrt(p * np.log(n) / n)
    return CovErrorExperiment(
        eps=eps, frequency=freq, tail_bound=bound1, tail_bound_in_domain=in_domain,
        c_sigma=c_sigma, fixed_threshold=float(thr2),
        fixed_threshold_bound=float(2 * n ** (-p / 2)),
        fixed_threshold_frequency=float(np.mean(errors >= thr2)), n=n, reps=reps, errors=errors)
