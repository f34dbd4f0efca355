"""Domain types shared across the package and the GFGL objective.

Time indices exposed by :class:`Segmentation` are 1-based; every stacked
array is indexed from 0 along its leading time axis.
"""

from dataclasses import dataclass, field

import numpy as np


class NotPositiveDefiniteError(ValueError):
    """Raised when a matrix expected to be positive definite is not.

    The offending 1-based time index is stored in ``index``.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


def _as_stack(matrices, name):
    arr = np.asarray(matrices, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise ValueError(f"{name} must have shape (T, p, p), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class TimeSeries:
    """T x p observation matrix; row t is the observation at time t+1."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 1:
            data = data[None, :]
        if data.ndim != 2:
            raise ValueError(f"data must be 2-D (T, p), got ndim={data.ndim}")
        if data.shape[0] < 1:
            raise ValueError("data must contain at least one time point")
        if data.shape[1] < 2:
            raise ValueError("data must have at least two variables (p >= 2)")
        bad = np.argwhere(~np.isfinite(data))
        if bad.size:
            r, c = bad[0]
            raise ValueError(f"non-finite value at row {r + 1}, column {c + 1}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def T(self):
        return self.data.shape[0]

    @property
    def p(self):
        return self.data.shape[1]


@dataclass(frozen=True)
class LocalCovarianceSeq:
    """Stack of rank-one local covariances x x^T, shape (T, p, p)."""

    matrices: np.ndarray

    def __post_init__(self):
        arr = _as_stack(self.matrices, "matrices")
        if not np.array_equal(arr, np.swapaxes(arr, 1, 2)):
            arr = 0.5 * (arr + np.swapaxes(arr, 1, 2))
        arr.setflags(write=False)
        object.__setattr__(self, "matrices", arr)

    @property
    def T(self):
        return self.matrices.shape[0]

    @property
    def p(self):
        return self.matrices.shape[1]

    def pooled(self):
        """Average local covariance over all time points."""
        return self.matrices.mean(axis=0)


@dataclass(frozen=True)
class PrecisionSequence:
    """T symmetric positive-definite precision matrices.

    ``jump_indicators[t]`` is True when the difference variable linking
    time t (0-based) to t-1 is nonzero; entry 0 is always False.
    """

    matrices: np.ndarray
    jump_indicators: np.ndarray | None = None
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        arr = _as_stack(self.matrices, "matrices")
        if self.check:
            asym = np.abs(arr - np.swapaxes(arr, 1, 2)).max(axis=(1, 2))
            if np.any(asym > 1e-10):
                t = int(np.argmax(asym > 1e-10))
                raise ValueError(f"precision matrix at t={t + 1} is not symmetric")
            min_eig = np.linalg.eigvalsh(arr)[:, 0]
            if np.any(min_eig <= 0):
                t = int(np.argmax(min_eig <= 0))
                raise NotPositiveDefiniteError(
                    f"precision matrix at t={t + 1} is not positive definite "
                    f"(smallest eigenvalue {min_eig[t]:.3e})", index=t + 1)
        arr.setflags(write=False)
        object.__setattr__(self, "matrices", arr)
        if self.jump_indicators is not None:
            ji = np.asarray(self.jump_indicators, dtype=bool).copy()
            if ji.shape != (arr.shape[0],):
                raise ValueError("jump_indicators must have length T")
            ji.setflags(write=False)
            object.__setattr__(self, "jump_indicators", ji)

    @property
    def T(self):
        return self.matrices.shape[0]

    @property
    def p(self):
        return self.matrices.shape[1]

    def differences(self):
        """Gamma^(1) = Theta^(1), Gamma^(t) = Theta^(t) - Theta^(t-1)."""
        gam = np.empty_like(self.matrices)
        gam[0] = self.matrices[0]
        gam[1:] = self.matrices[1:] - self.matrices[:-1]
        return gam


@dataclass(frozen=True)
class Segmentation:
    """Ordered 1-based changepoints of a length-T sequence."""

    changepoints: tuple
    T: int

    def __post_init__(self):
        cps = tuple(int(c) for c in self.changepoints)
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if any(b <= a for a, b in zip(cps, cps[1:])):
            raise ValueError("changepoints must be strictly increasing")
        if cps and (cps[0] < 2 or cps[-1] > self.T):
            raise ValueError(f"changepoints must lie in [2, T={self.T}]")
        object.__setattr__(self, "changepoints", cps)

    @classmethod
    def from_separators(cls, separators):
        seps = [int(s) for s in separators]
        if len(seps) < 2 or seps[0] != 1:
            raise ValueError("separators must start at 1 and contain T+1")
        return cls(tuple(seps[1:-1]), seps[-1] - 1)

    @classmethod
    def from_labels(cls, labels):
        """Build from a per-time block label array (any hashable labels)."""
        labels = list(labels)
        cps = [t + 1 for t in range(1, len(labels)) if labels[t] != labels[t - 1]]
        return cls(tuple(cps), len(labels))

    @property
    def separators(self):
        return (1,) + self.changepoints + (self.T + 1,)

    @property
    def block_count(self):
        return len(self.changepoints) + 1

    @property
    def block_lengths(self):
        s = self.separators
        return tuple(b - a for a, b in zip(s, s[1:]))

    def labels(self):
        """0-based block label for each time point, shape (T,)."""
        out = np.zeros(self.T, dtype=int)
        for k, c in enumerate(self.changepoints, start=1):
            out[c - 1:] = k
        return out


@dataclass(frozen=True)
class RegularizationConfig:
    lambda1: float
    lambda2: float = 0.0

    def __post_init__(self):
        l1, l2 = float(self.lambda1), float(self.lambda2)
        if not np.isfinite(l1) or l1 <= 0:
            raise ValueError("lambda1 must be positive")
        if not np.isfinite(l2) or l2 < 0:
            raise ValueError("lambda2 must be nonnegative")
        object.__setattr__(self, "lambda1", l1)
        object.__setattr__(self, "lambda2", l2)

    @property
    def rho(self):
        return self.lambda2 / self.lambda1


@dataclass(frozen=True)
class GroundTruth:
    """Block covariances/precisions of a piecewise-constant GGM."""

    block_covariances: np.ndarray
    block_precisions: np.ndarray
    true_changepoints: tuple
    T: int
    edge_sets: tuple = None

    def __post_init__(self):
        cov = _as_stack(self.block_covariances, "block_covariances")
        prec = _as_stack(self.block_precisions, "block_precisions")
        if cov.shape != prec.shape:
            raise ValueError("covariance and precision stacks differ in shape")
        cps = tuple(int(c) for c in self.true_changepoints)
        if len(cps) + 1 != cov.shape[0]:
            raise ValueError("need exactly one block per changepoint plus one")
        Segmentation(cps, self.T)
        eye = np.eye(cov.shape[1])
        if np.abs(prec @ cov - eye).max() > 1e-8:
            raise ValueError("block_precisions are not inverses of block_covariances")
        edges = tuple(support_pairs(th) for th in prec)
        if self.edge_sets is not None:
            given = tuple(frozenset(map(tuple, e)) for e in self.edge_sets)
            if given != edges:
                raise ValueError("edge_sets inconsistent with block_precisions")
        for a in (cov, prec):
            a.setflags(write=False)
        object.__setattr__(self, "block_covariances", cov)
        object.__setattr__(self, "block_precisions", prec)
        object.__setattr__(self, "true_changepoints", cps)
        object.__setattr__(self, "edge_sets", edges)

    @property
    def segmentation(self):
        return Segmentation(self.true_changepoints, self.T)

    @property
    def p(self):
        return self.block_precisions.shape[1]

    @property
    def jump_sizes(self):
        """Frobenius norms of consecutive covariance differences."""
        return np.linalg.norm(np.diff(self.block_covariances, axis=0), axis=(1, 2))

    @property
    def eta_min(self):
        """Smallest covariance jump; None when there is a single block."""
        j = self.jump_sizes
        return float(j.min()) if j.size else None

    @property
    def max_jump(self):
        """Largest Frobenius distance between any two block covariances."""
        c = self.block_covariances
        d = np.linalg.norm(c[:, None] - c[None, :], axis=(2, 3))
        return float(d.max())

    @property
    def phi_max(self):
        return float(np.linalg.eigvalsh(self.block_covariances)[:, -1].max())

    def precision_at(self):
        """Per-time true precision stack, shape (T, p, p)."""
        return self.block_precisions[self.segmentation.labels()]

    def covariance_at(self):
        return self.block_covariances[self.segmentation.labels()]


def support_pairs(theta):
    """Off-diagonal pairs (i, j), i != j, with a nonzero entry (0-based)."""
    theta = np.asarray(theta)
    p = theta.shape[0]
    return frozenset((i, j) for i in range(p) for j in range(p)
                     if i != j and theta[i, j] != 0)


def local_covariances(X):
    """Rank-one local covariances S^(t) = x^(t) x^(t)^T.

    Parameters
    ----------
    X : TimeSeries or array-like, shape (T, p)

    Returns
    -------
    LocalCovarianceSeq
    """
    if not isinstance(X, TimeSeries):
        X = TimeSeries(X)
    x = X.data
    return LocalCovarianceSeq(x[:, :, None] * x[:, None, :])


def _as_precision_stack(U):
    if isinstance(U, PrecisionSequence):
        return U.matrices
    return _as_stack(U, "U")


def _as_cov_stack(S):
    if isinstance(S, LocalCovarianceSeq):
        return S.matrices
    return _as_stack(S, "S")


def gfgl_objective(U, S, reg):
    """Evaluate the GFGL cost of a precision sequence.

    Sum over t of ``-log det U_t + tr(S_t U_t)``, plus ``lambda1`` times the
    off-diagonal l1 norm of every U_t, plus ``lambda2`` times the Frobenius
    norm of every consecutive difference (diagonals included).
    """
    U = _as_precision_stack(U)
    S = _as_cov_stack(S)
    if U.shape != S.shape:
        raise ValueError(f"shape mismatch: U {U.shape} vs S {S.shape}")
    eig = np.linalg.eigvalsh(U)
    bad = np.flatnonzero(eig[:, 0] <= 0)
    if bad.size:
        t = int(bad[0])
        raise NotPositiveDefiniteError(
            f"U at t={t + 1} is not positive definite", index=t + 1)
    logdet = np.log(eig).sum(axis=1)
    loss = float(np.sum(-logdet + np.einsum("tij,tji->t", S, U)))
    p = U.shape[1]
    off = ~np.eye(p, dtype=bool)
    l1 = float(np.abs(U[:, off]).sum())
    fusion = float(np.linalg.norm(np.diff(U, axis=0), axis=(1, 2)).sum()) if len(U) > 1 else 0.0
    return loss + reg.lambda1 * l1 + reg.lambda2 * fusion
