"""Changepoint extraction, block aggregation and block alignment."""

import numpy as np

from .core import PrecisionSequence, Segmentation


def extract_changepoints(theta, tol_cp=1e-6):
    """Changepoints {t >= 2 : ||Theta_t - Theta_{t-1}||_F > tol_cp}.

    With ``tol_cp == 0`` and jump indicators available, those are used
    verbatim.
    """
    if tol_cp < 0:
        raise ValueError("tol_cp must be nonnegative")
    if not isinstance(theta, PrecisionSequence):
        theta = PrecisionSequence(theta, check=False)
    T = theta.T
    if tol_cp == 0 and theta.jump_indicators is not None:
        jumps = theta.jump_indicators.copy()
        jumps[0] = False
    else:
        jumps = np.zeros(T, dtype=bool)
        if T > 1:
            jumps[1:] = np.linalg.norm(np.diff(theta.matrices, axis=0), axis=(1, 2)) > tol_cp
    return Segmentation(tuple(int(t) + 1 for t in np.flatnonzero(jumps)), T)


def block_precisions(theta, seg):
    """Element-wise mean of Theta_t over each block of ``seg``.

    Returns an array of shape (K + 1, p, p).
    """
    mats = theta.matrices if isinstance(theta, PrecisionSequence) else np.asarray(theta)
    if mats.shape[0] != seg.T:
        raise ValueError(f"segmentation covers T={seg.T} but theta has {mats.shape[0]} points")
    s = seg.separators
    return np.stack([mats[a - 1:b - 1].mean(axis=0) for a, b in zip(s, s[1:])])


def overlap_matrix(est, truth):
    """``n[k, l]`` = number of time points shared by estimated block k and
    true block l."""
    if est.T != truth.T:
        raise ValueError("segmentations cover different T")
    e, t = est.separators, truth.separators
    out = np.zeros((len(e) - 1, len(t) - 1), dtype=int)
    for k in range(len(e) - 1):
        for l in range(len(t) - 1):
            out[k, l] = max(min(e[k + 1], t[l + 1]) - max(e[k], t[l]), 0)
    return out


def max_overlap_alignment(est, truth):
    """Map each estimated block to the true block it overlaps most.

    Ties go to the lowest true-block index. Returns ``(k_max, overlaps)``
    where ``k_max[k]`` is 0-based.
    """
    n = overlap_matrix(est, truth)
    # argmax returns the first maximum, i.e. the lowest index on ties
    return np.argmax(n, axis=1), n
