import numpy as np

from gfgl.core import local_covariances


def random_instance(seed, T, p):
    """Rank-one local covariances from a standard normal series."""
    rng = np.random.default_rng(seed)
    return local_covariances(rng.standard_normal((T, p)))


def random_spd(rng, p, scale=1.0):
    A = rng.standard_normal((p, p))
    return scale * (A @ A.T / p + np.eye(p))


def scaled_instance(seed, T, p, low=0.7, high=1.5):
    """Rank-one local covariances whose entries stay away from zero.

    Tiny observed variances put the optimum at very large precisions,
    where ADMM with unit step weights needs many iterations.
    """
    rng = np.random.default_rng(seed)
    X = rng.choice([-1.0, 1.0], (T, p)) * rng.uniform(low, high, (T, p))
    return local_covariances(X)
