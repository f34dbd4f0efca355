import numpy as np
import pytest

from gfgl.core import (
    GroundTruth,
    LocalCovarianceSeq,
    NotPositiveDefiniteError,
    PrecisionSequence,
    RegularizationConfig,
    Segmentation,
    TimeSeries,
    gfgl_objective,
    local_covariances,
    support_pairs,
)

from helpers import random_spd


def test_outer_product_by_hand():
    S = local_covariances([[1.0, 2.0], [0.0, 0.0]]).matrices
    np.testing.assert_array_equal(S[0], [[1, 2], [2, 4]])
    np.testing.assert_array_equal(S[1], np.zeros((2, 2)))


def test_local_covariances_rank_and_trace(rng):
    X = rng.standard_normal((5, 3))
    S = local_covariances(X).matrices
    for t in range(5):
        assert np.linalg.matrix_rank(S[t]) <= 1
        assert np.trace(S[t]) == pytest.approx(X[t] @ X[t])
        np.testing.assert_array_equal(S[t], S[t].T)


@pytest.mark.parametrize("bad, where", [
    ([[1.0, np.nan], [0.0, 1.0]], "row 1, column 2"),
    ([[1.0, 2.0], [np.inf, 1.0]], "row 2, column 1"),
])
def test_timeseries_rejects_non_finite(bad, where):
    with pytest.raises(ValueError, match=where):
        TimeSeries(bad)


def test_timeseries_needs_two_variables():
    with pytest.raises(ValueError):
        TimeSeries(np.zeros((4, 1)))


def test_objective_identity():
    T, p = 4, 3
    eye = np.broadcast_to(np.eye(p), (T, p, p)).copy()
    for reg in (RegularizationConfig(0.1, 0.0), RegularizationConfig(5.0, 7.0)):
        assert gfgl_objective(eye, eye, reg) == pytest.approx(T * p)


def test_objective_single_time_ignores_fusion(rng):
    U = random_spd(rng, 3)[None]
    S = local_covariances(rng.standard_normal((1, 3)))
    a = gfgl_objective(U, S, RegularizationConfig(0.2, 0.0))
    b = gfgl_objective(U, S, RegularizationConfig(0.2, 100.0))
    assert a == b


def test_objective_term_by_term(rng):
    U = np.stack([random_spd(rng, 2) for _ in range(3)])
    X = rng.standard_normal((3, 2))
    lam1, lam2 = 0.3, 0.7
    expected = 0.0
    for t in range(3):
        a, b, d = U[t, 0, 0], U[t, 0, 1], U[t, 1, 1]
        x0, x1 = X[t]
        expected += -np.log(a * d - b * b) + (a * x0 * x0 + 2 * b * x0 * x1 + d * x1 * x1)
        expected += lam1 * 2 * abs(b)
        if t:
            diff = U[t] - U[t - 1]
            expected += lam2 * np.sqrt(np.sum(diff ** 2))
    got = gfgl_objective(U, local_covariances(X), RegularizationConfig(lam1, lam2))
    assert got == pytest.approx(expected, rel=1e-12)


def test_objective_reports_non_pd_index():
    U = np.stack([np.eye(2), np.diag([1.0, -1.0])])
    with pytest.raises(NotPositiveDefiniteError) as info:
        gfgl_objective(U, np.zeros((2, 2, 2)), RegularizationConfig(0.1, 0.1))
    assert info.value.index == 2


def test_objective_permutation_invariant(rng):
    U = np.stack([random_spd(rng, 4) for _ in range(3)])
    S = local_covariances(rng.standard_normal((3, 4))).matrices
    perm = rng.permutation(4)
    reg = RegularizationConfig(0.2, 0.5)
    Up = U[:, perm][:, :, perm]
    Sp = S[:, perm][:, :, perm]
    assert gfgl_objective(Up, Sp, reg) == pytest.approx(gfgl_objective(U, S, reg), rel=1e-12)


def test_objective_without_fusion_is_sum_of_single_problems(rng):
    U = np.stack([random_spd(rng, 3) for _ in range(4)])
    S = local_covariances(rng.standard_normal((4, 3))).matrices
    reg = RegularizationConfig(0.3, 0.0)
    total = sum(gfgl_objective(U[t:t + 1], S[t:t + 1], reg) for t in range(4))
    assert gfgl_objective(U, S, reg) == pytest.approx(total, rel=1e-12)


def test_regularization_validation():
    with pytest.raises(ValueError, match="lambda1 must be positive"):
        RegularizationConfig(0.0, 1.0)
    with pytest.raises(ValueError):
        RegularizationConfig(0.1, -1.0)
    assert RegularizationConfig(0.5, 2.0).rho == pytest.approx(4.0)


def test_precision_sequence_checks():
    with pytest.raises(ValueError):
        PrecisionSequence(np.array([[[1.0, 0.5], [0.4, 1.0]]]))
    with pytest.raises(NotPositiveDefiniteError):
        PrecisionSequence(np.array([[[1.0, 2.0], [2.0, 1.0]]]))
    seq = PrecisionSequence(np.stack([np.eye(2), 2 * np.eye(2)]))
    np.testing.assert_array_equal(seq.differences()[1], np.eye(2))


def test_segmentation_round_trip():
    seg = Segmentation((3, 7), 10)
    assert seg.separators == (1, 3, 7, 11)
    assert seg.block_lengths == (2, 4, 4)
    assert sum(seg.block_lengths) == 10
    assert Segmentation.from_separators(seg.separators) == seg
    assert Segmentation.from_labels(seg.labels()) == seg


@pytest.mark.parametrize("cps", [(1,), (5, 5), (4, 3), (11,)])
def test_segmentation_rejects_bad_changepoints(cps):
    with pytest.raises(ValueError):
        Segmentation(cps, 10)


def test_ground_truth_validation():
    theta = np.array([[1.0, 0.4], [0.4, 1.0]])
    cov = np.linalg.inv(theta)
    gt = GroundTruth(np.stack([cov, np.eye(2)]), np.stack([theta, np.eye(2)]), (3,), 5)
    assert gt.edge_sets[0] == {(0, 1), (1, 0)}
    assert gt.edge_sets[1] == frozenset()
    assert gt.eta_min == pytest.approx(np.linalg.norm(cov - np.eye(2)))
    assert gt.precision_at().shape == (5, 2, 2)
    with pytest.raises(ValueError):
        GroundTruth(np.stack([cov]), np.stack([2 * theta]), (), 5)


def test_support_pairs():
    theta = np.array([[1.0, 0.0, 0.2], [0.0, 1.0, 0.0], [0.2, 0.0, 1.0]])
    assert support_pairs(theta) == {(0, 2), (2, 0)}


def test_local_covariance_seq_pooled(rng):
    X = rng.standard_normal((6, 3))
    S = local_covariances(X)
    np.testing.assert_allclose(S.pooled(), X.T @ X / 6)
    assert isinstance(S, LocalCovarianceSeq)
