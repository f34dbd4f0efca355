import numpy as np
import pytest

from gfgl.core import GroundTruth, Segmentation
from gfgl.evaluate import (
    EvalReport,
    changepoint_errors,
    edge_covariance_mc,
    evaluate_fit,
    fisher_matrix,
    incoherence_alpha,
    isserlis_covariance,
    kronecker_edge_covariance,
    sign_consistency,
    theory_constants,
)
from gfgl.simulate import SimSpec, generate_truth


def chain(p, w=0.4):
    return np.eye(p) + w * (np.eye(p, k=1) + np.eye(p, k=-1))


def truth_from_blocks(thetas, cps, T):
    thetas = np.asarray(thetas, dtype=float)
    return GroundTruth(np.linalg.inv(thetas), thetas, cps, T)


def test_changepoint_errors_examples():
    t = Segmentation((50,), 100)
    assert changepoint_errors(Segmentation((50,), 100), t) == (0, 0, 0)
    assert changepoint_errors(Segmentation((48,), 100), t) == (2, 0, 2)
    assert changepoint_errors(Segmentation((), 100), t) == (None, -1, 100)


def test_changepoint_errors_mismatched_counts():
    errs = changepoint_errors(Segmentation((20, 52), 100), Segmentation((50,), 100))
    assert errs == (None, 1, 2)
    with pytest.raises(ValueError):
        changepoint_errors(Segmentation((), 10), Segmentation((), 11))


def test_sign_consistency_examples():
    th = chain(4)
    assert sign_consistency(th, th) == (True, True)
    flipped = th.copy()
    flipped[0, 1] = flipped[1, 0] = -0.4
    assert not sign_consistency(flipped, th).event
    spurious = th.copy()
    spurious[0, 3] = spurious[3, 0] = 1e-3
    assert sign_consistency(spurious, th) == (True, False)
    zeroed = th.copy()
    zeroed[1, 2] = zeroed[2, 1] = 0.0
    assert not sign_consistency(zeroed, th).event


def test_fisher_is_kronecker_of_covariance():
    th = chain(3)
    sigma = np.linalg.inv(th)
    g = fisher_matrix(th)
    assert g.shape == (9, 9)
    assert g[1 * 3 + 2, 0 * 3 + 1] == pytest.approx(sigma[1, 0] * sigma[2, 1])
    with pytest.raises(ValueError, match="too large"):
        fisher_matrix(np.eye(61))


def test_alpha_diagonal_and_empty_complement():
    assert incoherence_alpha(np.diag([1.0, 2.0, 3.0])).alpha == 1.0
    inc = incoherence_alpha(np.array([[1.0, 0.3], [0.3, 1.0]]))
    assert inc.alpha == 1.0


def test_alpha_chain_frozen():
    inc = incoherence_alpha(chain(4))
    assert inc.alpha == pytest.approx(-0.0666666667, abs=1e-6)
    assert inc.K_Sigma0 == pytest.approx(np.abs(np.linalg.inv(chain(4))).sum(axis=1).max())
    assert inc.alpha <= 1


def test_alpha_permutation_invariant():
    rng = np.random.default_rng(3)
    th = chain(5, 0.3)
    th[0, 4] = th[4, 0] = 0.2
    perm = rng.permutation(5)
    a = incoherence_alpha(th)
    b = incoherence_alpha(th[np.ix_(perm, perm)])
    assert a.alpha == pytest.approx(b.alpha, abs=1e-12)
    assert a.K_Gamma0 == pytest.approx(b.K_Gamma0, abs=1e-10)


def test_symmetrised_kronecker_equals_isserlis():
    sigma = np.linalg.inv(chain(4))
    g = fisher_matrix(chain(4))
    for a, b in [((0, 1), (1, 2)), ((0, 0), (2, 3)), ((1, 3), (1, 3))]:
        assert kronecker_edge_covariance(g, a, b) == pytest.approx(
            isserlis_covariance(sigma, a, b), abs=1e-14)


def test_edge_covariance_mc_converges():
    sigma = np.linalg.inv(chain(4))
    pairs_a, pairs_b = [(0, 1), (0, 0)], [(1, 2), (2, 3)]
    mc = edge_covariance_mc(sigma, pairs_a, pairs_b, 100_000, seed=1)
    exact = [isserlis_covariance(sigma, a, b) for a, b in zip(pairs_a, pairs_b)]
    np.testing.assert_allclose(mc, exact, atol=5e-2)


def test_theory_constants_identity():
    c = theory_constants(truth_from_blocks([np.eye(3)], (), 10))
    assert c["phi_max"] == pytest.approx(1.0)
    assert c["d"] == 0
    assert c["theta_min"] is None
    assert c["eta_min"] is None


def test_theory_constants_chain_degree_and_eta():
    a, b = chain(3), np.eye(3)
    c = theory_constants(truth_from_blocks([a, b], (6,), 10), lambda1=0.1, lambda2=1.0,
                         delta_T=0.1)
    assert c["d"] == 2
    eta = np.linalg.norm(np.linalg.inv(a) - np.eye(3))
    assert c["eta_min"] == pytest.approx(eta)
    assert c["theta_min"] == pytest.approx(0.4)
    assert c["d_min"] == 5 and c["gamma_min"] == 0.5
    assert c["beta1"] == pytest.approx(eta * 0.5 * 10 / 1.0)
    assert c["beta2"] == pytest.approx(eta / (0.1 * np.sqrt(6)))
    assert c["beta3"] == pytest.approx(eta * 10 * 0.1 / 1.0)


def test_theory_constants_two_block_simulation():
    truth = generate_truth(SimSpec(p=4, T=20, true_changepoints=(11,), edge_count=2,
                                   min_jump=0.5, seed=2))
    c = theory_constants(truth)
    hand = np.linalg.norm(truth.block_covariances[1] - truth.block_covariances[0])
    assert c["eta_min"] == pytest.approx(hand)


def test_evaluate_fit_perfect():
    a, b = chain(3), np.eye(3)
    truth = truth_from_blocks([a, b], (6,), 10)
    rep = evaluate_fit(np.array([a, b]), Segmentation((6,), 10), truth, 0.1, 1.0, delta_T=0.1)
    assert rep.cp_max_error == 0
    assert rep.sign_consistency == [True, True]
    assert rep.support_recovered == [True, True]
    assert rep.error_max == [0.0, 0.0]
    assert all(a <= 1 for a in rep.incoherence_alpha)
    d = rep.to_dict()
    assert d["cp_max_error"] == 0 and "beta3" in d["constants"]


def test_evaluate_fit_count_mismatch_drops_max_error():
    truth = truth_from_blocks([chain(3), np.eye(3)], (6,), 10)
    rep = evaluate_fit(np.array([chain(3)]), Segmentation((), 10), truth)
    assert isinstance(rep, EvalReport)
    assert rep.cp_count_error == -1 and rep.hausdorff_onesided == 10
    assert "cp_max_error" not in rep.to_dict()
    assert rep.alignment == [0]
    with pytest.raises(ValueError):
        evaluate_fit(np.array([chain(3), chain(3)]), Segmentation((), 10), truth)
