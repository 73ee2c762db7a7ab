"""Metric formulas against hand-computed values and brute-force oracles."""
import numpy as np
import pytest

from plmm import metrics, model


def test_spectral_angle_known_values():
    assert metrics.spectral_angle([1, 0], [1, 0]) == 0.0
    assert metrics.spectral_angle([1, 0], [0, 1]) == pytest.approx(np.pi / 2)
    assert metrics.spectral_angle([1, 0], [1, 1]) == pytest.approx(np.pi / 4)
    with pytest.raises(ValueError):
        metrics.spectral_angle([0, 0], [1, 0])


def test_asam_degrees_hand_value():
    # angles 0 and 45 degrees average to 22.5
    M_true = np.array([[1.0, 1.0], [0.0, 0.0]])
    M_est = np.array([[1.0, 1.0], [0.0, 1.0]])
    assert metrics.asam(M_true, M_est) == pytest.approx(22.5)


def test_asam_scale_invariant():
    rng = np.random.default_rng(1)
    M = rng.uniform(0.1, 1.0, size=(7, 3))
    assert metrics.asam(M, 3.7 * M) == pytest.approx(0.0, abs=1e-6)


def test_match_endmembers_recovers_swap():
    rng = np.random.default_rng(2)
    M = rng.uniform(0.1, 1.0, size=(9, 4))
    perm = (2, 0, 3, 1)
    M_est = M[:, perm]
    # est column perm[i] corresponds to true i: matching must invert the shuffle
    got = metrics.match_endmembers(M, M_est)
    assert np.array_equal(M_est[:, list(got)], M)


def test_match_endmembers_identity_and_noise():
    rng = np.random.default_rng(3)
    M = rng.uniform(0.1, 1.0, size=(12, 3))
    assert metrics.match_endmembers(M, M) == (0, 1, 2)
    noisy = M[:, [1, 2, 0]] + 0.01 * rng.normal(size=(12, 3))
    got = metrics.match_endmembers(M, noisy)
    assert np.array_equal(np.array([1, 2, 0])[list(got)], np.arange(3))


def test_greedy_matching_large_k():
    rng = np.random.default_rng(4)
    M = rng.uniform(0.1, 1.0, size=(30, 9)) + 2 * np.eye(30)[:, :9]
    perm = rng.permutation(9)
    got = metrics.match_endmembers(M, M[:, perm])
    assert np.array_equal(M[:, perm][:, list(got)], M)


def test_gmse_values():
    A = np.zeros((2, 3))
    assert metrics.gmse_a(A, A - 1.0) == pytest.approx(1.0)
    dM = np.zeros((2, 3, 2))
    dM2 = dM.copy()
    dM2[0, :, 0] = [1.0, 2.0, 3.0]
    assert metrics.gmse_dm(dM, dM2) == pytest.approx(14.0 / 12.0)
    Y = np.ones((4, 5))
    assert metrics.re(Y, Y) == 0.0
    assert metrics.re(Y, 2 * Y) == pytest.approx(1.0)


def test_gmse_matches_double_loop():
    rng = np.random.default_rng(5)
    A, B = rng.normal(size=(3, 7)), rng.normal(size=(3, 7))
    want = sum((A[k, n] - B[k, n]) ** 2 for k in range(3) for n in range(7)) / 21
    assert metrics.gmse_a(A, B) == pytest.approx(want, rel=1e-14)


def test_shape_mismatches_raise():
    with pytest.raises(ValueError):
        metrics.gmse_a(np.zeros((2, 3)), np.zeros((3, 2)))
    with pytest.raises(ValueError):
        metrics.gmse_dm(np.zeros((2, 3, 2)), np.zeros((2, 3, 3)))
    with pytest.raises(ValueError):
        metrics.re(np.zeros((2, 3)), np.zeros((2, 4)))
    with pytest.raises(ValueError):
        metrics.asam(np.zeros((2, 2)) + 1, np.ones((2, 3)))


def test_variability_energy_hand_value():
    dM = np.zeros((2, 2, 2))
    dM[0, :, 0] = [3.0, 4.0]  # norm 5, L = 2
    en = metrics.variability_energy(dM)
    assert en.shape == (2, 2)
    assert en[0, 0] == pytest.approx(5.0 / np.sqrt(2.0))
    assert en[1, 0] == 0.0
    with pytest.raises(ValueError):
        metrics.variability_energy(np.zeros((2, 2)))


def test_evaluate_permutation_consistency():
    rng = np.random.default_rng(6)
    L, K, N = 10, 3, 15
    truth = model.PlmmState(
        M=rng.uniform(0.2, 1.0, size=(L, K)),
        A=rng.dirichlet(np.ones(K), size=N).T,
        dM=0.01 * rng.normal(size=(N, L, K)),
    )
    Y = model.reconstruct(truth)
    est = model.PlmmState(
        M=truth.M + 0.01 * rng.normal(size=(L, K)),
        A=truth.A.copy(),
        dM=truth.dM.copy(),
    )
    base = metrics.evaluate(truth, est, Y)
    shuffled = model.PlmmState(
        M=est.M[:, [2, 0, 1]], A=est.A[[2, 0, 1], :], dM=est.dM[:, :, [2, 0, 1]]
    )
    other = metrics.evaluate(truth, shuffled, Y)
    assert other.asam_deg == pytest.approx(base.asam_deg, rel=1e-12)
    assert other.gmse_a == pytest.approx(base.gmse_a, rel=1e-12)
    assert other.gmse_dm == pytest.approx(base.gmse_dm, rel=1e-12)
    assert other.re == pytest.approx(base.re, rel=1e-12)


def test_evaluate_truth_against_itself_is_zero():
    rng = np.random.default_rng(7)
    truth = model.PlmmState(
        M=rng.uniform(0.2, 1.0, size=(8, 3)),
        A=rng.dirichlet(np.ones(3), size=10).T,
        dM=0.05 * rng.normal(size=(10, 8, 3)),
    )
    Y = model.reconstruct(truth)
    rep = metrics.evaluate(truth, truth, Y)
    assert rep.asam_deg == pytest.approx(0.0, abs=1e-9)
    assert rep.gmse_a == 0.0
    assert rep.gmse_dm == 0.0
    # reconstruction reorders the einsum accumulation, so allow rounding dust
    assert rep.re <= 1e-30
    assert rep.permutation == (0, 1, 2)
