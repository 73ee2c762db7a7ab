"""PCA frame fitting, simplex volume, and positivity bounds in projected coordinates."""
import numpy as np
import pytest

from plmm import subspace


def simplex_columns(rng, K, N):
    A = rng.dirichlet(np.ones(K), size=N).T
    return A


def make_exact_scene(rng, L=8, K=3, N=40):
    # data exactly on the simplex of a strictly positive M, full rank
    M = rng.uniform(0.2, 1.0, size=(L, K))
    A = simplex_columns(rng, K, N)
    A[:, :K] = np.eye(K)  # include vertices so the span is complete
    return M, A, M @ A


def test_volume_frozen_example():
    T = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    assert subspace.volume(T) == pytest.approx(0.5)
    assert subspace.volume_psi(T) == pytest.approx(0.125)


def test_volume_shape_check():
    with pytest.raises(ValueError):
        subspace.volume(np.zeros((2, 2)))


def test_cofactor_row_expansion_reproduces_determinant():
    rng = np.random.default_rng(21)
    for K in (2, 3, 4, 5):
        T = rng.normal(size=(K - 1, K))
        X = np.vstack([T, np.ones((1, K))])
        det = np.linalg.det(X)
        for k in range(K - 1):
            f = subspace.cofactor_vector(T, k)
            assert T[k] @ f == pytest.approx(det, rel=1e-9, abs=1e-12)
            # the expansion is linear in row k with no constant term
            t_new = rng.normal(size=K)
            T2 = T.copy()
            T2[k] = t_new
            X2 = np.vstack([T2, np.ones((1, K))])
            assert t_new @ f == pytest.approx(np.linalg.det(X2), rel=1e-9, abs=1e-12)


def test_cofactor_row_index_check():
    with pytest.raises(ValueError):
        subspace.cofactor_vector(np.zeros((2, 3)), 2)


def test_volume_row_grad_matches_central_differences():
    rng = np.random.default_rng(30)
    for _ in range(10):
        K = int(rng.integers(2, 5))
        T = rng.normal(size=(K - 1, K))
        k = int(rng.integers(0, K - 1))
        g = subspace.volume_psi_row_grad(T, k)
        h = 1e-6
        g_fd = np.zeros(K)
        for j in range(K):
            Tp = T.copy()
            Tp[k, j] += h
            Tm = T.copy()
            Tm[k, j] -= h
            g_fd[j] = (subspace.volume_psi(Tp) - subspace.volume_psi(Tm)) / (2 * h)
        assert np.allclose(g, g_fd, atol=1e-7, rtol=1e-6)


def test_fit_projection_roundtrips_exact_simplex_data():
    rng = np.random.default_rng(17)
    M, A, Y = make_exact_scene(rng)
    frame = subspace.fit_projection(Y, 3)
    assert frame.U.shape == (8, 2)
    assert np.allclose(frame.U.T @ frame.U, np.eye(2), atol=1e-12)
    # endmembers lie in the fitted affine plane, so project/lift is exact
    T = frame.project(M)
    assert np.allclose(frame.lift(T), M, atol=1e-9)
    assert np.allclose(frame.V, frame.U.T)
    assert frame.Z.shape == (2, 3)


def test_fit_projection_sign_convention_and_determinism():
    rng = np.random.default_rng(18)
    _, _, Y = make_exact_scene(rng)
    f1 = subspace.fit_projection(Y, 3)
    f2 = subspace.fit_projection(Y.copy(), 3)
    assert np.array_equal(f1.U, f2.U)
    for j in range(f1.U.shape[1]):
        nz = np.flatnonzero(np.abs(f1.U[:, j]) > 1e-12)
        assert f1.U[nz[0], j] > 0


def test_fit_projection_errors():
    rng = np.random.default_rng(19)
    flat = np.outer(rng.uniform(size=6), np.ones(10))  # rank-1 data
    with pytest.raises(subspace.DegenerateSubspaceError):
        subspace.fit_projection(flat + 1e-15, 3)
    with pytest.raises(ValueError):
        subspace.fit_projection(rng.normal(size=(4, 9)), 1)
    with pytest.raises(ValueError):
        subspace.fit_projection(rng.normal(size=(2, 9)), 4)


def hand_frame():
    # L=2, K=2: one projected coordinate, lifted value ybar + U t
    U = np.array([[1.0], [-1.0]]) / np.sqrt(2.0)
    ybar = np.array([0.5, 0.5])
    V = U.T.copy()
    Z = np.tile((V @ ybar)[:, None], (1, 2))
    return subspace.PcaFrame(U=U, V=V, ybar=ybar, Z=Z)


def test_positivity_bounds_hand_interval():
    frame = hand_frame()
    T = np.zeros((1, 2))
    ctx = subspace.positivity_bounds(frame, T)
    # 0.5 + t/sqrt(2) >= 0 and 0.5 - t/sqrt(2) >= 0
    lim = 0.5 * np.sqrt(2.0)
    assert np.allclose(ctx.t_lo, -lim)
    assert np.allclose(ctx.t_hi, lim)
    assert ctx.t_lo_px is None and ctx.t_hi_px is None


def test_positivity_bounds_infeasible_raises():
    frame = hand_frame()
    frame.ybar = np.array([-2.0, -2.0])
    with pytest.raises(subspace.InfeasibleBoundsError):
        subspace.positivity_bounds(frame, np.zeros((1, 2)))


def test_positivity_bounds_tiny_gap_is_widened():
    frame = hand_frame()
    frame.ybar = np.array([0.0, -1e-12])
    ctx = subspace.positivity_bounds(frame, np.zeros((1, 2)))
    assert np.all(ctx.t_lo <= ctx.t_hi)


def test_per_pixel_bounds_and_constraint_map():
    rng = np.random.default_rng(23)
    M, A, Y = make_exact_scene(rng)
    frame = subspace.fit_projection(Y, 3)
    T = frame.project(M)
    dT = 1e-3 * rng.normal(size=(5, 2, 3))
    ctx = subspace.positivity_bounds(frame, T, dT)
    assert ctx.t_lo_px.shape == (5, 2, 3)
    for k in range(2):
        p, q, act = subspace.g_affine_parts(ctx, k)
        assert p.shape == (12,)
        assert q.shape == (12, 3) and act.shape == (12, 3)
        assert np.array_equal(p[:2], [1.0, -1.0])
        assert np.array_equal(p[2:7], np.ones(5))
        assert np.array_equal(p[7:], -np.ones(5))
        # current row is feasible, so active constraints evaluate >= 0
        g = subspace.g_constraint(ctx, k, T[k])
        assert np.all(g[act] >= -1e-9)
        # pushing the row past a finite upper bound goes negative
        finite_hi = np.isfinite(ctx.t_hi[k])
        if finite_hi.any():
            j = int(np.flatnonzero(finite_hi)[0])
            bad = T[k].copy()
            bad[j] = ctx.t_hi[k][j] + 1.0
            assert subspace.g_constraint(ctx, k, bad)[1, j] < 0


def test_g_affine_parts_requires_perturbations():
    frame = hand_frame()
    ctx = subspace.positivity_bounds(frame, np.zeros((1, 2)))
    with pytest.raises(ValueError):
        subspace.g_affine_parts(ctx, 0)


def test_positivity_bounds_shape_checks():
    frame = hand_frame()
    with pytest.raises(ValueError):
        subspace.positivity_bounds(frame, np.zeros((2, 2)))
    with pytest.raises(ValueError):
        subspace.positivity_bounds(frame, np.zeros((1, 2)), dT=np.zeros((4, 2, 2)))
