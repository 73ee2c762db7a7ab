"""Block-coordinate unmixing loop and the closed-form ADMM sub-solvers.

The outer loop alternates exact sub-problem solves over A, M and dM.  Each
sub-problem is handled by scaled ADMM with closed-form primal updates, a
projection splitting step, and the standard residual-balancing penalty rule:

    r^k = A x^k + B z^k - c                    (primal residual)
    s^k = rho A^T B (z^k - z^{k-1})            (dual residual)
    eps_pri  = sqrt(p) eps_abs + eps_rel max(||A x||, ||B z||, ||c||)
    eps_dual = sqrt(n) eps_abs + eps_rel ||A^T y||,  y = rho * lambda
    rho <- tau_incr * rho      if ||r|| > mu ||s||
    rho <- rho / tau_decr      if ||s|| > mu ||r||

Splitting variables and scaled duals restart at zero on every call; the
penalty restarts at its configured rho0.  When rho changes, the scaled dual
is rescaled by rho_old / rho_new so the unscaled dual stays continuous.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np

from . import model, penalties, subspace

_TINY = float(np.finfo(np.float64).tiny)


@dataclass
class AdmmConfig:
    """Inner-solver constants; defaults are the synthetic-experiment values."""

    eps_abs: float = 1e-1
    eps_rel: float = 1e-4
    tau_incr: float = 1.1
    tau_decr: float = 1.1
    mu: float = 10.0
    rho0_A: float = 1e-4
    rho0_M: float = 1e-8
    rho0_dM: float = 1e-4
    max_inner_iters: int = 100
    max_rho_updates: int = 50

    def __post_init__(self):
        if min(self.eps_abs, self.eps_rel) <= 0:
            raise ValueError("tolerances must be positive")
        if self.tau_incr <= 1 or self.tau_decr <= 1 or self.mu <= 1:
            raise ValueError("tau factors and mu must exceed 1")
        if min(self.rho0_A, self.rho0_M, self.rho0_dM) <= 0:
            raise ValueError("initial penalties must be positive")
        if self.max_inner_iters < 1 or self.max_rho_updates < 0:
            raise ValueError("iteration limits out of range")


@dataclass
class AdmmTrace:
    """Aggregate per-iteration history of one inner solve (max over active units)."""

    r_norm: list = field(default_factory=list)
    s_norm: list = field(default_factory=list)
    eps_pri: list = field(default_factory=list)
    eps_dual: list = field(default_factory=list)
    rho: list = field(default_factory=list)
    iterations: int = 0
    termination: str = ""

    def record(self, r, s, ep, ed, rho):
        self.r_norm.append(float(np.max(r)))
        self.s_norm.append(float(np.max(s)))
        self.eps_pri.append(float(np.min(ep)))
        self.eps_dual.append(float(np.min(ed)))
        self.rho.append(float(np.max(rho)))
        self.iterations += 1


@dataclass
class ResidualCheck:
    r_norm: float
    s_norm: float
    eps_pri: float
    eps_dual: float

    @property
    def converged(self) -> bool:
        return self.r_norm <= self.eps_pri and self.s_norm <= self.eps_dual


def admm_residuals(x, z, z_prev, a_op, b_op, c, rho, scaled_dual,
                   eps_abs, eps_rel) -> ResidualCheck:
    """Residual norms and stopping thresholds of one scaled-ADMM iterate.

    Operands are dense arrays; x, z, c may be vectors or matrices as long as
    a_op @ x + b_op @ z - c is defined.  Frobenius norms throughout.
    """
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    z_prev = np.asarray(z_prev, dtype=np.float64)
    a_op = np.asarray(a_op, dtype=np.float64)
    b_op = np.asarray(b_op, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    ax = a_op @ x
    bz = b_op @ z
    r = ax + bz - c
    s = rho * (a_op.T @ (b_op @ (z - z_prev)))
    dual = a_op.T @ (rho * np.asarray(scaled_dual, dtype=np.float64))
    eps_pri = np.sqrt(r.size) * eps_abs + eps_rel * max(
        np.linalg.norm(ax), np.linalg.norm(bz), np.linalg.norm(c)
    )
    eps_dual = np.sqrt(x.size) * eps_abs + eps_rel * np.linalg.norm(dual)
    return ResidualCheck(
        r_norm=float(np.linalg.norm(r)),
        s_norm=float(np.linalg.norm(s)),
        eps_pri=float(eps_pri),
        eps_dual=float(eps_dual),
    )


def adjust_rho(rho: float, r_norm: float, s_norm: float, cfg: AdmmConfig) -> float:
    """Residual-balancing penalty update; returns rho unchanged in the dead zone."""
    if r_norm > cfg.mu * s_norm:
        return rho * cfg.tau_incr
    if s_norm > cfg.mu * r_norm:
        return rho / cfg.tau_decr
    return rho


def _adjust_rho_vec(rho, r_norm, s_norm, updates, cfg):
    """Vectorized penalty rule honoring the update counter.

    Returns (new_rho, new_updates, factor); the scaled dual must be divided
    by factor wherever it changed.
    """
    factor = np.ones_like(rho)
    can = updates < cfg.max_rho_updates
    factor[can & (r_norm > cfg.mu * s_norm)] = cfg.tau_incr
    factor[can & (s_norm > cfg.mu * r_norm)] = 1.0 / cfg.tau_decr
    changed = factor != 1.0
    return rho * factor, updates + changed, factor


def _check_finite(name, arr):
    if not np.all(np.isfinite(arr)):
        raise ValueError("%s contains non-finite entries" % name)


# ---------------------------------------------------------------------------
# abundance sub-problem (per pixel)
# ---------------------------------------------------------------------------

def _abundance_system(gram, gty, alpha, cA, c_lin, w, lam, rho):
    """Normal equations of the abundance primal update, batched over pixels.

    gram is (n, K, K) with (M + dM_n)^T (M + dM_n), gty is (n, K) with
    (M + dM_n)^T y_n, cA/c_lin the smoothness surrogate coefficients, w the
    splitting variable, lam the scaled dual (n, K+1), rho the penalty (n,).
    """
    n, K = gty.shape
    eye = np.eye(K)
    sys = gram + (alpha * cA)[:, None, None] * eye + rho[:, None, None] * (
        eye + np.ones((K, K))
    )
    rhs = gty - alpha * c_lin + rho[:, None] * (
        (w - lam[:, :K]) + (1.0 - lam[:, K])[:, None]
    )
    return sys, rhs


def update_abundances(y, M, dM, A, op=None, alpha: float = 0.0,
                      cfg: AdmmConfig | None = None,
                      trace: AdmmTrace | None = None) -> np.ndarray:
    """One block update of A: per-pixel simplex-constrained ADMM.

    Each pixel solves min 0.5 ||y_n - (M + dM_n) a||^2 + alpha phi(a) subject
    to a >= 0 and 1^T a = 1 through the splitting Q a + R w = s with
    Q = [I; 1^T], R = [-I; 0^T], s = [0; 1].  Neighbor abundances inside the
    smoothness surrogate are frozen at the sweep entry (Jacobi), so pixels
    are independent within one call.  Returns the new (K, N) matrix.
    """
    if cfg is None:
        cfg = AdmmConfig()
    Y = model.as_matrix(y)
    M = np.asarray(M, dtype=np.float64)
    dM = np.asarray(dM, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    for nm, arr in (("Y", Y), ("M", M), ("dM", dM), ("A", A)):
        _check_finite(nm, arr)
    L, N = Y.shape
    K = M.shape[1]
    if M.shape[0] != L or A.shape != (K, N) or dM.shape != (N, L, K):
        raise ValueError("inconsistent shapes among Y, M, dM, A")
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    if alpha > 0 and op is None:
        raise ValueError("alpha > 0 requires a smoothness operator")

    G = M[None, :, :] + dM
    gram = np.einsum("nlk,nlj->nkj", G, G)
    gty = np.einsum("nlk,ln->nk", G, Y)
    if alpha > 0:
        cA, C = penalties.smoothness_terms_all(op, A)
        c_lin = C.T.copy()
    else:
        cA = np.zeros(N)
        c_lin = np.zeros((N, K))

    a = A.T.copy()
    w = np.zeros((N, K))
    lam = np.zeros((N, K + 1))
    rho = np.full(N, cfg.rho0_A)
    updates = np.zeros(N, dtype=np.int64)
    active = np.arange(N)
    sq_p = np.sqrt(K + 1.0)
    sq_n = np.sqrt(float(K))

    for _ in range(cfg.max_inner_iters):
        idx = active
        sys, rhs = _abundance_system(
            gram[idx], gty[idx], alpha, cA[idx], c_lin[idx], w[idx], lam[idx], rho[idx]
        )
        a[idx] = np.linalg.solve(sys, rhs[..., None])[..., 0]

        w_prev = w[idx].copy()
        w[idx] = np.maximum(a[idx] + lam[idx, :K], 0.0)

        head = a[idx] - w[idx]
        tail = a[idx].sum(axis=1) - 1.0
        lam[idx, :K] += head
        lam[idx, K] += tail

        r_norm = np.sqrt(np.sum(head * head, axis=1) + tail * tail)
        s_norm = rho[idx] * np.linalg.norm(w[idx] - w_prev, axis=1)
        qa = np.sqrt(np.sum(a[idx] ** 2, axis=1) + a[idx].sum(axis=1) ** 2)
        eps_pri = sq_p * cfg.eps_abs + cfg.eps_rel * np.maximum.reduce(
            [qa, np.linalg.norm(w[idx], axis=1), np.ones(idx.size)]
        )
        dual_vec = lam[idx, :K] + lam[idx, K][:, None]
        eps_dual = sq_n * cfg.eps_abs + cfg.eps_rel * rho[idx] * np.linalg.norm(
            dual_vec, axis=1
        )
        if trace is not None:
            trace.record(r_norm, s_norm, eps_pri, eps_dual, rho[idx])

        conv = (r_norm <= eps_pri) & (s_norm <= eps_dual)
        cont = idx[~conv]
        if cont.size:
            sub = ~conv
            rho[cont], updates[cont], factor = _adjust_rho_vec(
                rho[cont], r_norm[sub], s_norm[sub], updates[cont], cfg
            )
            lam[cont] /= factor[:, None]
        active = cont
        if active.size == 0:
            break
    if trace is not None:
        trace.termination = "converged" if active.size == 0 else "max_iters"
    return a.T.copy()


# ---------------------------------------------------------------------------
# endmember sub-problem (per band; volume variant per row of T)
# ---------------------------------------------------------------------------

def _endmember_system(AAt, S_pen, r_data, extra, F, W, Lam, rho, n_plus_1):
    """Normal equations of the band-row primal update, batched over bands.

    Splitting e m - W = -F with e = [1; 1_N].  r_data holds (y_l -
    delta_l) A^T, extra the beta-weighted reference rows (zeros otherwise).
    """
    b, _, K = F.shape
    sys = AAt[None] + S_pen[None] + (rho * n_plus_1)[:, None, None] * np.eye(K)
    ew = (W - F - Lam).sum(axis=1)
    rhs = r_data + extra + rho[:, None] * ew
    return sys, rhs


def _trow_system(AAt, lin_k, f_k, beta, p, q_act, act, W, Lam, rho):
    """Normal equations for one row of T in the volume variant.

    lin_k is r_k A^T, f_k the cofactor vector of row k, p/q_act the affine
    constraint parts with inactive cells zeroed, act the active mask.
    """
    K = lin_k.size
    fact2 = float(factorial(K - 1)) ** 2
    counts = act.sum(axis=0).astype(np.float64)
    sys = AAt + (beta / fact2) * np.outer(f_k, f_k) + rho * np.diag(counts)
    pw = p[:, None] * (W - Lam - q_act)
    rhs = lin_k + rho * np.where(act, pw, 0.0).sum(axis=0)
    return sys, rhs


def _update_endmembers_volume(Y, A, dM, M, beta, cfg, frame,
                              trace: AdmmTrace | None):
    K = M.shape[1]
    N = A.shape[1]
    T = frame.project(M)
    dT = np.einsum("jl,nlk->njk", frame.V, dM)
    Delta = np.einsum("nlk,kn->ln", dM, A)
    C = Y - np.outer(frame.ybar, A.sum(axis=0)) - Delta
    lin = (frame.V @ C) @ A.T
    AAt = A @ A.T
    sq_n = np.sqrt(float(K))
    hit_cap = False

    for k in range(K - 1):
        ctx = subspace.positivity_bounds(frame, T, dT)
        p, q, act = subspace.g_affine_parts(ctx, k)
        q_act = np.where(act, q, 0.0)
        f_k = subspace.cofactor_vector(T, k)
        q_norm = float(np.linalg.norm(q_act))
        n_active = int(act.sum())
        W = np.zeros_like(q_act)
        Lam = np.zeros_like(q_act)
        rho = cfg.rho0_M
        n_updates = 0
        t = T[k].copy()
        for _ in range(cfg.max_inner_iters):
            sys, rhs = _trow_system(AAt, lin[k], f_k, beta, p, q_act, act, W, Lam, rho)
            t = np.linalg.solve(sys, rhs)

            g = np.where(act, p[:, None] * t[None, :] + q_act, 0.0)
            W_prev = W
            W = np.maximum(g + Lam, 0.0)
            resid = g - W
            Lam = Lam + resid

            r_norm = float(np.linalg.norm(resid))
            s_norm = rho * float(np.linalg.norm((p[:, None] * (W - W_prev)).sum(axis=0)))
            ax_norm = float(np.linalg.norm(np.where(act, p[:, None] * t[None, :], 0.0)))
            eps_pri = np.sqrt(n_active) * cfg.eps_abs + cfg.eps_rel * max(
                ax_norm, float(np.linalg.norm(W)), q_norm
            )
            eps_dual = sq_n * cfg.eps_abs + cfg.eps_rel * rho * float(
                np.linalg.norm((p[:, None] * Lam).sum(axis=0))
            )
            if trace is not None:
                trace.record([r_norm], [s_norm], [eps_pri], [eps_dual], [rho])
            if r_norm <= eps_pri and s_norm <= eps_dual:
                break
            if n_updates < cfg.max_rho_updates:
                new_rho = adjust_rho(rho, r_norm, s_norm, cfg)
                if new_rho != rho:
                    Lam = Lam * (rho / new_rho)
                    rho = new_rho
                    n_updates += 1
        else:
            hit_cap = True
        T[k] = t
    if trace is not None:
        trace.termination = "max_iters" if hit_cap else "converged"
    return frame.lift(T)


def update_endmembers(y, A, dM, M, psi_kind: str = "none", beta: float = 0.0,
                      cfg: AdmmConfig | None = None, m0=None, frame=None,
                      trace: AdmmTrace | None = None) -> np.ndarray:
    """One block update of M under the selected endmember penalty.

    Kinds 'none', 'dist' and 'mutual' run one ADMM per spectral band with the
    splitting e m_l - W_l = -F_l, W_l >= 0 enforcing both M >= 0 and
    M + dM_n >= 0.  Kind 'volume' works on the projected rows of T with the
    per-row bound constraints and lifts the result back.  Returns the new
    (L, K) matrix.
    """
    if cfg is None:
        cfg = AdmmConfig()
    Y = model.as_matrix(y)
    M = np.asarray(M, dtype=np.float64)
    dM = np.asarray(dM, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    for nm, arr in (("Y", Y), ("M", M), ("dM", dM), ("A", A)):
        _check_finite(nm, arr)
    L, N = Y.shape
    K = M.shape[1]
    if M.shape[0] != L or A.shape != (K, N) or dM.shape != (N, L, K):
        raise ValueError("inconsistent shapes among Y, A, dM, M")
    if beta < 0:
        raise ValueError("beta must be non-negative")
    if psi_kind not in model.PSI_KINDS:
        raise ValueError("unknown psi_kind %r" % psi_kind)
    if psi_kind == "dist" and m0 is None:
        raise ValueError("psi_kind 'dist' requires a reference m0")
    if psi_kind == "volume":
        if frame is None:
            raise ValueError("psi_kind 'volume' requires a fitted PcaFrame")
        return _update_endmembers_volume(Y, A, dM, M, beta, cfg, frame, trace)

    Delta = np.einsum("nlk,kn->ln", dM, A)
    r_data = (Y - Delta) @ A.T
    AAt = A @ A.T
    if psi_kind == "dist":
        S_pen = beta * np.eye(K)
        extra_all = beta * np.asarray(m0, dtype=np.float64)
        if extra_all.shape != (L, K):
            raise ValueError("m0 must have shape (L, K)")
    elif psi_kind == "mutual":
        S_pen = beta * penalties.mutual_dist_operator(K).S_G
        extra_all = np.zeros((L, K))
    else:
        S_pen = np.zeros((K, K))
        extra_all = np.zeros((L, K))

    F = np.concatenate([np.zeros((L, 1, K)), dM.transpose(1, 0, 2)], axis=1)
    f_norm = np.linalg.norm(F, axis=(1, 2))
    W = np.zeros_like(F)
    Lam = np.zeros_like(F)
    rho = np.full(L, cfg.rho0_M)
    updates = np.zeros(L, dtype=np.int64)
    m_rows = M.copy()
    active = np.arange(L)
    sq_p = np.sqrt((N + 1.0) * K)
    sq_n = np.sqrt(float(K))

    for _ in range(cfg.max_inner_iters):
        idx = active
        sys, rhs = _endmember_system(
            AAt, S_pen, r_data[idx], extra_all[idx], F[idx], W[idx], Lam[idx],
            rho[idx], N + 1.0,
        )
        m_rows[idx] = np.linalg.solve(sys, rhs[..., None])[..., 0]

        proj = m_rows[idx][:, None, :] + F[idx] + Lam[idx]
        W_prev = W[idx].copy()
        W[idx] = np.maximum(proj, 0.0)

        resid = m_rows[idx][:, None, :] + F[idx] - W[idx]
        Lam[idx] += resid

        r_norm = np.linalg.norm(resid, axis=(1, 2))
        s_norm = rho[idx] * np.linalg.norm((W[idx] - W_prev).sum(axis=1), axis=1)
        em_norm = np.sqrt(N + 1.0) * np.linalg.norm(m_rows[idx], axis=1)
        eps_pri = sq_p * cfg.eps_abs + cfg.eps_rel * np.maximum.reduce(
            [em_norm, np.linalg.norm(W[idx], axis=(1, 2)), f_norm[idx]]
        )
        eps_dual = sq_n * cfg.eps_abs + cfg.eps_rel * rho[idx] * np.linalg.norm(
            Lam[idx].sum(axis=1), axis=1
        )
        if trace is not None:
            trace.record(r_norm, s_norm, eps_pri, eps_dual, rho[idx])

        conv = (r_norm <= eps_pri) & (s_norm <= eps_dual)
        cont = idx[~conv]
        if cont.size:
            sub = ~conv
            rho[cont], updates[cont], factor = _adjust_rho_vec(
                rho[cont], r_norm[sub], s_norm[sub], updates[cont], cfg
            )
            Lam[cont] /= factor[:, None, None]
        active = cont
        if active.size == 0:
            break
    if trace is not None:
        trace.termination = "converged" if active.size == 0 else "max_iters"
    return m_rows


# ---------------------------------------------------------------------------
# variability sub-problem (per pixel)
# ---------------------------------------------------------------------------

def _variability_system(aa, r_outer, M, W, Lam, rho, gamma):
    """Normal equations of the perturbation primal update, batched over pixels.

    Splitting dM_n + M - W = 0.  aa is (n, K, K) with a_n a_n^T, r_outer is
    (n, L, K) with (y_n - M a_n) a_n^T.  The primal solves
    dM_n [a a^T + (rho + gamma) I] = r_outer + rho (W - M - Lam).
    """
    K = aa.shape[1]
    sys = aa + (rho + gamma)[:, None, None] * np.eye(K)
    rhs = r_outer + rho[:, None, None] * (W - M[None] - Lam)
    return sys, rhs


def update_variability(y, M, A, dM, gamma: float = 0.0,
                       cfg: AdmmConfig | None = None,
                       trace: AdmmTrace | None = None) -> np.ndarray:
    """One block update of the perturbation stack dM, per-pixel ADMM.

    Each pixel minimizes 0.5 ||y_n - (M + dM_n) a_n||^2 + 0.5 gamma
    ||dM_n||^2 subject to M + dM_n >= 0.  Returns the new (N, L, K) stack.
    """
    if cfg is None:
        cfg = AdmmConfig()
    Y = model.as_matrix(y)
    M = np.asarray(M, dtype=np.float64)
    dM = np.asarray(dM, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    for nm, arr in (("Y", Y), ("M", M), ("dM", dM), ("A", A)):
        _check_finite(nm, arr)
    L, N = Y.shape
    K = M.shape[1]
    if M.shape[0] != L or A.shape != (K, N) or dM.shape != (N, L, K):
        raise ValueError("inconsistent shapes among Y, M, A, dM")
    if gamma < 0:
        raise ValueError("gamma must be non-negative")

    r_outer = np.einsum("ln,kn->nlk", Y - M @ A, A)
    aa = np.einsum("kn,jn->nkj", A, A)
    d = dM.copy()
    W = np.zeros_like(d)
    Lam = np.zeros_like(d)
    rho = np.full(N, cfg.rho0_dM)
    updates = np.zeros(N, dtype=np.int64)
    m_norm = float(np.linalg.norm(M))
    active = np.arange(N)
    sq_p = np.sqrt(float(L * K))

    for _ in range(cfg.max_inner_iters):
        idx = active
        sys, rhs = _variability_system(
            aa[idx], r_outer[idx], M, W[idx], Lam[idx], rho[idx], gamma
        )
        d[idx] = np.linalg.solve(sys, rhs.transpose(0, 2, 1)).transpose(0, 2, 1)

        W_prev = W[idx].copy()
        W[idx] = np.maximum(d[idx] + M[None] + Lam[idx], 0.0)

        resid = d[idx] + M[None] - W[idx]
        Lam[idx] += resid

        r_norm = np.linalg.norm(resid, axis=(1, 2))
        s_norm = rho[idx] * np.linalg.norm(W[idx] - W_prev, axis=(1, 2))
        eps_pri = sq_p * cfg.eps_abs + cfg.eps_rel * np.maximum.reduce(
            [
                np.linalg.norm(d[idx], axis=(1, 2)),
                np.linalg.norm(W[idx], axis=(1, 2)),
                np.full(idx.size, m_norm),
            ]
        )
        eps_dual = sq_p * cfg.eps_abs + cfg.eps_rel * rho[idx] * np.linalg.norm(
            Lam[idx], axis=(1, 2)
        )
        if trace is not None:
            trace.record(r_norm, s_norm, eps_pri, eps_dual, rho[idx])

        conv = (r_norm <= eps_pri) & (s_norm <= eps_dual)
        cont = idx[~conv]
        if cont.size:
            sub = ~conv
            rho[cont], updates[cont], factor = _adjust_rho_vec(
                rho[cont], r_norm[sub], s_norm[sub], updates[cont], cfg
            )
            Lam[cont] /= factor[:, None, None]
        active = cont
        if active.size == 0:
            break
    if trace is not None:
        trace.termination = "converged" if active.size == 0 else "max_iters"
    return d


# ---------------------------------------------------------------------------
# outer block-coordinate loop
# ---------------------------------------------------------------------------

@dataclass
class BcdConfig:
    """Outer-loop settings wrapping the penalty weights and inner constants."""

    penalty: model.PenaltyConfig = field(default_factory=model.PenaltyConfig)
    admm: AdmmConfig = field(default_factory=AdmmConfig)
    outer_tol: float = 1e-3
    max_outer_iters: int = 100

    def __post_init__(self):
        if self.outer_tol <= 0 or self.max_outer_iters < 1:
            raise ValueError("outer_tol must be positive and max_outer_iters >= 1")


@dataclass
class BcdTrace:
    """Objective history of a run; index 0 is the initial state."""

    j: list = field(default_factory=list)
    data: list = field(default_factory=list)
    phi: list = field(default_factory=list)
    psi: list = field(default_factory=list)
    upsilon: list = field(default_factory=list)
    increases: list = field(default_factory=list)
    termination: str = ""

    def append(self, terms: model.ObjectiveTerms):
        self.j.append(terms.total)
        self.data.append(terms.data)
        self.phi.append(terms.phi)
        self.psi.append(terms.psi)
        self.upsilon.append(terms.upsilon)

    @property
    def n_outer(self) -> int:
        return len(self.j) - 1

    def rows(self):
        """(iteration, J, data_term, phi, psi, upsilon) tuples for CSV export."""
        return [
            (i, self.j[i], self.data[i], self.phi[i], self.psi[i], self.upsilon[i])
            for i in range(len(self.j))
        ]


def unmix(y, init_state: model.PlmmState, bcd: BcdConfig | None = None):
    """Run the full block-coordinate descent from an initial state.

    Cycles A, M, dM updates until the relative objective change drops below
    outer_tol or max_outer_iters is hit.  Objective increases beyond 1e-8
    are recorded in the trace (diagnostic only).  Returns (state, trace).
    """
    if bcd is None:
        bcd = BcdConfig()
    pen = bcd.penalty
    cfg = bcd.admm
    Y = model.as_matrix(y)
    M = init_state.M.copy()
    A = init_state.A.copy()
    dM = init_state.dM.copy()

    trace = BcdTrace()
    terms = model.objective_terms(Y, model.PlmmState(M, A, dM), pen)
    trace.append(terms)
    j_prev = terms.total
    termination = "max_iters"
    for it in range(1, bcd.max_outer_iters + 1):
        A = update_abundances(Y, M, dM, A, pen.smoothness, pen.alpha, cfg)
        M = update_endmembers(
            Y, A, dM, M, pen.psi_kind, pen.beta, cfg, m0=pen.m0, frame=pen.frame
        )
        dM = update_variability(Y, M, A, dM, pen.gamma, cfg)
        terms = model.objective_terms(Y, model.PlmmState(M, A, dM), pen)
        trace.append(terms)
        if terms.total > j_prev + 1e-8:
            trace.increases.append(it)
        rel = abs(terms.total - j_prev) / max(j_prev, _TINY)
        j_prev = terms.total
        if rel < bcd.outer_tol:
            termination = "converged"
            break
    trace.termination = termination
    return model.PlmmState(M, A, dM), trace
