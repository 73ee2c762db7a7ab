"""PCA frame for endmember projection, simplex volume, and positivity bounds.

Endmembers live in the K-1 dimensional affine subspace spanned by the top
principal directions of the centered data: M = U T + Ybar2 with U (L, K-1)
orthonormal, V = U^T and Ybar2 the column-replicated data mean.  Per-pixel
perturbed endmembers reduce to T_n = T + V dM_n in projected coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

_SIGN_TOL = 1e-12
_PIVOT_TOL = 1e-12
BOUND_WIDEN = 1e-9


class DegenerateSubspaceError(ValueError):
    """Centered data covariance has rank below K-1."""


class InfeasibleBoundsError(RuntimeError):
    """Positivity interval is empty beyond the widening epsilon."""


@dataclass
class PcaFrame:
    """Projection frame of the endmember subspace.

    U is (L, K-1) with orthonormal columns, V = U^T, ybar the data mean and
    Z = V @ Ybar2 (each column V @ ybar), kept for completeness.
    """

    U: np.ndarray
    V: np.ndarray
    ybar: np.ndarray
    Z: np.ndarray

    @property
    def bands(self) -> int:
        return self.U.shape[0]

    @property
    def n_endmembers(self) -> int:
        return self.Z.shape[1]

    def project(self, M: np.ndarray) -> np.ndarray:
        """T = V (M - Ybar2) for M of shape (L, K)."""
        M = np.asarray(M, dtype=np.float64)
        return self.V @ (M - self.ybar[:, None])

    def lift(self, T: np.ndarray) -> np.ndarray:
        """M = U T + Ybar2 for T of shape (K-1, K)."""
        T = np.asarray(T, dtype=np.float64)
        return self.U @ T + self.ybar[:, None]


def fit_projection(y, K: int) -> PcaFrame:
    """Fit the K-1 dimensional PCA frame of the observations.

    Eigendecomposition of the centered covariance Yc Yc^T / N, keeping the
    top K-1 directions.  Each direction has its first coordinate of
    magnitude above 1e-12 made positive, so the frame is deterministic.
    Raises DegenerateSubspaceError when the covariance rank is below K-1.
    """
    data = getattr(y, "data", y)
    Y = np.asarray(data, dtype=np.float64)
    if Y.ndim != 2:
        raise ValueError("Y must be 2-D (bands x pixels)")
    L, N = Y.shape
    if K < 2:
        raise ValueError("K must be at least 2")
    if K - 1 > min(L, N):
        raise ValueError("K-1 exceeds the data dimensions")
    ybar = Y.mean(axis=1)
    Yc = Y - ybar[:, None]
    cov = (Yc @ Yc.T) / N
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    evecs = evecs[:, order]
    scale = max(evals[0], 0.0)
    if evals[K - 2] <= max(scale, 1.0) * 1e-12:
        raise DegenerateSubspaceError(
            "centered covariance rank below %d" % (K - 1)
        )
    U = evecs[:, : K - 1].copy()
    for j in range(U.shape[1]):
        nz = np.flatnonzero(np.abs(U[:, j]) > _SIGN_TOL)
        if nz.size and U[nz[0], j] < 0:
            U[:, j] = -U[:, j]
    V = U.T.copy()
    z = V @ ybar
    Z = np.tile(z[:, None], (1, K))
    return PcaFrame(U=U, V=V, ybar=ybar, Z=Z)


def volume(T: np.ndarray) -> float:
    """Simplex volume of the projected endmembers, |det([T; 1^T])| / (K-1)!."""
    T = np.asarray(T, dtype=np.float64)
    K = T.shape[1]
    if T.shape[0] != K - 1:
        raise ValueError("T must be (K-1, K)")
    X = np.vstack([T, np.ones((1, K))])
    return abs(float(np.linalg.det(X))) / factorial(K - 1)


def volume_psi(T: np.ndarray) -> float:
    """0.5 * volume(T)^2."""
    v = volume(T)
    return 0.5 * v * v


def cofactor_vector(T: np.ndarray, k: int) -> np.ndarray:
    """Cofactors of row k of [T; 1^T]: det([T; 1^T]) = t_k @ f_k for any row k."""
    T = np.asarray(T, dtype=np.float64)
    K = T.shape[1]
    X = np.vstack([T, np.ones((1, K))])
    if not 0 <= k < K - 1:
        raise ValueError("row index out of range")
    f = np.empty(K)
    rows = np.delete(np.arange(K), k)
    for j in range(K):
        cols = np.delete(np.arange(K), j)
        minor = X[np.ix_(rows, cols)]
        f[j] = (-1.0) ** (k + j) * float(np.linalg.det(minor))
    return f


def volume_psi_row_grad(T: np.ndarray, k: int) -> np.ndarray:
    """Gradient of volume_psi with respect to row k of T."""
    T = np.asarray(T, dtype=np.float64)
    K = T.shape[1]
    f = cofactor_vector(T, k)
    det = float(T[k] @ f)
    return det * f / factorial(K - 1) ** 2


@dataclass
class VolumeContext:
    """Bounds keeping the lifted endmembers (and perturbed copies) non-negative.

    t_lo/t_hi are (K-1, K) global bounds on T; t_lo_px/t_hi_px are
    (N, K-1, K) per-pixel bounds on T + dT and are None when the context was
    built without perturbations.  Infinite entries mark vacuous constraints.
    """

    frame: PcaFrame
    T: np.ndarray
    dT: np.ndarray | None
    t_lo: np.ndarray
    t_hi: np.ndarray
    t_lo_px: np.ndarray | None
    t_hi_px: np.ndarray | None


def _bounds_for_rows(U: np.ndarray, ybar: np.ndarray, T_eff: np.ndarray):
    """Interval bounds per (row k, column r) from ybar + U T_eff >= 0.

    T_eff has shape (..., K-1, K); the result pair has the same leading
    shape.  Entries where a column of U has no positive (negative) part are
    -inf (+inf).
    """
    L, Km1 = U.shape
    lifted = ybar.reshape((1,) * (T_eff.ndim - 2) + (L, 1)) + np.einsum(
        "lj,...jr->...lr", U, T_eff
    )
    lo = np.full(T_eff.shape, -np.inf)
    hi = np.full(T_eff.shape, np.inf)
    for k in range(Km1):
        uk = U[:, k]
        # residual of every positivity constraint with the row-k term removed
        other = lifted - uk[:, None] * T_eff[..., k, :][..., None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            expr = -other / uk[:, None]
        pos = uk > _PIVOT_TOL
        neg = uk < -_PIVOT_TOL
        if pos.any():
            lo[..., k, :] = np.max(
                np.where(pos[:, None], expr, -np.inf), axis=-2
            )
        if neg.any():
            hi[..., k, :] = np.min(
                np.where(neg[:, None], expr, np.inf), axis=-2
            )
    return lo, hi


def _widen_or_raise(lo: np.ndarray, hi: np.ndarray, what: str):
    bad = lo > hi
    if bad.any():
        lo[bad] -= BOUND_WIDEN
        hi[bad] += BOUND_WIDEN
        if np.any(lo > hi):
            raise InfeasibleBoundsError("empty %s positivity interval" % what)


def positivity_bounds(
    frame: PcaFrame, T: np.ndarray, dT: np.ndarray | None = None
) -> VolumeContext:
    """Box bounds on each row of T enforcing non-negative lifted endmembers.

    With dT (N, K-1, K) supplied, per-pixel bounds on T + dT_n are computed
    as well, enforcing M + dM_n >= 0 for every pixel.  Intervals empty by
    more than the 1e-9 widening epsilon raise InfeasibleBoundsError.
    """
    T = np.asarray(T, dtype=np.float64)
    K = frame.n_endmembers
    if T.shape != (K - 1, K):
        raise ValueError("T must be (K-1, K)")
    lo, hi = _bounds_for_rows(frame.U, frame.ybar, T)
    _widen_or_raise(lo, hi, "endmember")
    lo_px = hi_px = None
    if dT is not None:
        dT = np.asarray(dT, dtype=np.float64)
        if dT.ndim != 3 or dT.shape[1:] != (K - 1, K):
            raise ValueError("dT must be (N, K-1, K)")
        lo_px, hi_px = _bounds_for_rows(frame.U, frame.ybar, T[None] + dT)
        _widen_or_raise(lo_px, hi_px, "per-pixel endmember")
    return VolumeContext(
        frame=frame, T=T.copy(), dT=None if dT is None else dT.copy(),
        t_lo=lo, t_hi=hi, t_lo_px=lo_px, t_hi_px=hi_px,
    )


def g_affine_parts(ctx: VolumeContext, k: int):
    """Affine decomposition of the row-k constraint map: g_k(x) = p x + q.

    Returns (p, q, active) with p of shape (2(N+1),), q and the active mask
    of shape (2(N+1), K).  Inactive cells correspond to infinite bounds and
    carry q = +inf.
    """
    if ctx.dT is None:
        raise ValueError("context was built without perturbations")
    n = ctx.dT.shape[0]
    ones = np.ones(n)
    p = np.concatenate([[1.0], [-1.0], ones, -ones])
    q = np.concatenate(
        [
            -ctx.t_lo[k][None, :],
            ctx.t_hi[k][None, :],
            ctx.dT[:, k, :] - ctx.t_lo_px[:, k, :],
            ctx.t_hi_px[:, k, :] - ctx.dT[:, k, :],
        ],
        axis=0,
    )
    active = np.isfinite(q)
    return p, q, active


def g_constraint(ctx: VolumeContext, k: int, t_row: np.ndarray) -> np.ndarray:
    """Stacked positivity constraints of row k evaluated at t_row.

    All 2(N+1) x K entries are non-negative exactly when the lifted
    endmembers and every perturbed copy are non-negative in the coordinates
    the bounds were computed from.  Vacuous cells evaluate to +inf.
    """
    t_row = np.asarray(t_row, dtype=np.float64)
    p, q, _ = g_affine_parts(ctx, k)
    return p[:, None] * t_row[None, :] + q
