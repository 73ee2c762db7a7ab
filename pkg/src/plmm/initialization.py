"""Starting point for the block-coordinate solver: VCA endmembers, FCLS abundances.

VCA follows the classical projective scheme: estimate the SNR, project the
data onto K (high SNR) or K-1 (low SNR) principal dimensions, then grow the
endmember set by repeatedly projecting onto a random direction orthogonal
to the current span and taking the pixel with the largest magnitude.  FCLS
reuses the abundance ADMM with the smoothness weight at zero and no
perturbations, solved to a much tighter tolerance than the unmix defaults.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import admm, model

DM_INIT_DEFAULT = float(np.finfo(np.float64).eps)


class DegenerateDataError(ValueError):
    """Data rank collapsed below the requested projection dimension."""


@dataclass
class InitSpec:
    """How to build the initial PlmmState.

    method 'vca_fcls' runs seeded VCA then FCLS; 'provided' passes the given
    state through (dM untouched).  dm_init_value fills every entry of the
    initial perturbation stack.
    """

    method: str = "vca_fcls"
    seed: int = 0
    dm_init_value: float = DM_INIT_DEFAULT
    provided: model.PlmmState | None = None

    def __post_init__(self):
        if self.method not in ("vca_fcls", "provided"):
            raise ValueError("unknown init method %r" % self.method)
        if self.method == "provided" and self.provided is None:
            raise ValueError("method 'provided' requires a state")


def _fcls_config() -> admm.AdmmConfig:
    # tight solve; the unmix defaults are far too loose for a standalone fit
    return admm.AdmmConfig(
        eps_abs=1e-9,
        eps_rel=1e-9,
        tau_incr=2.0,
        tau_decr=2.0,
        mu=10.0,
        rho0_A=1.0,
        rho0_M=1.0,
        rho0_dM=1.0,
        max_inner_iters=2000,
        max_rho_updates=200,
    )


def estimate_snr(Y: np.ndarray, ybar: np.ndarray, Yp: np.ndarray) -> float:
    """SNR estimate (dB) from the energy split of a p-dim projection.

    Y is the raw (L, N) data, ybar its column mean, Yp the (p, N) projected
    coordinates of the centered data.  Returns +inf when the projection
    captures all the energy.
    """
    L, N = Y.shape
    p = Yp.shape[0]
    py = float(np.sum(Y * Y)) / N
    px = float(np.sum(Yp * Yp)) / N + float(ybar @ ybar)
    denom = py - px
    if denom <= 0:
        return np.inf
    num = px - (p / L) * py
    if num <= 0:
        return -np.inf
    return float(10.0 * np.log10(num / denom))


def vca(y, K: int, seed: int = 0, snr_db: float | None = None) -> np.ndarray:
    """Vertex component analysis; returns (L, K) candidate endmembers.

    The result holds the K observed pixel columns selected as extreme
    points, so it carries their noise and perturbations unaltered; the
    projections are used only to pick them.  Deterministic for a fixed
    seed.  Raises DegenerateDataError when the data rank cannot support
    the projection.
    """
    Y = model.as_matrix(y)
    L, N = Y.shape
    if not 2 <= K <= min(L, N):
        raise ValueError("need 2 <= K <= min(L, N)")
    if not np.all(np.isfinite(Y)):
        raise ValueError("Y contains non-finite entries")
    rng = np.random.default_rng(seed)

    ybar = Y.mean(axis=1)
    Yc = Y - ybar[:, None]
    if snr_db is None:
        Ud = _principal_directions(Yc @ Yc.T / N, K, what="SNR probe", check_rank=False)
        snr_db = estimate_snr(Y, ybar, Ud.T @ Yc)
    snr_th = 15.0 + 10.0 * np.log10(K)

    if snr_db < snr_th:
        # low SNR: K-1 dimensional affine projection, extra constant row
        d = K - 1
        Ud = _principal_directions(Yc @ Yc.T / N, d, what="projection")
        x = Ud.T @ Yc
        c = float(np.sqrt(np.max(np.sum(x * x, axis=0))))
        yproj = np.vstack([x, c * np.ones((1, N))])
    else:
        # high SNR: projective projection onto the K dominant directions
        d = K
        Ud = _principal_directions(Y @ Y.T / N, d, what="projection")
        x = Ud.T @ Y
        u = x.mean(axis=1)
        denom = u @ x
        if np.any(np.abs(denom) < 1e-12):
            raise DegenerateDataError("projective normalization hit a zero inner product")
        yproj = x / denom[None, :]

    indices = np.zeros(K, dtype=np.int64)
    E = np.zeros((K, K))
    E[K - 1, 0] = 1.0
    for i in range(K):
        w = rng.standard_normal((K, 1))
        f = w - E @ np.linalg.pinv(E) @ w
        nf = float(np.linalg.norm(f))
        if nf < 1e-12:
            raise DegenerateDataError("orthogonal direction collapsed")
        f /= nf
        v = (f.T @ yproj).ravel()
        indices[i] = int(np.argmax(np.abs(v)))
        E[:, i] = yproj[:, indices[i]]
    return Y[:, indices].copy()


def _principal_directions(cov: np.ndarray, d: int, what: str,
                          check_rank: bool = True) -> np.ndarray:
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    if d > evals.size:
        raise DegenerateDataError("fewer than %d dimensions for %s" % (d, what))
    if check_rank and evals[d - 1] <= max(evals[0], 1.0) * 1e-12:
        raise DegenerateDataError("data rank below %d for %s" % (d, what))
    return evecs[:, order[:d]]


def fcls(y, M, cfg: admm.AdmmConfig | None = None) -> np.ndarray:
    """Fully constrained (simplex) least-squares abundances, (K, N).

    Wraps the abundance ADMM with alpha = 0, dM = 0 and a tight default
    configuration.
    """
    Y = model.as_matrix(y)
    M = np.asarray(M, dtype=np.float64)
    L, N = Y.shape
    K = M.shape[1]
    if M.shape[0] != L:
        raise ValueError("M has %d bands, data has %d" % (M.shape[0], L))
    if cfg is None:
        cfg = _fcls_config()
    A0 = np.full((K, N), 1.0 / K)
    dM0 = np.zeros((N, L, K))
    return admm.update_abundances(Y, M, dM0, A0, op=None, alpha=0.0, cfg=cfg)


def initialize(y, K: int, spec: InitSpec | None = None) -> model.PlmmState:
    """Initial PlmmState per the init spec (default: seeded VCA + FCLS)."""
    if spec is None:
        spec = InitSpec()
    Y = model.as_matrix(y)
    L, N = Y.shape
    if spec.method == "provided":
        return spec.provided
    M0 = vca(Y, K, seed=spec.seed)
    A0 = fcls(Y, M0)
    dM0 = np.full((N, L, K), spec.dm_init_value)
    return model.PlmmState(M=M0, A=A0, dM=dM0)
