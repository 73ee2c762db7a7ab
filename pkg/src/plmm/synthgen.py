"""Synthetic scenes with smooth per-pixel endmember variability.

Each pixel perturbs each endmember by a piecewise-affine spectral factor:
three levels xi_1, xi_2, xi_3 drawn uniformly from [1 - c/2, 1 + c/2] are
joined linearly through the knots (band 1, xi_1), (L_break, xi_2),
(band L, xi_3), with L_break = floor(L/2 + floor(L*u/3)) for a standard
normal u, clamped to [2, L-1].  The perturbation of endmember k at pixel n
is dm = (factor - 1) * m_k, so c = 0 gives exactly zero variability.

Draw order is fixed for reproducibility: abundances, pure-pixel indices,
variability curves (xi triples then the break draws), then noise.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import model


@dataclass
class SyntheticSpec:
    """Parameters describing one synthetic scene.

    cvar_map may be a scalar or an (N,) per-pixel array.  With pure_pixels
    one pure pixel is planted per endmember, placed among the pixels whose
    variability coefficient is largest; otherwise abundance columns are
    redrawn until their maximum stays below max_abundance.  snr_db = inf
    disables noise.  endmembers overrides the built-in reference spectra.
    """

    width: int = 128
    height: int = 64
    bands: int = 413
    n_endmembers: int = 3
    snr_db: float = 30.0
    cvar_map: float | np.ndarray = 0.1
    pure_pixels: bool = True
    max_abundance: float = 0.8
    seed: int = 0
    endmembers: Optional[np.ndarray] = None

    def __post_init__(self):
        if min(self.width, self.height, self.n_endmembers) < 1:
            raise ValueError("scene dimensions must be positive")
        if self.bands < 3:
            raise ValueError("need at least 3 bands")

    @property
    def pixels(self) -> int:
        return self.width * self.height

    def cvar_array(self) -> np.ndarray:
        c = np.asarray(self.cvar_map, dtype=np.float64)
        if c.ndim == 0:
            c = np.full(self.pixels, float(c))
        if c.shape != (self.pixels,):
            raise ValueError("cvar_map must be scalar or (N,)")
        if np.any(c < 0) or np.any(c > 2):
            raise ValueError("cvar values must lie in [0, 2]")
        return c


@dataclass
class GroundTruth:
    """Generated observation plus the exact generating state and noise level."""

    y: model.HsiMatrix
    truth: model.PlmmState
    sigma: float


def halves_cvar_map(width: int, height: int, top: float, bottom: float) -> np.ndarray:
    """Per-pixel variability levels: rows [0, H//2) get top, the rest bottom."""
    c = np.full((height, width), bottom, dtype=np.float64)
    c[: height // 2, :] = top
    return c.ravel()


def _curve_values(L: int, xi: np.ndarray, lbreak: np.ndarray) -> np.ndarray:
    """Evaluate the two-segment interpolant at bands 1..L.

    xi has shape (..., 3) and lbreak shape (...); the result appends an axis
    of length L.  Knot values are reproduced exactly.
    """
    bands = np.arange(1, L + 1, dtype=np.float64)
    xi1 = xi[..., 0:1]
    xi2 = xi[..., 1:2]
    xi3 = xi[..., 2:3]
    lb = lbreak[..., None].astype(np.float64)
    left = xi1 + (xi2 - xi1) * (bands - 1.0) / (lb - 1.0)
    right = xi2 + (xi3 - xi2) * (bands - lb) / (L - lb)
    return np.where(bands <= lb, left, right)


def _draw_breaks(L: int, u: np.ndarray) -> np.ndarray:
    lb = np.floor(L / 2.0 + np.floor(L * u / 3.0))
    return np.clip(lb, 2, L - 1).astype(np.int64)


def piecewise_affine_factor(L: int, c_var: float, rng: np.random.Generator) -> np.ndarray:
    """One spectral perturbation curve of length L (see module docstring)."""
    if L < 3:
        raise ValueError("need at least 3 bands")
    if not 0 <= c_var <= 2:
        raise ValueError("c_var must lie in [0, 2]")
    xi = rng.uniform(1.0 - c_var / 2.0, 1.0 + c_var / 2.0, size=3)
    u = rng.standard_normal()
    lb = _draw_breaks(L, np.asarray(u))
    return _curve_values(L, xi, lb)


def builtin_endmembers(L: int, K: int) -> np.ndarray:
    """Reference spectra: fixed smooth positive curves, (L, K).

    Each endmember is a sum of three Gaussian bumps on a small baseline,
    one bump per third of the band range, interleaved across endmembers so
    the signatures stay well separated.  Spreading every signature over the
    whole range keeps it sensitive to spectral perturbations anywhere, and
    the interleaving stops one signature from soaking up another's
    perturbation.  Deterministic in (L, K).
    """
    if L < 3 or K < 1:
        raise ValueError("need L >= 3 and K >= 1")
    grid = np.linspace(0.0, 1.0, L)
    # (center offset, span, width, amplitude) of the low, middle and high
    # band-range lobes; amplitudes balance the per-lobe energy amp^2 * width
    lobes = (
        (0.02, 0.075, 0.012, 1.0),
        (0.35, 0.30, 0.045, 0.55),
        (0.905, 0.075, 0.012, 0.95),
    )
    M = np.empty((L, K))
    for k in range(K):
        u = k / max(K - 1, 1)
        spectrum = np.full(L, 0.02)
        for start, span, width, amp in lobes:
            center = start + span * u
            spectrum = spectrum + amp * np.exp(-0.5 * ((grid - center) / width) ** 2)
        M[:, k] = spectrum / spectrum.max()
    return M


def _draw_abundances(spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    K, N = spec.n_endmembers, spec.pixels
    A = rng.dirichlet(np.ones(K), size=N).T
    if spec.pure_pixels:
        if N < K:
            raise ValueError("not enough pixels to plant pure pixels")
        # Plant pure pixels where the variability coefficient is largest so
        # endmember candidates observable in the scene carry the full
        # perturbation; ties are broken uniformly at random.
        cvar = spec.cvar_array()
        perm = rng.permutation(N)
        order = perm[np.argsort(cvar[perm], kind="stable")]
        spots = order[N - K :]
        A[:, spots] = np.eye(K)
    else:
        bad = np.flatnonzero(A.max(axis=0) > spec.max_abundance)
        while bad.size:
            A[:, bad] = rng.dirichlet(np.ones(K), size=bad.size).T
            bad = bad[A[:, bad].max(axis=0) > spec.max_abundance]
    return A


def generate(spec: SyntheticSpec) -> GroundTruth:
    """Draw one scene; deterministic for a fixed spec (single stream)."""
    L, K, N = spec.bands, spec.n_endmembers, spec.pixels
    M = spec.endmembers
    if M is None:
        M = builtin_endmembers(L, K)
    M = np.asarray(M, dtype=np.float64)
    if M.shape != (L, K):
        raise ValueError("endmembers must have shape (L, K)")
    if np.any(M < 0):
        raise ValueError("reference endmembers must be non-negative")
    cvar = spec.cvar_array()
    rng = np.random.default_rng(spec.seed)

    A = _draw_abundances(spec, rng)

    half = (cvar / 2.0)[:, None, None]
    xi = rng.uniform(1.0 - half, 1.0 + half, size=(N, K, 3))
    u = rng.standard_normal(size=(N, K))
    lb = _draw_breaks(L, u)
    factors = _curve_values(L, xi, lb)          # (N, K, L)
    dM = ((factors - 1.0) * M.T[None, :, :]).transpose(0, 2, 1)

    truth = model.PlmmState(M=M, A=A, dM=dM)
    X = model.reconstruct(truth)
    if np.isinf(spec.snr_db):
        sigma = 0.0
        Y = X
    else:
        sigma = float(
            np.sqrt(np.sum(X * X) / (L * N * 10.0 ** (spec.snr_db / 10.0)))
        )
        Y = X + sigma * rng.standard_normal(size=(L, N))
    hsi = model.HsiMatrix(data=Y, width=spec.width, height=spec.height)
    return GroundTruth(y=hsi, truth=truth, sigma=sigma)
