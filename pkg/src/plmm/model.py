"""Containers and objective for linear mixing with per-pixel endmember perturbations.

The observation model for pixel n is

    y_n = (M + dM_n) a_n + b_n

with M the (L, K) endmember matrix shared by all pixels, dM_n an (L, K)
per-pixel perturbation, a_n the abundance vector on the unit simplex and
b_n noise.  Matrices follow the columns-are-pixels convention: an image of
width W and height H stores pixel (i, j) in column i * W + j.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from . import penalties, subspace

if TYPE_CHECKING:
    from .penalties import SmoothnessOperator
    from .subspace import PcaFrame

PSI_KINDS = ("none", "dist", "mutual", "volume")


def as_matrix(y) -> np.ndarray:
    """Return the dense (L, N) array behind *y* (HsiMatrix or array-like)."""
    data = getattr(y, "data", y)
    out = np.asarray(data, dtype=np.float64)
    if out.ndim != 2:
        raise ValueError("expected a 2-D bands-by-pixels matrix, got ndim=%d" % out.ndim)
    return out


@dataclass
class HsiMatrix:
    """Hyperspectral image as a dense matrix with its grid geometry.

    Parameters
    ----------
    data : (L, N) ndarray
        One column per pixel, N = width * height, row-major grid order.
    width, height : int
        Grid dimensions, both >= 1.
    """

    data: np.ndarray
    width: int
    height: int

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise ValueError("data must be 2-D (bands x pixels)")
        if self.width < 1 or self.height < 1:
            raise ValueError("width and height must be positive")
        n = self.width * self.height
        if self.data.shape[1] != n:
            raise ValueError(
                "pixel count mismatch: data has %d columns, width*height is %d"
                % (self.data.shape[1], n)
            )
        if not np.all(np.isfinite(self.data)):
            raise ValueError("image matrix contains non-finite entries")

    @property
    def bands(self) -> int:
        return self.data.shape[0]

    @property
    def pixels(self) -> int:
        return self.data.shape[1]


@dataclass
class PlmmState:
    """Model variables: endmembers, abundances and the perturbation stack.

    M is (L, K), A is (K, N) and dM is (N, L, K) with dM[n] the perturbation
    of pixel n.  Instances are treated as immutable; solvers return new
    states instead of mutating arrays in place.
    """

    M: np.ndarray
    A: np.ndarray
    dM: np.ndarray

    def __post_init__(self):
        self.M = np.asarray(self.M, dtype=np.float64)
        self.A = np.asarray(self.A, dtype=np.float64)
        self.dM = np.asarray(self.dM, dtype=np.float64)
        if self.M.ndim != 2 or self.A.ndim != 2 or self.dM.ndim != 3:
            raise ValueError("M must be (L,K), A (K,N), dM (N,L,K)")
        L, K = self.M.shape
        if self.A.shape[0] != K:
            raise ValueError("A has %d rows, expected K=%d" % (self.A.shape[0], K))
        N = self.A.shape[1]
        if self.dM.shape != (N, L, K):
            raise ValueError(
                "dM has shape %s, expected %s" % (self.dM.shape, (N, L, K))
            )

    @property
    def bands(self) -> int:
        return self.M.shape[0]

    @property
    def n_endmembers(self) -> int:
        return self.M.shape[1]

    @property
    def pixels(self) -> int:
        return self.A.shape[1]


@dataclass
class PenaltyConfig:
    """Weights and variants of the three regularizers.

    alpha scales the spatial smoothness of A, beta the endmember penalty
    psi (selected by psi_kind), gamma the energy of the perturbations.
    psi_kind 'dist' needs m0, 'volume' needs a fitted PcaFrame; alpha > 0
    needs the smoothness operator of the pixel grid.
    """

    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0
    psi_kind: str = "none"
    m0: np.ndarray | None = None
    smoothness: "SmoothnessOperator | None" = None
    frame: "PcaFrame | None" = None

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0 or self.gamma < 0:
            raise ValueError("penalty weights must be non-negative")
        if self.psi_kind not in PSI_KINDS:
            raise ValueError("psi_kind must be one of %s" % (PSI_KINDS,))
        if self.m0 is not None:
            self.m0 = np.asarray(self.m0, dtype=np.float64)


@dataclass
class ObjectiveTerms:
    """Value of each objective term, before weighting, plus the weighted total."""

    data: float
    phi: float
    psi: float
    upsilon: float
    total: float


def reconstruct(state: PlmmState) -> np.ndarray:
    """Forward model: column n of the result is (M + dM_n) @ a_n."""
    return state.M @ state.A + np.einsum("nlk,kn->ln", state.dM, state.A)


def objective_terms(y, state: PlmmState, cfg: PenaltyConfig) -> ObjectiveTerms:
    """Evaluate the unmixing objective and its per-term breakdown.

    Returns the four raw terms (data misfit, phi, psi, upsilon) and the
    weighted total data + alpha*phi + beta*psi + gamma*upsilon.  Terms whose
    operators are absent are reported as zero only when their weight is zero;
    a positive weight without the needed operator raises ValueError.
    """
    Y = as_matrix(y)
    if Y.shape != (state.bands, state.pixels):
        raise ValueError(
            "observation shape %s does not match state %s"
            % (Y.shape, (state.bands, state.pixels))
        )
    resid = Y - reconstruct(state)
    data = 0.5 * float(np.sum(resid * resid))

    phi = 0.0
    if cfg.smoothness is not None:
        phi = penalties.phi_value(cfg.smoothness, state.A)
    elif cfg.alpha > 0:
        raise ValueError("alpha > 0 requires a smoothness operator")

    psi = 0.0
    if cfg.psi_kind == "dist":
        if cfg.m0 is None:
            raise ValueError("psi_kind 'dist' requires a reference m0")
        psi = penalties.psi_dist_value(state.M, cfg.m0)
    elif cfg.psi_kind == "mutual":
        psi = penalties.psi_mutual_value(state.M)
    elif cfg.psi_kind == "volume":
        if cfg.frame is None:
            raise ValueError("psi_kind 'volume' requires a fitted PcaFrame")
        psi = subspace.volume_psi(cfg.frame.project(state.M))

    upsilon = penalties.upsilon_value(state.dM)
    total = data + cfg.alpha * phi + cfg.beta * psi + cfg.gamma * upsilon
    return ObjectiveTerms(data=data, phi=phi, psi=psi, upsilon=upsilon, total=total)


def objective(y, state: PlmmState, cfg: PenaltyConfig) -> float:
    """Weighted objective value; see objective_terms for the breakdown."""
    return objective_terms(y, state, cfg).total


def constraint_report(state: PlmmState) -> dict:
    """Worst-case constraint violations of a state.

    Returns min entry of A, max |column sum of A - 1|, min entry of M and
    min entry over pixels of M + dM_n.
    """
    colsum = state.A.sum(axis=0)
    min_mdm = float((state.M[None, :, :] + state.dM).min()) if state.pixels else 0.0
    return {
        "min_a": float(state.A.min()),
        "max_colsum_dev": float(np.abs(colsum - 1.0).max()),
        "min_m": float(state.M.min()),
        "min_m_plus_dm": min_mdm,
    }
