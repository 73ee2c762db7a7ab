"""Evaluation metrics: average spectral angle, mean-square errors, reconstruction error.

Estimated endmembers are matched to the ground truth by minimizing the
total spectral angle over permutations before any metric is computed.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np

from . import model

_NORM_TOL = 1e-300


@dataclass
class EvalReport:
    """Matched-metric summary of one run."""

    asam_deg: float
    gmse_a: float
    gmse_dm: float
    re: float
    permutation: tuple


def spectral_angle(u: np.ndarray, v: np.ndarray) -> float:
    """Angle between two spectra in radians, cosine clamped to [-1, 1]."""
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu < _NORM_TOL or nv < _NORM_TOL:
        raise ValueError("spectral angle undefined for a zero-norm column")
    c = float(np.clip(u @ v / (nu * nv), -1.0, 1.0))
    return float(np.arccos(c))


def _angle_table(M_true: np.ndarray, M_est: np.ndarray) -> np.ndarray:
    K = M_true.shape[1]
    table = np.empty((K, K))
    for i in range(K):
        for j in range(K):
            table[i, j] = spectral_angle(M_true[:, i], M_est[:, j])
    return table


def match_endmembers(M_true, M_est) -> tuple:
    """Permutation p minimizing the total spectral angle, est column p[i] <-> true i.

    Exhaustive for K <= 8, greedy beyond.
    """
    M_true = np.asarray(M_true, dtype=np.float64)
    M_est = np.asarray(M_est, dtype=np.float64)
    if M_true.shape != M_est.shape:
        raise ValueError("endmember matrices must share a shape")
    K = M_true.shape[1]
    table = _angle_table(M_true, M_est)
    if K <= 8:
        best, best_cost = None, np.inf
        for perm in permutations(range(K)):
            cost = sum(table[i, perm[i]] for i in range(K))
            if cost < best_cost:
                best, best_cost = perm, cost
        return tuple(best)
    taken = np.zeros(K, dtype=bool)
    out = []
    for i in range(K):
        order = np.argsort(table[i])
        j = next(int(c) for c in order if not taken[c])
        taken[j] = True
        out.append(j)
    return tuple(out)


def apply_permutation(state: model.PlmmState, perm) -> model.PlmmState:
    """Reorder an estimated state so its columns align with the truth."""
    p = list(perm)
    return model.PlmmState(
        M=state.M[:, p].copy(), A=state.A[p, :].copy(), dM=state.dM[:, :, p].copy()
    )


def asam(M_true, M_est) -> float:
    """Average spectral angle mapper in degrees (columns already matched)."""
    M_true = np.asarray(M_true, dtype=np.float64)
    M_est = np.asarray(M_est, dtype=np.float64)
    if M_true.shape != M_est.shape:
        raise ValueError("endmember matrices must share a shape")
    K = M_true.shape[1]
    total = sum(spectral_angle(M_true[:, k], M_est[:, k]) for k in range(K))
    return float(np.degrees(total / K))


def gmse_a(A_true, A_est) -> float:
    """||A - A_hat||_F^2 / (K N)."""
    A_true = np.asarray(A_true, dtype=np.float64)
    A_est = np.asarray(A_est, dtype=np.float64)
    if A_true.shape != A_est.shape:
        raise ValueError("abundance matrices must share a shape")
    K, N = A_true.shape
    d = A_true - A_est
    return float(np.sum(d * d)) / (K * N)


def gmse_dm(dM_true, dM_est) -> float:
    """sum_n ||dM_n - dM_hat_n||_F^2 / (N L K)."""
    dM_true = np.asarray(dM_true, dtype=np.float64)
    dM_est = np.asarray(dM_est, dtype=np.float64)
    if dM_true.shape != dM_est.shape:
        raise ValueError("perturbation stacks must share a shape")
    N, L, K = dM_true.shape
    d = dM_true - dM_est
    return float(np.sum(d * d)) / (N * L * K)


def re(y, y_hat) -> float:
    """Reconstruction error ||Y - Y_hat||_F^2 / (L N)."""
    Y = model.as_matrix(y)
    Yh = model.as_matrix(y_hat)
    if Y.shape != Yh.shape:
        raise ValueError("observation matrices must share a shape")
    L, N = Y.shape
    d = Y - Yh
    return float(np.sum(d * d)) / (L * N)


def variability_energy(dM) -> np.ndarray:
    """Per-pixel perturbation magnitude (1/sqrt(L)) * ||dm_{n,k}||, shape (K, N)."""
    d = np.asarray(dM, dtype=np.float64)
    if d.ndim != 3:
        raise ValueError("perturbation stack must be 3-D")
    L = d.shape[1]
    return np.sqrt(np.sum(d * d, axis=1)).T / np.sqrt(L)


def evaluate(truth: model.PlmmState, est: model.PlmmState, y) -> EvalReport:
    """Match the estimate to the truth and compute every metric."""
    perm = match_endmembers(truth.M, est.M)
    matched = apply_permutation(est, perm)
    return EvalReport(
        asam_deg=asam(truth.M, matched.M),
        gmse_a=gmse_a(truth.A, matched.A),
        gmse_dm=gmse_dm(truth.dM, matched.dM),
        re=re(y, model.reconstruct(matched)),
        permutation=perm,
    )
