"""Figure rendering for run reports.

Every helper writes a PNG to the given path and returns that path. Rendering
uses the Agg backend so reports build identically on headless machines.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .metrics import variability_energy


def _save(fig, path):
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def plot_objective_trace(rows, path):
    """Objective terms against the outer iteration; rows as written to the CSV."""
    rows = np.asarray(list(rows), dtype=np.float64)
    it = rows[:, 0]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    labels = ["J", "data", "phi", "psi", "upsilon"]
    for col, label in enumerate(labels, start=1):
        series = rows[:, col]
        if label != "J" and not np.any(series):
            continue
        ax.plot(it, series, marker="o", markersize=3, label=label)
    ax.set_xlabel("outer iteration")
    ax.set_ylabel("objective value")
    ax.set_yscale("log")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def plot_endmembers(M, path, title="Estimated endmembers"):
    M = np.asarray(M, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for k in range(M.shape[1]):
        ax.plot(M[:, k], label=f"endmember {k}")
    ax.set_xlabel("band")
    ax.set_ylabel("reflectance")
    ax.set_title(title)
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def plot_endmember_comparison(M_ref, M_est, path):
    """Reference spectra as solid lines, estimates dashed, one panel per column."""
    M_ref = np.asarray(M_ref, dtype=np.float64)
    M_est = np.asarray(M_est, dtype=np.float64)
    K = M_ref.shape[1]
    fig, axes = plt.subplots(1, K, figsize=(3.2 * K, 3.2), squeeze=False)
    for k in range(K):
        ax = axes[0, k]
        ax.plot(M_ref[:, k], label="reference")
        ax.plot(M_est[:, k], linestyle="--", label="estimate")
        ax.set_title(f"endmember {k}")
        ax.set_xlabel("band")
        if k == 0:
            ax.set_ylabel("reflectance")
            ax.legend()
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def plot_abundance_maps(A, width, height, path):
    """One grayscale panel per endmember, raster order matching the cube."""
    A = np.asarray(A, dtype=np.float64)
    K = A.shape[0]
    fig, axes = plt.subplots(1, K, figsize=(3.0 * K, 3.2), squeeze=False)
    for k in range(K):
        ax = axes[0, k]
        im = ax.imshow(
            A[k].reshape(height, width), cmap="gray", vmin=0.0, vmax=1.0
        )
        ax.set_title(f"abundance {k}")
        ax.set_xticks([])
        ax.set_yticks([])
        fig.colorbar(im, ax=ax, fraction=0.046)
    fig.tight_layout()
    return _save(fig, path)


def plot_variability_maps(dM, width, height, path):
    """Per-pixel perturbation energy, one panel per endmember."""
    energy = variability_energy(dM)
    K = energy.shape[0]
    fig, axes = plt.subplots(1, K, figsize=(3.0 * K, 3.2), squeeze=False)
    for k in range(K):
        ax = axes[0, k]
        im = ax.imshow(energy[k].reshape(height, width), cmap="gray")
        ax.set_title(f"variability {k}")
        ax.set_xticks([])
        ax.set_yticks([])
        fig.colorbar(im, ax=ax, fraction=0.046)
    fig.tight_layout()
    return _save(fig, path)
