"""Regularization terms: spatial smoothness of A, endmember penalties, perturbation energy.

The smoothness term is phi(A) = 0.5 * ||A H||_F^2 where H is a sparse
(N, 4N) horizontal concatenation of four direction blocks (left, right, up,
down).  Column n of block k holds the finite difference between pixel n and
its neighbor in direction k (+1 on row n, -1 on the neighbor row) and is
empty when the neighbor falls outside the grid.  No wrap-around.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

# direction order fixed as (left, right, up, down)
_DIRECTIONS = ("left", "right", "up", "down")


@dataclass
class SmoothnessOperator:
    """Finite-difference operator of a width x height pixel grid.

    Attributes
    ----------
    H : scipy.sparse.csc_matrix, (N, 4N)
        Concatenated direction blocks.
    adjacency : scipy.sparse.csr_matrix, (N, N)
        Symmetric 0/1 four-neighborhood.
    degree : (N,) ndarray
        Neighbor count of each pixel; equals sum_k h_{n, n+kN}^2.
    """

    width: int
    height: int
    H: sp.csc_matrix
    adjacency: sp.csr_matrix
    degree: np.ndarray
    gram: sp.csr_matrix  # H @ H.T, cached for gradients

    @property
    def pixels(self) -> int:
        return self.width * self.height


def _direction_pairs(width: int, height: int):
    """Index pairs (pixel, neighbor) for each direction, -1 marking no neighbor."""
    n = width * height
    cols = np.arange(n) % width
    rows = np.arange(n) // width
    nbr = np.empty((4, n), dtype=np.int64)
    nbr[0] = np.where(cols > 0, np.arange(n) - 1, -1)            # left
    nbr[1] = np.where(cols < width - 1, np.arange(n) + 1, -1)    # right
    nbr[2] = np.where(rows > 0, np.arange(n) - width, -1)        # up
    nbr[3] = np.where(rows < height - 1, np.arange(n) + width, -1)  # down
    return nbr


def build_smoothness_operator(width: int, height: int) -> SmoothnessOperator:
    """Assemble the sparse difference operator for a width x height grid."""
    if width < 1 or height < 1:
        raise ValueError("grid dimensions must be positive")
    n = width * height
    nbr = _direction_pairs(width, height)

    rows, cols, vals = [], [], []
    for k in range(4):
        owner = np.flatnonzero(nbr[k] >= 0)
        col = owner + k * n
        rows.append(owner)
        cols.append(col)
        vals.append(np.ones(owner.size))
        rows.append(nbr[k, owner])
        cols.append(col)
        vals.append(-np.ones(owner.size))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    H = sp.csc_matrix((vals, (rows, cols)), shape=(n, 4 * n))

    pair_owner = np.concatenate([np.flatnonzero(nbr[k] >= 0) for k in range(4)])
    pair_nbr = np.concatenate([nbr[k][nbr[k] >= 0] for k in range(4)])
    adjacency = sp.csr_matrix(
        (np.ones(pair_owner.size), (pair_owner, pair_nbr)), shape=(n, n)
    )
    degree = np.asarray(adjacency.sum(axis=1)).ravel()
    gram = (H @ H.T).tocsr()
    return SmoothnessOperator(
        width=width, height=height, H=H, adjacency=adjacency, degree=degree, gram=gram
    )


def phi_value(op: SmoothnessOperator, A: np.ndarray) -> float:
    """0.5 * ||A H||_F^2 for A of shape (K, N)."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[1] != op.pixels:
        raise ValueError("A must be (K, %d)" % op.pixels)
    AH = (op.H.T @ A.T).T
    return 0.5 * float(np.sum(AH * AH))


def phi_grad(op: SmoothnessOperator, A: np.ndarray) -> np.ndarray:
    """Gradient of phi with respect to A: A (H H^T)."""
    A = np.asarray(A, dtype=np.float64)
    return (op.gram @ A.T).T


def smoothness_terms(op: SmoothnessOperator, A: np.ndarray, n: int):
    """Coefficients of the separable surrogate phi(a_n) for pixel n.

    Returns (cA_n, c_n): phi(a_n) = 0.5 * cA_n * ||a_n||^2 + c_n @ a_n with
    neighbor abundances taken from A as-is.  cA_n is the neighbor count and
    c_n = -(sum of neighbor columns).
    """
    if not 0 <= n < op.pixels:
        raise ValueError("pixel index out of range")
    nbr = op.adjacency.getrow(n).indices
    c_n = -np.asarray(A)[:, nbr].sum(axis=1)
    return float(op.degree[n]), c_n


def smoothness_terms_all(op: SmoothnessOperator, A: np.ndarray):
    """Vectorized smoothness_terms: returns (degree (N,), C (K, N)) with C[:, n] = c_n."""
    A = np.asarray(A, dtype=np.float64)
    C = -(op.adjacency @ A.T).T
    return op.degree.copy(), C


@dataclass
class MutualDistOperator:
    """Precomputed Gram matrix S_G = sum_k G_k G_k^T of the pairwise-difference maps."""

    K: int
    S_G: np.ndarray


def mutual_difference_basis(K: int, k: int) -> np.ndarray:
    """G_k = -I_K + e_k 1_K^T; column j of M G_k is m_k - m_j."""
    G = -np.eye(K)
    G[k, :] += 1.0
    return G


def mutual_dist_operator(K: int) -> MutualDistOperator:
    """S_G in closed form, 2 (K I - 1 1^T)."""
    if K < 1:
        raise ValueError("K must be positive")
    S = 2.0 * (K * np.eye(K) - np.ones((K, K)))
    return MutualDistOperator(K=K, S_G=S)


def psi_dist_value(M: np.ndarray, M0: np.ndarray) -> float:
    """0.5 * ||M - M0||_F^2."""
    M = np.asarray(M, dtype=np.float64)
    M0 = np.asarray(M0, dtype=np.float64)
    if M.shape != M0.shape:
        raise ValueError("M and M0 shapes differ: %s vs %s" % (M.shape, M0.shape))
    d = M - M0
    return 0.5 * float(np.sum(d * d))


def psi_dist_grad(M: np.ndarray, M0: np.ndarray) -> np.ndarray:
    return np.asarray(M, dtype=np.float64) - np.asarray(M0, dtype=np.float64)


def psi_mutual_value(M: np.ndarray) -> float:
    """0.5 * sum_k ||M G_k||_F^2 = 0.5 * trace(M^T M S_G)."""
    M = np.asarray(M, dtype=np.float64)
    S = mutual_dist_operator(M.shape[1]).S_G
    return 0.5 * float(np.sum((M.T @ M) * S))


def psi_mutual_grad(M: np.ndarray) -> np.ndarray:
    M = np.asarray(M, dtype=np.float64)
    return M @ mutual_dist_operator(M.shape[1]).S_G


def upsilon_value(dM: np.ndarray) -> float:
    """0.5 * sum_n ||dM_n||_F^2 over the (N, L, K) stack."""
    dM = np.asarray(dM, dtype=np.float64)
    return 0.5 * float(np.sum(dM * dM))


def upsilon_grad(dM: np.ndarray) -> np.ndarray:
    return np.asarray(dM, dtype=np.float64).copy()
