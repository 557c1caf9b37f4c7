"""Differentiable soft permutations: pairwise seed scores and Sinkhorn
normalization, plus the soft-permutation action on a sequence.

Sinkhorn runs in the log domain (equivalent to subtracting the row max
before exponentiation at every step), so tiny temperatures never overflow.
"""
from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor

__all__ = ["pairwise_scores", "sinkhorn", "gs_forward", "apply_soft_perm",
           "greedy_harden"]

PIN_NEG = -1e30


def pairwise_scores(a: dict, h_emb: Tensor) -> Tensor:
    """Seed matrix S (n, n): S[i, j] scores moving original event j to output
    position i, from a shared MLP on the embedding pair (h_i, h_j)."""
    n, d = h_emb.shape
    idx_i = np.repeat(np.arange(n), n)
    idx_j = np.tile(np.arange(n), n)
    pairs = ad.concat([ad.gather_rows(h_emb, idx_i),
                       ad.gather_rows(h_emb, idx_j)], axis=1)      # (n^2, 2D)
    hdim = a["gs_b1"].values.size
    hidden = ad.tanh(ad.matmul(pairs, a["gs_w1"])
                     + ad.matmul(Tensor(np.ones((n * n, 1))),
                                 ad.reshape(a["gs_b1"], (1, hdim))))
    s = ad.matmul(hidden, a["gs_w2"]) + a["gs_b2"]
    s = ad.reshape(s, (n, n))
    # Trainable identity bias: without it the MLP starts near-constant, the
    # normalized matrix starts near-uniform, and training has to climb out of
    # that mixing plateau before any structured permutation can emerge.
    return s + ad.mul(a["gs_id"], Tensor(np.eye(n)))


def _pin_padding(log_alpha: Tensor, mask) -> Tensor:
    """Pin padded rows/columns to the identity before normalization."""
    if mask is None:
        return log_alpha
    n = log_alpha.shape[0]
    real = np.asarray(mask, dtype=bool)
    keep = np.outer(real, real).astype(float)               # 1 on the real block
    additive = np.where(np.outer(real, real), 0.0, PIN_NEG)
    np.fill_diagonal(additive, np.where(real, np.diag(additive), 0.0))
    return ad.mul(log_alpha, Tensor(keep)) + Tensor(additive)


def _logsumexp(x: Tensor, axis: int) -> Tensor:
    m = ad.max_(x, axis=axis, keepdims=True)   # (n, 1) for axis=1, (1, n) for axis=0
    if axis == 1:
        spread = ad.matmul(m, Tensor(np.ones((1, x.shape[1]))))
    else:
        spread = ad.matmul(Tensor(np.ones((x.shape[0], 1))), m)
    return ad.log(ad.sum_(ad.exp(x - spread), axis=axis, keepdims=True)) + m


def sinkhorn(scores: Tensor, tau: float, n_iter: int, mask=None) -> Tensor:
    """Alternating row/column normalization of exp(scores / tau)."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    log_alpha = _pin_padding(ad.scale(scores, 1.0 / tau), mask)
    n = log_alpha.shape[0]
    ones_row = Tensor(np.ones((1, n)))
    ones_col = Tensor(np.ones((n, 1)))
    for _ in range(n_iter):
        log_alpha = log_alpha - ad.matmul(_logsumexp(log_alpha, axis=1), ones_row)
        log_alpha = log_alpha - ad.matmul(ones_col, _logsumexp(log_alpha, axis=0))
    return ad.exp(log_alpha)


def gs_forward(a: dict, h_emb: Tensor, tau: float, n_iter: int, mask=None) -> Tensor:
    """Soft permutation matrix from clean-history embeddings."""
    return sinkhorn(pairwise_scores(a, h_emb), tau, n_iter, mask)


def apply_soft_perm(perm: Tensor, t_col: Tensor, marks_onehot: Tensor):
    """Soft-permuted times (n, 1) and mixed one-hot mark rows (n, C+1)."""
    return ad.matmul(perm, t_col), ad.matmul(perm, marks_onehot)


def greedy_harden(perm_values: np.ndarray) -> np.ndarray:
    """Row-wise argmax with used-column exclusion (ties -> smaller column).

    O(n^2); adequate once Sinkhorn has annealed the matrix near-hard. The
    Hungarian assignment is the test oracle for this routine.
    """
    n = perm_values.shape[0]
    used = np.zeros(n, dtype=bool)
    pi = np.empty(n, dtype=np.intp)
    for i in range(n):
        row = np.where(used, -np.inf, perm_values[i])
        pi[i] = int(np.argmax(row))
        used[pi[i]] = True
    return pi
