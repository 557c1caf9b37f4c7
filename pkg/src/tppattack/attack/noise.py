"""Attention-based generator of per-event additive time noise."""
from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..mtpp.model import MASK_NEG, positional_encoding

__all__ = ["eps_forward"]


def _causal_mask(mask, n) -> np.ndarray:
    if mask is None:
        mask = np.ones(n, dtype=bool)
    allowed = np.tril(np.ones((n, n), dtype=bool)) & np.asarray(mask, bool)[None, :]
    np.fill_diagonal(allowed, True)
    return np.where(allowed, 0.0, MASK_NEG)


def eps_forward(a: dict, t_perm: Tensor, marks_perm: Tensor, mask=None) -> Tensor:
    """Noise column (n, 1) for a (soft- or hard-) permuted sequence.

    Input layer embeds each event from its (mixed) mark row and its time plus
    a sinusoidal encoding; a causally masked self-attention layer aggregates
    the prefix; a tanh and a linear head project to one scalar per event.
    """
    n = t_perm.shape[0]
    d = a["w_t"].values.size
    z = ad.matmul(marks_perm, a["w_c"]) \
        + ad.matmul(t_perm, ad.reshape(a["w_t"], (1, d))) \
        + positional_encoding(t_perm, d)
    q = ad.matmul(z, a["attn_q"])
    k = ad.matmul(z, a["attn_k"])
    v = ad.matmul(z, a["attn_v"])
    scores = ad.scale(ad.matmul(q, ad.transpose(k)), 1.0 / np.sqrt(d)) \
        + Tensor(_causal_mask(mask, n))
    pooled = ad.tanh(ad.matmul(ad.softmax(scores, axis=1), v))
    eps = ad.matmul(pooled, ad.reshape(a["out_w"], (d, 1))) + a["out_b"]
    if mask is not None:
        eps = ad.mul(eps, Tensor(np.asarray(mask, float).reshape(n, 1)))
    return eps
