"""Neural marked TPP: causal attention encoder, intensity and mark heads,
and the sequence log-likelihood.

One causal self-attention layer plus a position-wise feed-forward produces
history embeddings h_i (h_i depends only on events at positions <= i). The
intensity is a softplus affine in (h_i, elapsed time); marks are a softmax
head. Survival integrals use the trapezoidal rule so the likelihood is a
deterministic, gradient-checkable function.
"""
from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor

__all__ = [
    "MtppParams", "lift", "onehot", "positional_encoding",
    "encode", "intensity", "mark_logits", "mark_dist",
    "event_loglik_terms", "sequence_nll", "nll_clean",
    "K_INT_DEFAULT",
]

K_INT_DEFAULT = 20   # trapezoid points per inter-event survival integral
MASK_NEG = -1e30


class MtppParams:
    """Named weight arrays for the learner/adversary model."""

    def __init__(self, values: dict, num_marks: int, dim: int):
        if dim < 2 or dim % 2:
            raise ValueError("hidden dimension must be an even integer >= 2")
        self.values = values
        self.num_marks = num_marks
        self.dim = dim

    @classmethod
    def shapes(cls, num_marks, dim):
        c, d = num_marks, dim
        return {
            "mark_embed": (c + 1, d),   # one row per mark plus the padding mark
            "time_weight": (d,),
            "enc_q": (d, d), "enc_k": (d, d), "enc_v": (d, d),
            "enc_w": (d, d), "enc_b": (d,),
            "h0": (d,),
            "int_v": (d,), "int_w": (), "int_b": (),
            "mark_w": (d, c), "mark_b": (c,),
        }

    @classmethod
    def init(cls, num_marks, dim, seed=0):
        rng = np.random.default_rng(seed)
        scale = 1.0 / np.sqrt(dim)
        values = {}
        for name, shape in cls.shapes(num_marks, dim).items():
            if name in ("int_w", "int_b", "mark_b", "enc_b"):
                values[name] = np.zeros(shape)
            else:
                values[name] = rng.normal(scale=scale, size=shape)
        return cls(values, num_marks, dim)

    def copy(self):
        return MtppParams({k: v.copy() for k, v in self.values.items()},
                          self.num_marks, self.dim)


def lift(values: dict, tape=None) -> dict:
    """Wrap numpy parameters as tensors; tracked leaves when a tape is given."""
    if tape is None:
        return {k: Tensor(v) for k, v in values.items()}
    return {k: tape.leaf(v) for k, v in values.items()}


def onehot(marks, num_classes) -> np.ndarray:
    marks = np.asarray(marks, dtype=np.int64)
    out = np.zeros((marks.size, num_classes))
    out[np.arange(marks.size), marks] = 1.0
    return out


def positional_encoding(t_col: Tensor, dim: int) -> Tensor:
    """Sinusoidal continuous-time encoding of a column of times -> (n, dim)."""
    half = dim // 2
    freqs = (1.0 / 10000.0 ** (2.0 * np.arange(half) / dim)).reshape(1, half)
    ang = ad.matmul(t_col, Tensor(freqs))
    return ad.concat([ad.sin(ang), ad.cos(ang)], axis=1)


def _row_broadcast(vec: Tensor, n: int) -> Tensor:
    # materialize a (d,) parameter as n identical rows, differentiably
    d = vec.values.size
    return ad.matmul(Tensor(np.ones((n, 1))), ad.reshape(vec, (1, d)))


def _attention_mask(mask, n) -> np.ndarray:
    """Additive score mask: position i attends to real positions j <= i;
    padded positions attend only to themselves (keeps softmax well-defined;
    their embeddings are masked out of every loss)."""
    if mask is None:
        mask = np.ones(n, dtype=bool)
    allowed = np.tril(np.ones((n, n), dtype=bool)) & mask[None, :]
    np.fill_diagonal(allowed, True)
    return np.where(allowed, 0.0, MASK_NEG)


def encode(p: dict, t_col: Tensor, marks_onehot: Tensor, mask=None) -> Tensor:
    """History embeddings h (n, D); row i summarizes events at positions <= i."""
    n, d = marks_onehot.shape[0], p["time_weight"].values.size
    z = ad.matmul(marks_onehot, p["mark_embed"]) \
        + ad.mul(positional_encoding(t_col, d), _row_broadcast(p["time_weight"], n))
    q = ad.matmul(z, p["enc_q"])
    k = ad.matmul(z, p["enc_k"])
    v = ad.matmul(z, p["enc_v"])
    scores = ad.scale(ad.matmul(q, ad.transpose(k)), 1.0 / np.sqrt(d)) \
        + Tensor(_attention_mask(mask, n))
    pooled = ad.matmul(ad.softmax(scores, axis=1), v)
    return ad.tanh(ad.matmul(pooled, p["enc_w"]) + _row_broadcast(p["enc_b"], n))


def intensity(p: dict, h_i: Tensor, t, t_i) -> Tensor:
    """Conditional intensity at query time t > t_i given embedding h_i."""
    t = t if isinstance(t, Tensor) else Tensor(t)
    t_i = t_i if isinstance(t_i, Tensor) else Tensor(t_i)
    if t.values.size == 1 and t_i.values.size == 1 and t.item() < t_i.item():
        raise ValueError(f"query time {t.item()} precedes last event time {t_i.item()}")
    drive = ad.sum_(ad.mul(h_i, p["int_v"])) + p["int_w"] * (t - t_i) + p["int_b"]
    return ad.softplus(drive)


def mark_logits(p: dict, h: Tensor) -> Tensor:
    n = h.shape[0]
    c = p["mark_b"].values.size
    return ad.matmul(h, p["mark_w"]) + ad.matmul(Tensor(np.ones((n, 1))),
                                                 ad.reshape(p["mark_b"], (1, c)))


def mark_dist(p: dict, h: Tensor) -> Tensor:
    return ad.softmax(mark_logits(p, h), axis=1)


def _log_softmax(logits: Tensor) -> Tensor:
    c = logits.shape[1]
    ones_row = Tensor(np.ones((1, c)))
    m = ad.max_(logits, axis=1, keepdims=True)
    shifted = logits - ad.matmul(m, ones_row)
    lse = ad.log(ad.sum_(ad.exp(shifted), axis=1, keepdims=True))
    return shifted - ad.matmul(lse, ones_row)


def event_loglik_terms(p: dict, h_prev: Tensor, t_prev: Tensor, t_event: Tensor,
                       true_marks_onehot: np.ndarray, k_int=K_INT_DEFAULT):
    """Per-event (log intensity, survival integral, log mark prob), each (n, 1).

    ``h_prev``/``t_prev`` describe the conditioning history (row i holds the
    embedding of and the time of the event preceding event i); ``t_event``
    holds the target event times. The survival integral runs from t_prev to
    t_event with signed limits, so a conditioning time past the target
    contributes negatively rather than being clamped.
    """
    n = t_event.shape[0]
    drive = ad.reshape(ad.matmul(h_prev, ad.reshape(p["int_v"], (-1, 1))), (n, 1))
    elapsed = t_event - t_prev
    lam_event = ad.softplus(drive + p["int_w"] * elapsed + p["int_b"]) + Tensor(1e-30)
    log_lam = ad.log(lam_event)

    fractions = Tensor(np.linspace(0.0, 1.0, k_int + 1).reshape(1, -1))
    grid_elapsed = ad.matmul(elapsed, fractions)                       # (n, K+1)
    lam_grid = ad.softplus(ad.matmul(drive, Tensor(np.ones((1, k_int + 1))))
                           + p["int_w"] * grid_elapsed + p["int_b"])
    trap = np.full(k_int + 1, 1.0 / k_int)
    trap[0] = trap[-1] = 0.5 / k_int
    integral = ad.mul(elapsed, ad.matmul(lam_grid, Tensor(trap.reshape(-1, 1))))

    logp = _log_softmax(mark_logits(p, h_prev))
    log_mark = ad.sum_(ad.mul(logp, Tensor(true_marks_onehot)), axis=1, keepdims=True)
    return log_lam, integral, log_mark


def sequence_nll(p: dict, times: np.ndarray, marks: np.ndarray, num_marks: int,
                 mask=None, k_int=K_INT_DEFAULT) -> Tensor:
    """Negative log-likelihood of one (possibly padded) clean sequence."""
    n = times.size
    d = p["h0"].values.size
    t_col = Tensor(times.reshape(n, 1))
    h = encode(p, t_col, Tensor(onehot(marks, num_marks + 1)), mask)
    h_prev = ad.concat([ad.reshape(p["h0"], (1, d)),
                        ad.slice_(h, (slice(0, n - 1), slice(None)))], axis=0)
    t_prev = Tensor(np.concatenate([[0.0], times[:-1]]).reshape(n, 1))
    true_onehot = onehot(np.minimum(marks, num_marks - 1), num_marks)
    log_lam, integral, log_mark = event_loglik_terms(
        p, h_prev, t_prev, t_col, true_onehot, k_int)
    terms = log_lam - integral + log_mark
    mask_col = np.ones((n, 1)) if mask is None else mask.astype(float).reshape(n, 1)
    return ad.neg(ad.sum_(ad.mul(terms, Tensor(mask_col))))


def nll_clean(params: MtppParams, seq, k_int=K_INT_DEFAULT) -> float:
    """Untracked NLL of a Sequence under numpy parameters."""
    p = lift(params.values)
    return sequence_nll(p, seq.times, seq.marks, params.num_marks,
                        k_int=k_int).item()
