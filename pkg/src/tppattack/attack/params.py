"""Parameters of the two-stage attack: the pairwise-MLP permutation
generator and the attention noise generator, plus penalty weights."""
from __future__ import annotations

import numpy as np

__all__ = ["AttackParams"]


class AttackParams:
    """Trainable weights (``values``) and attack hyperparameters.

    tau/n_iter drive the Sinkhorn relaxation; rho_d, rho_ab, rho_c weight the
    soft distance, the chronology hinge, and the mark-mismatch term.
    """

    def __init__(self, values, num_marks, dim, hidden=16, tau=1.0, n_iter=20,
                 rho_d=1.0, rho_ab=10.0, rho_c=1.0, hinge_margin=0.0):
        if tau <= 0:
            raise ValueError("tau must be positive")
        if n_iter < 1:
            raise ValueError("n_iter must be >= 1")
        if min(rho_d, rho_ab, rho_c) < 0:
            raise ValueError("penalty weights must be nonnegative")
        self.values = values
        self.num_marks = num_marks
        self.dim = dim
        self.hidden = hidden
        self.tau = tau
        self.n_iter = n_iter
        self.rho_d = rho_d
        self.rho_ab = rho_ab
        self.rho_c = rho_c
        self.hinge_margin = hinge_margin

    @classmethod
    def shapes(cls, num_marks, dim, hidden=16):
        c, d, h = num_marks, dim, hidden
        return {
            "gs_w1": (2 * d, h), "gs_b1": (h,),     # pairwise score MLP
            "gs_w2": (h, 1), "gs_b2": (), "gs_id": (),
            "w_c": (c + 1, d), "w_t": (d,),         # noise-net input layer
            "attn_q": (d, d), "attn_k": (d, d), "attn_v": (d, d),
            "out_w": (d,), "out_b": (),             # scalar noise head
        }

    @classmethod
    def init(cls, num_marks, dim, hidden=16, seed=0, **hyper):
        rng = np.random.default_rng(seed)
        values = {}
        for name, shape in cls.shapes(num_marks, dim, hidden).items():
            if name == "gs_id":
                # start near the identity permutation (see pairwise_scores)
                values[name] = np.array(4.0)
            elif name.endswith("_b") or name.startswith("gs_b"):
                values[name] = np.zeros(shape)
            else:
                fan_in = shape[0] if shape else 1
                values[name] = rng.normal(scale=1.0 / np.sqrt(fan_in), size=shape)
        return cls(values, num_marks, dim, hidden=hidden, **hyper)

    def copy(self):
        return AttackParams({k: v.copy() for k, v in self.values.items()},
                            self.num_marks, self.dim, hidden=self.hidden,
                            tau=self.tau, n_iter=self.n_iter, rho_d=self.rho_d,
                            rho_ab=self.rho_ab, rho_c=self.rho_c,
                            hinge_margin=self.hinge_margin)
