"""Adam with global-norm gradient clipping, over named numpy parameters."""
from __future__ import annotations

import numpy as np

__all__ = ["Adam", "clip_global_norm"]


def clip_global_norm(grads: dict, max_norm: float) -> dict:
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if max_norm <= 0 or total <= max_norm:
        return grads
    factor = max_norm / total
    return {k: g * factor for k, g in grads.items()}


class Adam:
    def __init__(self, step_size=1e-3, beta1=0.9, beta2=0.999, eps=1e-8,
                 clip_norm=5.0):
        self.step_size = step_size
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.clip_norm = clip_norm
        self._m = {}
        self._v = {}
        self._t = 0

    def step(self, params: dict, grads: dict):
        """Update ``params`` in place from ``grads`` (both name -> ndarray)."""
        grads = clip_global_norm(grads, self.clip_norm)
        self._t += 1
        b1, b2 = self.beta1, self.beta2
        corr1 = 1.0 - b1 ** self._t
        corr2 = 1.0 - b2 ** self._t
        for name, g in grads.items():
            m = self._m.get(name)
            if m is None:
                m = np.zeros_like(g)
                self._v[name] = np.zeros_like(g)
            v = self._v[name]
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            self._m[name] = m
            self._v[name] = v
            params[name] -= self.step_size * (m / corr1) / (np.sqrt(v / corr2) + self.eps)
