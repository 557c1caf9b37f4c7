"""Central finite-difference gradient checking."""
from __future__ import annotations

import numpy as np

from .tensor import Tape, Tensor, backward

__all__ = ["grad_check"]


def grad_check(f, x, h=1e-5, tol=1e-4):
    """Compare the taped gradient of scalar ``f`` at ``x`` with central
    finite differences.

    ``f`` must accept a Tensor and return a scalar Tensor; it is evaluated on
    untracked tensors for the numeric probes. The relative error denominator
    is max(|analytic|, |numeric|, 1e-8) per coordinate.

    Returns (passed, max_relative_error).
    """
    x = np.asarray(x, dtype=np.float64)
    tape = Tape()
    xt = tape.leaf(x)
    y = f(xt)
    if y.values.size != 1:
        raise ValueError("grad_check target must be scalar")
    analytic = backward(tape, y).get(xt.node)
    if analytic is None:
        analytic = np.zeros_like(x)
    analytic = analytic.reshape(x.shape)

    flat = x.ravel()
    numeric = np.empty_like(flat)
    for j in range(flat.size):
        for sign, slot in ((+1.0, 0), (-1.0, 1)):
            probe = flat.copy()
            probe[j] += sign * h
            val = f(Tensor(probe.reshape(x.shape))).item()
            if not np.isfinite(val):
                raise ValueError(f"grad_check: non-finite value at probe {j}")
            if slot == 0:
                plus = val
            else:
                minus = val
        numeric[j] = (plus - minus) / (2.0 * h)
    numeric = numeric.reshape(x.shape)

    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    max_rel = float(np.max(np.abs(analytic - numeric) / denom)) if x.size else 0.0
    return max_rel < tol, max_rel
