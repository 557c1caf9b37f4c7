"""Synthetic data: multivariate exponential-kernel Hawkes simulation.

The per-candidate thinning loop lives in ``tppattack.kernels`` (compiled
extension when available, pure-Python fallback otherwise); this module owns
parameter validation and dataset assembly.
"""
from __future__ import annotations

import numpy as np

from .. import kernels
from .data import Dataset, Sequence

__all__ = ["simulate_hawkes", "simulate_dataset"]

_EMPTY_RETRIES = 16


def simulate_hawkes(mu, alpha, beta, horizon, seed) -> Sequence:
    """Exact sample of a Hawkes process on [0, horizon] via Ogata thinning.

    mu: per-mark base rates; alpha[j, k]: jump added to mark k's intensity by
    an event of mark j; beta: common exponential decay rate. Requires a
    stationary parameterization (spectral radius of alpha/beta < 1).

    An empty draw (possible on short horizons) is rejected and resampled
    from a seed-derived substream; all-zero intensity is an error upfront.
    """
    mu = np.asarray(mu, dtype=np.float64)
    alpha = np.atleast_2d(np.asarray(alpha, dtype=np.float64))
    if np.any(mu < 0) or np.any(alpha < 0):
        raise ValueError("mu and alpha must be nonnegative")
    if beta <= 0 or horizon <= 0:
        raise ValueError("beta and horizon must be positive")
    if alpha.shape != (mu.size, mu.size):
        raise ValueError(f"alpha shape {alpha.shape} does not match {mu.size} marks")
    radius = float(np.max(np.abs(np.linalg.eigvals(alpha / beta))))
    if radius >= 1.0:
        raise ValueError(f"non-stationary parameters: spectral radius {radius:.3f} >= 1")
    if np.all(mu == 0):
        raise ValueError("all base rates are zero: no events can ever occur")

    mu_list = mu.tolist()
    alpha_list = alpha.tolist()
    for attempt in range(_EMPTY_RETRIES):
        times, marks = kernels.thinning(mu_list, alpha_list, float(beta),
                                        float(horizon), int(seed) + 0x10001 * attempt)
        if times:
            return Sequence(times, marks)
    raise RuntimeError(f"no events in {_EMPTY_RETRIES} attempts; "
                       "increase horizon or base rates")


def simulate_dataset(num_sequences, mu, alpha, beta, horizon, seed,
                     max_len=None, name="hawkes") -> Dataset:
    """Simulate a dataset of independent sequences, optionally truncated."""
    mu = np.asarray(mu, dtype=np.float64)
    rng = np.random.default_rng(seed)
    sequences = []
    for _ in range(num_sequences):
        seq = simulate_hawkes(mu, alpha, beta, horizon,
                              int(rng.integers(0, 2**63 - 1)))
        if max_len is not None and len(seq) > max_len:
            seq = Sequence(seq.times[:max_len], seq.marks[:max_len])
        sequences.append(seq)
    return Dataset(sequences, num_marks=mu.size, name=name)
