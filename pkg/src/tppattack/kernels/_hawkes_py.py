"""Pure-Python Ogata thinning loop for exponential-kernel Hawkes processes.

Mirrors ``_hawkes_c.pyx`` statement for statement: both use the same
splitmix64 stream and the same floating-point operation order, so the two
implementations produce bit-identical samples for the same seed.
"""
from __future__ import annotations

import math

_MASK64 = (1 << 64) - 1
_MAX_EVENTS = 2_000_000


def _next_u64(state):
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    z = z ^ (z >> 31)
    return state, z


def _next_uniform(state):
    state, z = _next_u64(state)
    return state, ((z >> 11) + 0.5) * (1.0 / 9007199254740992.0)


def thinning(mu, alpha, beta, horizon, seed):
    """Sample event (time, mark) pairs on [0, horizon] by Ogata thinning.

    mu: list of base rates per mark; alpha[j][k]: excitation of mark k by an
    event of mark j; beta: common exponential decay. Returns (times, marks)
    as plain lists.
    """
    n_marks = len(mu)
    mu_total = 0.0
    for k in range(n_marks):
        mu_total += mu[k]
    g = [0.0] * n_marks
    times, marks = [], []
    state = (int(seed) ^ 0xD1B54A32D192ED03) & _MASK64
    t = 0.0
    while True:
        g_total = 0.0
        for k in range(n_marks):
            g_total += g[k]
        lam_bar = mu_total + g_total
        if lam_bar <= 0.0:
            break
        state, u = _next_uniform(state)
        w = -math.log(u) / lam_bar
        t += w
        if t > horizon:
            break
        decay = math.exp(-beta * w)
        lam_total = 0.0
        for k in range(n_marks):
            g[k] *= decay
            lam_total += mu[k] + g[k]
        state, d = _next_uniform(state)
        if d * lam_bar <= lam_total:
            state, r = _next_uniform(state)
            target = r * lam_total
            acc = 0.0
            c = n_marks - 1
            for k in range(n_marks):
                acc += mu[k] + g[k]
                if target <= acc:
                    c = k
                    break
            for k in range(n_marks):
                g[k] += alpha[c][k]
            times.append(t)
            marks.append(c)
            if len(times) >= _MAX_EVENTS:
                raise RuntimeError("thinning: event cap exceeded; "
                                   "check stationarity of parameters")
    return times, marks
