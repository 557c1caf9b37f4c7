# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled Ogata thinning loop for exponential-kernel Hawkes processes.

Keep in lockstep with ``_hawkes_py.py``: same splitmix64 stream, same
floating-point operation order, bit-identical output for the same seed.
"""
from libc.math cimport exp, log
from libc.stdlib cimport free, malloc

cdef unsigned long long _next_u64(unsigned long long *state) nogil:
    cdef unsigned long long z
    state[0] = state[0] + 0x9E3779B97F4A7C15ULL
    z = state[0]
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    z = z ^ (z >> 31)
    return z

cdef double _next_uniform(unsigned long long *state) nogil:
    return (<double>(_next_u64(state) >> 11) + 0.5) * (1.0 / 9007199254740992.0)

DEF MAX_EVENTS = 2000000


def thinning(mu, alpha, beta, horizon, seed):
    """Sample event (time, mark) pairs on [0, horizon] by Ogata thinning."""
    cdef int n_marks = len(mu)
    cdef int k, c
    cdef double mu_total = 0.0, g_total, lam_bar, lam_total
    cdef double t = 0.0, w, u, d, r, target, acc, decay
    cdef double beta_c = beta, horizon_c = horizon
    cdef unsigned long long state = (<unsigned long long>(int(seed))) ^ 0xD1B54A32D192ED03ULL
    cdef double *mu_c = <double *>malloc(n_marks * sizeof(double))
    cdef double *g = <double *>malloc(n_marks * sizeof(double))
    cdef double *alpha_c = <double *>malloc(n_marks * n_marks * sizeof(double))
    if mu_c == NULL or g == NULL or alpha_c == NULL:
        free(mu_c); free(g); free(alpha_c)
        raise MemoryError()
    times, marks = [], []
    try:
        for k in range(n_marks):
            mu_c[k] = mu[k]
            mu_total += mu_c[k]
            g[k] = 0.0
        for c in range(n_marks):
            row = alpha[c]
            for k in range(n_marks):
                alpha_c[c * n_marks + k] = row[k]
        while True:
            g_total = 0.0
            for k in range(n_marks):
                g_total += g[k]
            lam_bar = mu_total + g_total
            if lam_bar <= 0.0:
                break
            u = _next_uniform(&state)
            w = -log(u) / lam_bar
            t += w
            if t > horizon_c:
                break
            decay = exp(-beta_c * w)
            lam_total = 0.0
            for k in range(n_marks):
                g[k] *= decay
                lam_total += mu_c[k] + g[k]
            d = _next_uniform(&state)
            if d * lam_bar <= lam_total:
                r = _next_uniform(&state)
                target = r * lam_total
                acc = 0.0
                c = n_marks - 1
                for k in range(n_marks):
                    acc += mu_c[k] + g[k]
                    if target <= acc:
                        c = k
                        break
                for k in range(n_marks):
                    g[k] += alpha_c[c * n_marks + k]
                times.append(t)
                marks.append(c)
                if len(times) >= MAX_EVENTS:
                    raise RuntimeError("thinning: event cap exceeded; "
                                       "check stationarity of parameters")
    finally:
        free(mu_c)
        free(g)
        free(alpha_c)
    return times, marks
