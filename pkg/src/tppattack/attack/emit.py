"""Hardening a trained attack into valid adversarial sequences."""
from __future__ import annotations

import numpy as np

from ..autodiff import Tensor
from ..ctes import DistanceParams, Sequence, distance_hard
from ..mtpp.model import MtppParams, lift, onehot
from ..mtpp.predict import encode_np
from .losses import constraint_matrices
from .noise import eps_forward
from .params import AttackParams
from .sinkhorn import greedy_harden, gs_forward

__all__ = ["greedy_harden", "emit_adversarial"]


def emit_adversarial(seq: Sequence, attack: AttackParams, model: MtppParams,
                     tau=None):
    """Emit a valid adversarial sequence from trained attack parameters.

    Hardens the soft permutation greedily, evaluates the noise net on the
    hard-permuted sequence, and re-sorts as a final safety net so the output
    always satisfies the sequence invariants. Returns (Sequence, report)
    where the report carries the realized permutation (output position ->
    original index), the hard distance, and the pre-sort hinge value.
    """
    n = len(seq)
    a = lift(attack.values)
    h_emb = encode_np(model, seq.times, seq.marks)
    perm_soft = gs_forward(a, Tensor(h_emb), tau or attack.tau, attack.n_iter)
    pi = greedy_harden(perm_soft.values)

    t_perm = seq.times[pi]
    c_perm = seq.marks[pi]
    eps = eps_forward(a, Tensor(t_perm.reshape(n, 1)),
                      Tensor(onehot(c_perm, attack.num_marks + 1))).values.ravel()

    amat, bmat = constraint_matrices(n)
    hinge = float(np.sum(np.maximum(amat @ eps - bmat @ t_perm, 0.0)))

    perturbed = t_perm + eps
    order = np.argsort(perturbed, kind="stable")
    t_out = perturbed[order]
    if t_out[0] < 0:
        t_out = t_out - t_out[0]
    for i in range(1, n):
        if t_out[i] <= t_out[i - 1]:
            t_out[i] = np.nextafter(t_out[i - 1], np.inf)
    emitted = Sequence(t_out, c_perm[order])

    realized_perm = pi[order]
    dist = distance_hard(seq, emitted, DistanceParams(rho_c=attack.rho_c))
    return emitted, {"perm": realized_perm.tolist(), "distance": dist,
                     "hinge": hinge, "resorted": bool(np.any(order != np.arange(n)))}
