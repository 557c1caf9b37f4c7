"""Attack objective: likelihood of clean events under perturbed history,
soft distance, chronology hinge, and their weighted combination."""
from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..mtpp.model import (
    K_INT_DEFAULT, _log_softmax, encode, event_loglik_terms, mark_logits,
    onehot,
)
from .noise import eps_forward
from .sinkhorn import apply_soft_perm, greedy_harden, gs_forward

__all__ = [
    "constraint_matrices", "hinge_penalty", "adv_event_quantities",
    "adv_nll", "distance_soft", "attack_loss", "attack_forward",
]


def constraint_matrices(n: int):
    """Coefficient matrices encoding 'perturbed times stay ordered and the
    first perturbed time is nonnegative' as A @ eps <= B @ t_perm."""
    a = np.zeros((n, n))
    b = np.zeros((n, n))
    for i in range(n - 1):
        a[i, i] = 1.0
        a[i, i + 1] = -1.0
        b[i, i] = -1.0
        b[i, i + 1] = 1.0
    a[n - 1, 0] = -1.0
    b[n - 1, 0] = 1.0
    return a, b


def hinge_penalty(perm: Tensor, eps: Tensor, t_col: Tensor, system=None,
                  margin=0.0) -> Tensor:
    """Sum of positive parts of A @ eps - B @ (P @ t) + margin: zero iff the
    noise keeps the permuted times weakly ordered with a nonnegative start
    (by at least ``margin``).

    A positive training margin makes the noise net stay strictly inside the
    feasible set, so held-out sequences remain feasible under the margin-free
    penalty despite the train/test generalization gap.
    """
    n = t_col.shape[0]
    a, b = system if system is not None else constraint_matrices(n)
    t_perm = ad.matmul(perm, t_col)
    violation = ad.matmul(Tensor(a), eps) - ad.matmul(Tensor(b), t_perm)
    if margin:
        violation = violation + Tensor(np.full((n, 1), float(margin)))
    return ad.sum_(ad.relu(violation))


def adv_event_quantities(model: dict, clean_times, clean_marks, num_marks,
                         t_pert: Tensor, marks_pert: Tensor, mask=None,
                         k_int=K_INT_DEFAULT):
    """Log-likelihood pieces of the clean events under the perturbed history.

    Event i is conditioned on the embedding of the first i-1 perturbed
    events; the survival integral runs from the perturbed previous time to
    the clean event time with signed limits. Returns (loglik scalar,
    p_true (n, 1)) where p_true is the model's probability of each clean
    mark under the perturbed history.
    """
    clean_times = np.asarray(clean_times, dtype=np.float64)
    n = clean_times.size
    d = model["h0"].values.size
    h = encode(model, t_pert, marks_pert, mask)
    h_prev = ad.concat([ad.reshape(model["h0"], (1, d)),
                        ad.slice_(h, (slice(0, n - 1), slice(None)))], axis=0)
    t_prev = ad.concat([Tensor(np.zeros((1, 1))),
                        ad.slice_(t_pert, (slice(0, n - 1), slice(None)))], axis=0)
    t_event = Tensor(clean_times.reshape(n, 1))
    true_onehot = onehot(np.minimum(clean_marks, num_marks - 1), num_marks)
    log_lam, integral, log_mark = event_loglik_terms(
        model, h_prev, t_prev, t_event, true_onehot, k_int)
    mask_col = Tensor(np.ones((n, 1)) if mask is None
                      else np.asarray(mask, float).reshape(n, 1))
    loglik = ad.sum_(ad.mul(log_lam - integral + log_mark, mask_col))
    p_true = ad.exp(ad.sum_(ad.mul(_log_softmax(mark_logits(model, h_prev)),
                                   Tensor(true_onehot)), axis=1, keepdims=True))
    return loglik, p_true


def adv_nll(model: dict, clean_times, clean_marks, num_marks, t_pert: Tensor,
            marks_pert: Tensor, mask=None, k_int=K_INT_DEFAULT) -> Tensor:
    """Negative log-likelihood of clean events given the perturbed history;
    reduces to the clean NLL when the perturbation is the identity."""
    loglik, _ = adv_event_quantities(model, clean_times, clean_marks, num_marks,
                                     t_pert, marks_pert, mask, k_int)
    return ad.neg(loglik)


def distance_soft(t_pert: Tensor, clean_times, p_true: Tensor, rho_c,
                  mask=None) -> Tensor:
    """Differentiable perturbation size: absolute time deviation plus the
    expected number of mark mismatches under the adversary's model."""
    clean_times = np.asarray(clean_times, dtype=np.float64)
    n = clean_times.size
    mask_col = Tensor(np.ones((n, 1)) if mask is None
                      else np.asarray(mask, float).reshape(n, 1))
    time_term = ad.sum_(ad.mul(ad.abs_(t_pert - Tensor(clean_times.reshape(n, 1))),
                               mask_col))
    mark_term = ad.sum_(ad.mul(Tensor(np.ones((n, 1))) - p_true, mask_col))
    return time_term + ad.scale(mark_term, float(rho_c))


def attack_forward(model: dict, attack: dict, clean_times, clean_marks,
                   num_marks, h_emb, *, tau, n_iter, rho_d, rho_ab, rho_c,
                   hinge_margin=0.0, mask=None, k_int=K_INT_DEFAULT,
                   pin_identity=False, hard_perm=False):
    """End-to-end differentiable attack objective for one sequence.

    ``h_emb`` carries the adversary model's embeddings of the clean sequence
    (a constant w.r.t. the attack parameters, so callers may cache it).
    Returns a dict with the loss and its pieces, all tensors.

    ``pin_identity`` swaps in a capacity-zero attack (P = I, eps = 0); used
    for no-attack rows and degenerate-defense checks.

    ``hard_perm`` freezes the permutation at its greedy hardening (a constant,
    so no gradient reaches the permutation generator) and trains the rest of
    the objective against it. At low temperatures the soft matrix can still
    be far from a permutation after a fixed number of Sinkhorn sweeps, and a
    noise net tuned against that smoothed surrogate inherits slack the
    hardened permutation does not have (notably: the soft first arrival sits
    above the true one, hiding start-nonnegativity violations). A hardened
    fine-tuning phase removes that train/emit mismatch.
    """
    clean_times = np.asarray(clean_times, dtype=np.float64)
    n = clean_times.size
    t_col = Tensor(clean_times.reshape(n, 1))
    marks_oh = Tensor(onehot(clean_marks, num_marks + 1))
    if pin_identity:
        perm = Tensor(np.eye(n))
        t_pert, marks_pert = t_col, marks_oh
        eps = Tensor(np.zeros((n, 1)))
    else:
        if not isinstance(h_emb, Tensor):
            h_emb = Tensor(h_emb)
        perm = gs_forward(attack, h_emb, tau, n_iter, mask)
        if hard_perm:
            perm = Tensor(np.eye(n)[greedy_harden(perm.values)])
        t_perm, marks_pert = apply_soft_perm(perm, t_col, marks_oh)
        eps = eps_forward(attack, t_perm, marks_pert, mask)
        t_pert = t_perm + eps
    loglik, p_true = adv_event_quantities(model, clean_times, clean_marks,
                                          num_marks, t_pert, marks_pert,
                                          mask, k_int)
    dist = distance_soft(t_pert, clean_times, p_true, rho_c, mask)
    hinge = hinge_penalty(perm, eps, t_col, margin=hinge_margin) \
        if mask is None else _masked_hinge(perm, eps, t_col, mask, hinge_margin)
    loss = loglik + ad.scale(dist, float(rho_d)) + ad.scale(hinge, float(rho_ab))
    return {"loss": loss, "loglik": loglik, "dist": dist, "hinge": hinge,
            "perm": perm, "eps": eps, "t_pert": t_pert, "marks_pert": marks_pert}


def _masked_hinge(perm: Tensor, eps: Tensor, t_col: Tensor, mask,
                  margin=0.0) -> Tensor:
    """Hinge over the real prefix only; padded rows of P are pinned to the
    identity so the real block of P @ t is unaffected by slicing."""
    n_real = int(np.count_nonzero(mask))
    key = (slice(0, n_real), slice(None))
    t_perm = ad.slice_(ad.matmul(perm, t_col), key)
    eps_real = ad.slice_(eps, key)
    a, b = constraint_matrices(n_real)
    violation = ad.matmul(Tensor(a), eps_real) - ad.matmul(Tensor(b), t_perm)
    if margin:
        violation = violation + Tensor(np.full((n_real, 1), float(margin)))
    return ad.sum_(ad.relu(violation))


def attack_loss(model: dict, attack: dict, clean_times, clean_marks, num_marks,
                h_emb, *, tau, n_iter, rho_d, rho_ab, rho_c, hinge_margin=0.0,
                mask=None, k_int=K_INT_DEFAULT, hard_perm=False) -> Tensor:
    """Scalar training objective: likelihood of the clean events under the
    perturbed history plus weighted distance and hinge penalties (lower is a
    stronger, better-constrained attack)."""
    return attack_forward(model, attack, clean_times, clean_marks, num_marks,
                          h_emb, tau=tau, n_iter=n_iter, rho_d=rho_d,
                          rho_ab=rho_ab, rho_c=rho_c,
                          hinge_margin=hinge_margin, mask=mask,
                          k_int=k_int, hard_perm=hard_perm)["loss"]
