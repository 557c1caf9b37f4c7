"""Additive-time-noise attack baselines and an equal-distance random control.

The gradient baselines attack timestamps only (the single continuous
coordinate of an event): noise is ascended on the likelihood objective at a
fixed event order within each step, and the sequence is re-sorted between
steps. Marks are never edited.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import Tape, Tensor, backward
from ..ctes import Sequence, apply_noise_and_sort
from ..mtpp.model import MtppParams, lift, onehot
from ..attack.losses import adv_nll

__all__ = ["BaselineConfig", "pgd_attack", "mifgsm_attack", "random_perm_control"]


@dataclass
class BaselineConfig:
    eps_budget: float = 0.5   # L-inf bound on per-event time noise
    steps: int = 10
    step_size: float = 0.1
    momentum: float = 0.0     # MI-FGSM only

    def __post_init__(self):
        if self.eps_budget <= 0:
            raise ValueError("eps_budget must be positive")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")


def _objective_grad(params: MtppParams, seq: Sequence, delta: np.ndarray):
    """Gradient of the clean-event NLL w.r.t. per-event noise, at the event
    order induced by the current noise (order fixed within the step)."""
    pert, pi = apply_noise_and_sort(seq, delta)
    n = len(seq)
    tape = Tape()
    t_pert = tape.leaf(pert.times.reshape(n, 1))
    marks_oh = Tensor(onehot(pert.marks, params.num_marks + 1))
    nll = adv_nll(lift(params.values), seq.times, seq.marks, params.num_marks,
                  t_pert, marks_oh)
    g_sorted = backward(tape, nll)[t_pert.node].ravel()
    grad = np.empty(n)
    grad[pi] = g_sorted           # slot i of the sorted sequence holds event pi[i]
    return nll.item(), grad


def pgd_attack(seq: Sequence, params: MtppParams, cfg: BaselineConfig) -> Sequence:
    """Projected gradient ascent on the clean-event NLL over time noise."""
    delta = np.zeros(len(seq))
    for _ in range(cfg.steps):
        _, grad = _objective_grad(params, seq, delta)
        delta = delta + cfg.step_size * np.sign(grad)
        delta = np.clip(delta, -cfg.eps_budget, cfg.eps_budget)
    return apply_noise_and_sort(seq, delta)[0]


def mifgsm_attack(seq: Sequence, params: MtppParams, cfg: BaselineConfig) -> Sequence:
    """PGD with momentum-accumulated L1-normalized gradients."""
    delta = np.zeros(len(seq))
    g_acc = np.zeros(len(seq))
    for _ in range(cfg.steps):
        _, grad = _objective_grad(params, seq, delta)
        norm = np.sum(np.abs(grad))
        g_acc = cfg.momentum * g_acc + (grad / norm if norm > 0 else grad)
        delta = delta + cfg.step_size * np.sign(g_acc)
        delta = np.clip(delta, -cfg.eps_budget, cfg.eps_budget)
    return apply_noise_and_sort(seq, delta)[0]


def random_perm_control(seq: Sequence, distance_target: float, rng,
                        rho_c=1.0) -> Sequence:
    """Random perturbation of exactly matched strength.

    Applies a random number of disjoint adjacent swaps (each pair of
    distinct marks costs ``2 * rho_c``), then spends the remaining budget on
    random order-preserving time jitter rescaled so the hard sequence
    distance equals ``distance_target``. The first event is never moved, so
    the offset-by-first-arrival normalization cannot absorb any jitter; any
    mass the jitter caps cannot hold goes into a rightward shift of the
    final event, which is always order-safe.
    """
    if distance_target <= 0:
        raise ValueError("distance_target must be positive")
    n = len(seq)
    if n < 2:
        raise RuntimeError("cannot match a distance target on a single event")
    swap_cost = 2.0 * rho_c
    k_max = int(distance_target // swap_cost) if swap_cost > 0 else n // 2
    k_max = min(k_max, n // 2)
    k = int(rng.integers(0, k_max + 1)) if k_max > 0 else 0
    order = np.arange(n)
    done = 0
    used = np.zeros(n, dtype=bool)
    for i in rng.permutation(n - 1):
        if done == k:
            break
        if used[i] or used[i + 1] or seq.marks[i] == seq.marks[i + 1]:
            continue
        order[i], order[i + 1] = order[i + 1], order[i]
        used[i] = used[i + 1] = True
        done += 1
    residual = distance_target - swap_cost * done

    gaps = np.diff(seq.times)
    cap = np.zeros(n)          # largest order-safe jitter per event
    cap[1:-1] = 0.499 * np.minimum(gaps[:-1], gaps[1:])
    cap[-1] = 0.499 * gaps[-1]
    u = rng.uniform(-1.0, 1.0, size=n)
    u[0] = 0.0
    u[-1] = abs(u[-1])         # keep the overflow slot additive
    mass = np.sum(np.abs(u))
    if mass > 0:
        u = np.clip(u * (residual / mass), -cap, cap)
    else:
        u[:] = 0.0
    u[-1] += residual - np.sum(np.abs(u))
    return Sequence(seq.times + u, seq.marks[order])
