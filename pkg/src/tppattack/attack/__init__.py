from .emit import emit_adversarial, greedy_harden
from .losses import (
    adv_event_quantities, adv_nll, attack_forward, attack_loss,
    constraint_matrices, distance_soft, hinge_penalty,
)
from .noise import eps_forward
from .params import AttackParams
from .sinkhorn import apply_soft_perm, gs_forward, pairwise_scores, sinkhorn

__all__ = [
    "AttackParams", "pairwise_scores", "sinkhorn", "gs_forward",
    "apply_soft_perm", "eps_forward", "adv_nll", "adv_event_quantities",
    "distance_soft", "hinge_penalty", "constraint_matrices", "attack_loss",
    "attack_forward", "greedy_harden", "emit_adversarial",
]
