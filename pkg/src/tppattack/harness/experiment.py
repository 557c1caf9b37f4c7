"""Experiment orchestration: attack training, the defense loop, and
evaluation rows for the metrics table."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..attack import AttackParams, attack_forward
from ..autodiff import Tape, Tensor, backward
from ..baselines import BaselineConfig, random_perm_control
from ..ctes import Dataset, DistanceParams, Sequence, distance_hard
from ..mtpp.model import MtppParams, lift, onehot
from ..mtpp.predict import encode_np, metrics
from ..attack.losses import adv_nll
from ..optim import Adam

__all__ = [
    "AttackTrainConfig", "DefenseConfig", "split_dataset", "train_attack",
    "harden_finetune", "train_defense", "evaluate", "MetricsRow",
    "match_control_budget",
]


@dataclass
class AttackTrainConfig:
    epochs: int = 30
    batch_size: int = 16
    step_size: float = 1e-3
    clip_norm: float = 5.0
    tau_start: float = 1.0
    tau_final: float = 0.1
    n_iter: int = 20
    rho_d: float = 1.0
    rho_ab: float = 10.0
    rho_c: float = 1.0
    hinge_margin: float = 0.0
    hard_perm: bool = False
    seed: int = 0
    verbose: bool = False


@dataclass
class DefenseConfig:
    rounds: int = 15
    k_adv: int = 2
    k_def: int = 2
    step_size: float = 1e-3
    attack: AttackTrainConfig = field(default_factory=AttackTrainConfig)
    verbose: bool = False


def split_dataset(ds: Dataset, fractions=(0.7, 0.1, 0.2), seed=0):
    """Shuffled train/val/test split by sequence."""
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"split fractions {fractions} must sum to 1")
    idx = np.random.default_rng(seed).permutation(len(ds.sequences))
    n_train = int(round(fractions[0] * len(idx)))
    n_val = int(round(fractions[1] * len(idx)))
    pick = lambda part: [ds.sequences[i] for i in part]
    return (pick(idx[:n_train]), pick(idx[n_train:n_train + n_val]),
            pick(idx[n_train + n_val:]))


def tau_schedule(epoch, epochs, tau_start, tau_final):
    """Fixed temperature for the first half, then geometric annealing."""
    half = epochs // 2
    if epoch < half or epochs - 1 <= half:
        return tau_start
    frac = (epoch - half) / (epochs - 1 - half)
    return float(tau_start * (tau_final / tau_start) ** frac)


def _attack_sequence_grads(model_t, attack: AttackParams, seq, h_emb, tau, cfg):
    tape = Tape()
    a = lift(attack.values, tape)
    out = attack_forward(model_t, a, seq.times, seq.marks, attack.num_marks,
                         h_emb, tau=tau, n_iter=cfg.n_iter, rho_d=cfg.rho_d,
                         rho_ab=cfg.rho_ab, rho_c=cfg.rho_c,
                         hinge_margin=cfg.hinge_margin, hard_perm=cfg.hard_perm)
    grads = backward(tape, out["loss"])
    return out["loss"].item(), {name: grads[t.node] for name, t in a.items()
                                if t.node in grads}


def train_attack(train_seqs, model: MtppParams, attack: AttackParams,
                 cfg: AttackTrainConfig, val_seqs=()):
    """Minibatch descent on the mean attack objective against a frozen
    adversary model. Mutates ``attack`` (weights and final tau) in place and
    returns (attack, history).
    """
    rng = np.random.default_rng(cfg.seed)
    opt = Adam(step_size=cfg.step_size, clip_norm=cfg.clip_norm)
    model_t = lift(model.values)
    emb_cache = [encode_np(model, s.times, s.marks) for s in train_seqs]
    history = {"train": [], "val": [], "tau": []}
    order = np.arange(len(train_seqs))
    attack.n_iter = cfg.n_iter
    attack.rho_d, attack.rho_ab, attack.rho_c = cfg.rho_d, cfg.rho_ab, cfg.rho_c
    attack.hinge_margin = cfg.hinge_margin
    for epoch in range(cfg.epochs):
        tau = tau_schedule(epoch, cfg.epochs, cfg.tau_start, cfg.tau_final)
        attack.tau = tau
        rng.shuffle(order)
        losses = []
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            acc = {}
            for i in batch:
                loss, grads = _attack_sequence_grads(
                    model_t, attack, train_seqs[i], emb_cache[i], tau, cfg)
                losses.append(loss)
                for k, g in grads.items():
                    acc[k] = acc.get(k, 0.0) + g
            if not np.isfinite(losses[-1]):
                raise RuntimeError(f"attack training diverged at epoch {epoch}")
            opt.step(attack.values, {k: g / len(batch) for k, g in acc.items()})
        history["train"].append(float(np.mean(losses)))
        history["tau"].append(tau)
        history["val"].append(
            attack_objective(val_seqs, model, attack) if len(val_seqs)
            else float("nan"))
        if cfg.verbose:
            print(f"attack epoch {epoch:3d} tau {tau:.3f} "
                  f"objective {history['train'][-1]:.4f}")
    return attack, history


def harden_finetune(seqs, model: MtppParams, attack: AttackParams,
                    cfg: AttackTrainConfig,
                    phases=((30, 1e-3), (30, 1e-4), (20, 1e-5)),
                    margin=0.03):
    """Emission-consistent fine-tuning after annealed attack training.

    Runs extra training phases with the permutation frozen at its greedy
    hardening and the temperature fixed at ``cfg.tau_final``, stepping down
    the learning rate per phase. Two failure modes of plain annealed training
    motivate this: the soft permutation retains slack the hardened one does
    not have (so constraints satisfied in training can be violated at
    emission), and inside the feasible set the hinge has zero gradient, so
    the optimizer oscillates around the constraint boundary with amplitude
    set by the step size. Freezing the permutation matches training to
    emission exactly; the decaying steps plus a small training margin park
    the noise net strictly inside the feasible set. Mutates ``attack``.
    """
    for epochs, step in phases:
        phase_cfg = AttackTrainConfig(
            **{**cfg.__dict__, "epochs": int(epochs), "step_size": float(step),
               "tau_start": cfg.tau_final, "hard_perm": True,
               "hinge_margin": float(margin)})
        train_attack(seqs, model, attack, phase_cfg)
    return attack


def attack_objective(seqs, model: MtppParams, attack: AttackParams) -> float:
    """Mean attack objective at the attack's current temperature."""
    model_t = lift(model.values)
    a = lift(attack.values)
    vals = []
    for s in seqs:
        h_emb = encode_np(model, s.times, s.marks)
        out = attack_forward(model_t, a, s.times, s.marks, attack.num_marks,
                             h_emb, tau=attack.tau, n_iter=attack.n_iter,
                             rho_d=attack.rho_d, rho_ab=attack.rho_ab,
                             rho_c=attack.rho_c,
                             hinge_margin=attack.hinge_margin)
        vals.append(out["loss"].item())
    return float(np.mean(vals)) if vals else float("nan")


def train_defense(train_seqs, model: MtppParams, attack: AttackParams,
                  cfg: DefenseConfig):
    """Alternating max-min robust training.

    Each round runs ``k_adv`` epochs of attack updates against the current
    model, then ``k_def`` epochs of model updates ascending the likelihood
    of the clean events under the perturbed history. Both players warm-start
    across rounds. Mutates and returns (model, attack, history).
    """
    model_opt = Adam(step_size=cfg.step_size, clip_norm=cfg.attack.clip_norm)
    acfg = cfg.attack
    history = {"attack": [], "defense": []}
    rng = np.random.default_rng(acfg.seed)
    order = np.arange(len(train_seqs))
    for rnd in range(cfg.rounds):
        inner = AttackTrainConfig(**{**acfg.__dict__, "epochs": cfg.k_adv,
                                     "tau_start": attack_round_tau(acfg, rnd, cfg.rounds),
                                     "tau_final": attack_round_tau(acfg, rnd, cfg.rounds)})
        _, hist = train_attack(train_seqs, model, attack, inner)
        history["attack"].append(hist["train"][-1])

        losses = []
        for _ in range(cfg.k_def):
            emb_cache = [encode_np(model, s.times, s.marks) for s in train_seqs]
            a_t = lift(attack.values)
            rng.shuffle(order)
            for start in range(0, len(order), acfg.batch_size):
                batch = order[start:start + acfg.batch_size]
                acc = {}
                for i in batch:
                    seq = train_seqs[i]
                    tape = Tape()
                    m = lift(model.values, tape)
                    out = attack_forward(m, a_t, seq.times, seq.marks,
                                         attack.num_marks, emb_cache[i],
                                         tau=attack.tau, n_iter=attack.n_iter,
                                         rho_d=acfg.rho_d, rho_ab=acfg.rho_ab,
                                         rho_c=acfg.rho_c,
                                         hinge_margin=acfg.hinge_margin)
                    # the defender maximizes the likelihood of the clean
                    # events under the perturbed history; the distance and
                    # hinge penalties constrain the adversary only (ascending
                    # the soft distance's mark term would train the model to
                    # *lower* its own true-mark probability)
                    losses.append(out["loglik"].item())
                    grads = backward(tape, out["loglik"])
                    for name, t in m.items():
                        if t.node in grads:
                            acc[name] = acc.get(name, 0.0) - grads[t.node]  # ascend
                if not np.isfinite(losses[-1]):
                    raise RuntimeError(f"defense diverged in round {rnd}")
                model_opt.step(model.values, {k: g / len(batch) for k, g in acc.items()})
        history["defense"].append(float(np.mean(losses)))
        if cfg.verbose:
            print(f"round {rnd:2d} attack {history['attack'][-1]:.4f} "
                  f"defense {history['defense'][-1]:.4f}")
    return model, attack, history


def attack_round_tau(acfg: AttackTrainConfig, rnd, rounds):
    """Anneal the defense-loop temperature across rounds the same way a
    standalone attack anneals across epochs."""
    return tau_schedule(rnd, rounds, acfg.tau_start, acfg.tau_final)


# ---------------------------------------------------------------- evaluation

@dataclass
class MetricsRow:
    method: str
    mode: str
    mae: float
    mpa: float
    mean_distance: float
    objective: float
    seed: int

    CSV_HEADER = "method,mode,mae,mpa,mean_distance,objective,seed"

    def to_csv(self):
        return (f"{self.method},{self.mode},{self.mae:.6f},{self.mpa:.6f},"
                f"{self.mean_distance:.6f},{self.objective:.6f},{self.seed}")


def _hard_objective(model: MtppParams, clean: Sequence, pert: Sequence) -> float:
    n = len(clean)
    nll = adv_nll(lift(model.values), clean.times, clean.marks, model.num_marks,
                  Tensor(pert.times.reshape(n, 1)),
                  Tensor(onehot(pert.marks, model.num_marks + 1)))
    return nll.item()


def evaluate(learner: MtppParams, test_seqs, perturb, method: str, mode: str,
             rho_c=1.0, seed=0, t_max=None) -> MetricsRow:
    """Perturb every test sequence with ``perturb`` (Sequence -> Sequence),
    then score the learner predicting the clean events from the perturbed
    histories. Distances are always the hard metric on emitted sequences.
    """
    ds = Dataset(list(test_seqs), learner.num_marks)
    dparams = DistanceParams(rho_c=rho_c)
    perturbed = [perturb(s) for s in test_seqs]
    histories = [(p.times, p.marks) for p in perturbed]
    dists = [distance_hard(s, p, dparams) for s, p in zip(test_seqs, perturbed)]
    objs = [_hard_objective(learner, s, p) for s, p in zip(test_seqs, perturbed)]
    mae, mpa = metrics(ds, learner, t_max=t_max, histories=histories)
    return MetricsRow(method, mode, mae, mpa, float(np.mean(dists)),
                      float(np.mean(objs)), seed)


def match_control_budget(test_seqs, target_dists, rho_c, seed):
    """Per-sequence random controls matched to the given hard distances."""
    rng = np.random.default_rng(seed)
    out = []
    for seq, target in zip(test_seqs, target_dists):
        if target <= 0:
            out.append(seq)
        else:
            out.append(random_perm_control(seq, target, rng, rho_c=rho_c))
    return out


def tune_baseline_budget(seqs, model: MtppParams, cfg: BaselineConfig,
                         attack_fn, target: float, rho_c=1.0, iters=8):
    """Bisection on eps_budget until the mean realized hard distance is
    within 10% of ``target``. Returns the tuned config."""
    dparams = DistanceParams(rho_c=rho_c)

    def realized(budget):
        c = BaselineConfig(eps_budget=budget, steps=cfg.steps,
                           step_size=budget / max(cfg.steps, 1) * 2.5,
                           momentum=cfg.momentum)
        dists = [distance_hard(s, attack_fn(s, model, c), dparams) for s in seqs]
        return float(np.mean(dists)), c

    lo, hi = 1e-4, cfg.eps_budget
    dist_hi, c_hi = realized(hi)
    while dist_hi < target and hi < 1e4:
        hi *= 2.0
        dist_hi, c_hi = realized(hi)
    best = c_hi
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        dist_mid, c_mid = realized(mid)
        best = c_mid
        if abs(dist_mid - target) <= 0.1 * target:
            break
        if dist_mid < target:
            lo = mid
        else:
            hi = mid
    return best
