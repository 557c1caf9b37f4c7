"""Maximum-likelihood training of the MTPP model."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import Tape, backward
from ..optim import Adam
from .model import K_INT_DEFAULT, MtppParams, lift, sequence_nll

__all__ = ["TrainConfig", "train_mle"]


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 16
    step_size: float = 1e-3
    clip_norm: float = 5.0
    k_int: int = K_INT_DEFAULT
    seed: int = 0
    verbose: bool = False


def _sequence_grads(params: MtppParams, seq, k_int):
    tape = Tape()
    p = lift(params.values, tape)
    loss = sequence_nll(p, seq.times, seq.marks, params.num_marks, k_int=k_int)
    grads = backward(tape, loss)
    return loss.item(), {name: grads[t.node] for name, t in p.items()
                         if t.node in grads}


def train_mle(train_seqs, params: MtppParams, cfg: TrainConfig, val_seqs=()):
    """Minibatch Adam on the mean clean NLL. Mutates ``params`` in place and
    returns (params, history) where history has per-epoch train/val losses.

    Aborts with a diagnostic if the loss goes non-finite.
    """
    rng = np.random.default_rng(cfg.seed)
    opt = Adam(step_size=cfg.step_size, clip_norm=cfg.clip_norm)
    history = {"train": [], "val": []}
    order = np.arange(len(train_seqs))
    for epoch in range(cfg.epochs):
        rng.shuffle(order)
        losses = []
        for start in range(0, len(order), cfg.batch_size):
            batch = [train_seqs[i] for i in order[start:start + cfg.batch_size]]
            acc = {}
            for seq in batch:
                loss, grads = _sequence_grads(params, seq, cfg.k_int)
                losses.append(loss)
                for k, g in grads.items():
                    acc[k] = acc.get(k, 0.0) + g
            if not np.isfinite(losses[-1]):
                raise RuntimeError(f"training diverged at epoch {epoch}: "
                                   f"nll={losses[-1]}")
            opt.step(params.values, {k: g / len(batch) for k, g in acc.items()})
        history["train"].append(float(np.mean(losses)))
        history["val"].append(mean_nll(val_seqs, params, cfg.k_int)
                              if len(val_seqs) else float("nan"))
        if cfg.verbose:
            print(f"epoch {epoch:3d} train {history['train'][-1]:.4f} "
                  f"val {history['val'][-1]:.4f}")
    return params, history


def mean_nll(seqs, params: MtppParams, k_int=K_INT_DEFAULT) -> float:
    p = lift(params.values)
    vals = [sequence_nll(p, s.times, s.marks, params.num_marks, k_int=k_int).item()
            for s in seqs]
    return float(np.mean(vals)) if vals else float("nan")
