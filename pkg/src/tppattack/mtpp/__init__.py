from .checkpoint import load_params, save_params
from .model import (
    K_INT_DEFAULT, MtppParams, encode, event_loglik_terms, intensity, lift,
    mark_dist, mark_logits, nll_clean, onehot, positional_encoding,
    sequence_nll,
)
from .predict import K_PRED_DEFAULT, encode_np, metrics, predict_next
from .train import TrainConfig, mean_nll, train_mle

__all__ = [
    "MtppParams", "encode", "intensity", "mark_logits", "mark_dist",
    "sequence_nll", "nll_clean", "event_loglik_terms", "onehot", "lift",
    "positional_encoding", "predict_next", "encode_np", "metrics",
    "TrainConfig", "train_mle", "mean_nll", "save_params", "load_params",
    "K_INT_DEFAULT", "K_PRED_DEFAULT",
]
