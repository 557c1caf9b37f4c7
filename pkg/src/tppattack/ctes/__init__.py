from .data import (
    Event, Sequence, Dataset, DistanceParams, PaddedBatch,
    apply_noise_and_sort, distance_hard, pad_batch,
)
from .hawkes import simulate_hawkes, simulate_dataset
from .io import load_jsonl, save_jsonl

__all__ = [
    "Event", "Sequence", "Dataset", "DistanceParams", "PaddedBatch",
    "apply_noise_and_sort", "distance_hard", "pad_batch",
    "simulate_hawkes", "simulate_dataset", "load_jsonl", "save_jsonl",
]
