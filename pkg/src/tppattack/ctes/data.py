"""Continuous-time event sequences: data model, distance, sorting, padding."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Event", "Sequence", "Dataset", "DistanceParams",
    "apply_noise_and_sort", "distance_hard", "pad_batch", "PaddedBatch",
]


@dataclass(frozen=True)
class Event:
    """A single marked event: arrival time and integer mark."""
    t: float
    c: int


class Sequence:
    """Ordered events with strictly increasing times, stored as arrays."""

    __slots__ = ("times", "marks")

    def __init__(self, times, marks):
        times = np.asarray(times, dtype=np.float64)
        marks = np.asarray(marks, dtype=np.int64)
        if times.ndim != 1 or times.shape != marks.shape:
            raise ValueError("times and marks must be 1-d arrays of equal length")
        if times.size < 1:
            raise ValueError("a sequence must contain at least one event")
        if times[0] < 0:
            raise ValueError("arrival times must be nonnegative")
        if np.any(np.diff(times) <= 0):
            raise ValueError("arrival times must be strictly increasing")
        if np.any(marks < 0):
            raise ValueError("marks must be nonnegative integers")
        self.times = times
        self.marks = marks

    def __len__(self):
        return self.times.size

    def __iter__(self):
        return (Event(float(t), int(c)) for t, c in zip(self.times, self.marks))

    def __eq__(self, other):
        return (isinstance(other, Sequence)
                and np.array_equal(self.times, other.times)
                and np.array_equal(self.marks, other.marks))

    def __repr__(self):
        return f"Sequence(n={len(self)})"


@dataclass
class Dataset:
    sequences: list
    num_marks: int
    name: str = ""

    def __post_init__(self):
        for i, seq in enumerate(self.sequences):
            if seq.marks.size and seq.marks.max() >= self.num_marks:
                raise ValueError(f"sequence {i} uses mark >= num_marks ({self.num_marks})")

    def __len__(self):
        return len(self.sequences)

    def mean_inter_event(self):
        gaps = [np.diff(s.times) for s in self.sequences if len(s) > 1]
        if not gaps:
            return 1.0
        return float(np.mean(np.concatenate(gaps)))


@dataclass
class DistanceParams:
    """Weight of a positionwise mark mismatch relative to one time unit."""
    rho_c: float = 1.0

    def __post_init__(self):
        if self.rho_c < 0:
            raise ValueError("rho_c must be nonnegative")


def apply_noise_and_sort(seq: Sequence, eps) -> tuple:
    """Add per-event time noise, then re-sort chronologically.

    Returns the sorted valid sequence and the permutation ``pi`` of original
    indices (output position i holds original event pi[i]). Ties are broken
    by original index (stable sort). If any perturbed time is negative the
    whole sequence is shifted so the minimum is 0; exact ties are separated
    by the smallest representable step so the output is strictly increasing.
    """
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != seq.times.shape:
        raise ValueError(f"noise length {eps.size} != sequence length {len(seq)}")
    perturbed = seq.times + eps
    if not np.all(np.isfinite(perturbed)):
        raise ValueError("perturbed times must be finite")
    pi = np.argsort(perturbed, kind="stable")
    t_new = perturbed[pi]
    if t_new[0] < 0:
        t_new = t_new - t_new[0]
    for i in range(1, t_new.size):
        if t_new[i] <= t_new[i - 1]:
            t_new[i] = np.nextafter(t_new[i - 1], np.inf)
    return Sequence(t_new, seq.marks[pi]), pi


def distance_hard(clean: Sequence, pert: Sequence, params: DistanceParams) -> float:
    """Positionwise order-aware distance between two equal-length sequences.

    Both sequences are offset to start at their own first arrival before the
    time terms are compared, so a constant time shift costs nothing.
    """
    if len(clean) != len(pert):
        raise ValueError(f"length mismatch: {len(clean)} vs {len(pert)}")
    dt = (pert.times - pert.times[0]) - (clean.times - clean.times[0])
    mark_mismatch = np.count_nonzero(pert.marks != clean.marks)
    return float(np.sum(np.abs(dt)) + params.rho_c * mark_mismatch)


@dataclass
class PaddedBatch:
    """Fixed-length view of a list of sequences plus a real-event mask."""
    times: np.ndarray   # (B, n) float
    marks: np.ndarray   # (B, n) int, padding mark = num_marks
    mask: np.ndarray    # (B, n) bool, True on real events
    num_marks: int
    lengths: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.lengths is None:
            self.lengths = self.mask.sum(axis=1).astype(np.int64)


PAD_SPACING = 1.0  # gap between sentinel events; only keeps sort order intact


def pad_batch(seqs, n, num_marks) -> PaddedBatch:
    """Pad each sequence at the tail with masked sentinel events to length n.

    Sentinels continue past the last real time at a fixed spacing and carry
    the dedicated padding mark id ``num_marks``; every downstream loss,
    distance, and metric must restrict itself to masked-in positions.
    """
    batch = len(seqs)
    times = np.zeros((batch, n), dtype=np.float64)
    marks = np.full((batch, n), num_marks, dtype=np.int64)
    mask = np.zeros((batch, n), dtype=bool)
    for b, seq in enumerate(seqs):
        m = len(seq)
        if m > n:
            raise ValueError(f"sequence of length {m} exceeds target length {n}; "
                             "truncate explicitly before padding")
        times[b, :m] = seq.times
        marks[b, :m] = seq.marks
        mask[b, :m] = True
        if m < n:
            times[b, m:] = seq.times[-1] + PAD_SPACING * np.arange(1, n - m + 1)
    return PaddedBatch(times, marks, mask, num_marks)
