"""JSON Lines dataset I/O.

File layout: line 1 is a header ``{"num_marks": K, "name": "..."}``; every
following line is ``{"events": [[t, c], ...]}`` with strictly increasing
times. Extra per-line fields (e.g. a recorded permutation) are preserved on
write and ignored on read.
"""
from __future__ import annotations

import json
import os
import tempfile

from .data import Dataset, Sequence

__all__ = ["load_jsonl", "save_jsonl", "atomic_write_text"]


def load_jsonl(path) -> Dataset:
    with open(path, "r", encoding="utf-8") as fh:
        header_line = fh.readline()
        if not header_line:
            raise ValueError(f"{path}: empty dataset file")
        header = json.loads(header_line)
        if "num_marks" not in header:
            raise ValueError(f"{path}: line 1 must be a header with num_marks")
        num_marks = int(header["num_marks"])
        name = header.get("name", "")
        sequences = []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            obj = json.loads(line)
            events = obj["events"]
            times = [float(e[0]) for e in events]
            marks = [int(e[1]) for e in events]
            for i in range(1, len(times)):
                if times[i] <= times[i - 1]:
                    raise ValueError(f"{path}: line {lineno}: times not strictly increasing")
            for c in marks:
                if not 0 <= c < num_marks:
                    raise ValueError(f"{path}: line {lineno}: unknown mark {c}")
            sequences.append(Sequence(times, marks))
    return Dataset(sequences, num_marks, name)


def save_jsonl(ds: Dataset, path, extras=None):
    """Write a dataset; ``extras`` is an optional per-sequence list of dicts
    merged into the corresponding line (e.g. {"perm": [...]}).
    """
    lines = [json.dumps({"num_marks": ds.num_marks, "name": ds.name})]
    for i, seq in enumerate(ds.sequences):
        obj = {"events": [[float(t), int(c)] for t, c in zip(seq.times, seq.marks)]}
        if extras is not None:
            obj.update(extras[i])
        lines.append(json.dumps(obj))
    atomic_write_text(path, "\n".join(lines) + "\n")


def atomic_write_text(path, text):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
