"""Sample containers and CSV ingestion.

Two on-disk formats are understood, both UTF-8 CSV with a header row:

* ``score,label`` — one confidence score in [0, 1] and a binary
  correctness label per row.
* ``label,logit_0,...,logit_{k-1}`` — an integer class label in [0, k)
  followed by k finite logits, with k constant across rows.

Leading lines starting with ``#`` (run manifests) are skipped.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .errors import DataFormatError


class ScoredSample(NamedTuple):
    score: float
    label: int


@dataclass(frozen=True)
class ScoredDataset:
    """A sample of (confidence score, binary correctness label) pairs.

    Scores and labels are stored as parallel float64 arrays, in input
    order, and are frozen after construction.
    """

    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        scores = np.ascontiguousarray(self.scores, dtype=np.float64)
        labels = np.ascontiguousarray(self.labels, dtype=np.float64)
        if scores.ndim != 1 or labels.ndim != 1 or scores.shape != labels.shape:
            raise DataFormatError("scores and labels must be 1-d arrays of equal length")
        if scores.size == 0:
            raise DataFormatError("empty dataset")
        if np.any(~np.isfinite(scores)) or np.any((scores < 0.0) | (scores > 1.0)):
            raise DataFormatError("scores must lie in [0, 1]")
        if np.any((labels != 0.0) & (labels != 1.0)):
            raise DataFormatError("labels must be 0 or 1")
        scores.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.scores.size

    def __len__(self) -> int:
        return self.scores.size

    def samples(self) -> Iterator[ScoredSample]:
        for s, y in zip(self.scores, self.labels):
            yield ScoredSample(float(s), int(y))


@dataclass(frozen=True)
class LogitRecord:
    """One multiclass prediction: true class index plus the logit vector."""

    label: int
    logits: np.ndarray

    def __post_init__(self):
        logits = np.ascontiguousarray(self.logits, dtype=np.float64)
        if logits.ndim != 1 or logits.size < 2:
            raise DataFormatError("logits must be a vector of k >= 2 reals")
        if not np.all(np.isfinite(logits)):
            raise DataFormatError("logits must be finite")
        if not 0 <= self.label < logits.size:
            raise DataFormatError("label out of range")
        logits.setflags(write=False)
        object.__setattr__(self, "logits", logits)
        object.__setattr__(self, "label", int(self.label))


def _data_rows(path) -> Iterator[tuple[int, list[str]]]:
    """Yield (1-based data row number, fields), skipping leading # comments."""
    with open(path, "r", encoding="utf-8-sig", newline="") as fh:
        lines = (ln for ln in fh if not ln.startswith("#"))
        reader = csv.reader(lines)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: missing header") from None
        yield 0, [h.strip() for h in header]
        for i, row in enumerate(reader, start=1):
            if row:
                yield i, row


def load_scores(path) -> ScoredDataset:
    """Read a ``score,label`` CSV into a ScoredDataset, preserving order."""
    scores: list[float] = []
    labels: list[float] = []
    for i, row in _data_rows(path):
        if i == 0:
            if row != ["score", "label"]:
                raise DataFormatError(f"{path}: expected header 'score,label', got {','.join(row)!r}")
            continue
        if len(row) != 2:
            raise DataFormatError(f"{path}: expected 2 fields at row {i}")
        try:
            s = float(row[0])
            y = float(row[1])
        except ValueError:
            raise DataFormatError(f"{path}: parse error at row {i}") from None
        if not math.isfinite(s) or not 0.0 <= s <= 1.0:
            raise DataFormatError(f"{path}: score out of range at row {i}")
        if y not in (0.0, 1.0):
            raise DataFormatError(f"{path}: label not in {{0,1}} at row {i}")
        scores.append(s)
        labels.append(y)
    if not scores:
        raise DataFormatError(f"{path}: empty dataset")
    return ScoredDataset(np.array(scores), np.array(labels))


def save_scores(dataset: ScoredDataset, path) -> None:
    """Write a ScoredDataset as ``score,label`` CSV.

    Scores carry 17 significant digits so a load/save cycle round-trips
    float64 values exactly.
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("score,label\n")
        for s, y in zip(dataset.scores, dataset.labels):
            fh.write(f"{s:.17g},{int(y)}\n")


def load_logits(path) -> list[LogitRecord]:
    """Read a ``label,logit_0,...,logit_{k-1}`` CSV, in file order."""
    records: list[LogitRecord] = []
    k = None
    for i, row in _data_rows(path):
        if i == 0:
            if len(row) < 3 or row[0] != "label" or any(
                h != f"logit_{j}" for j, h in enumerate(row[1:])
            ):
                raise DataFormatError(f"{path}: expected header 'label,logit_0,...,logit_{{k-1}}'")
            k = len(row) - 1
            continue
        if len(row) - 1 != k:
            raise DataFormatError(f"{path}: inconsistent logit width at row {i}")
        try:
            label = int(row[0])
            logits = np.array([float(v) for v in row[1:]])
        except ValueError:
            raise DataFormatError(f"{path}: parse error at row {i}") from None
        if not np.all(np.isfinite(logits)):
            raise DataFormatError(f"{path}: non-finite logit at row {i}")
        if not 0 <= label < k:
            raise DataFormatError(f"{path}: label out of range at row {i}")
        records.append(LogitRecord(label, logits))
    if not records:
        raise DataFormatError(f"{path}: empty dataset")
    return records


def to_top1_scores(records: Sequence[LogitRecord], temperature: float = 1.0) -> ScoredDataset:
    """Softmax the (temperature-scaled) logits and keep the top-1 class.

    The score is the maximum softmax probability; the label is 1 iff the
    argmax index (ties broken toward the lowest index) equals the true
    class. Softmax subtracts the row max before exponentiation, so large
    logits cannot overflow.
    """
    if temperature <= 0:
        raise DataFormatError("temperature must be positive")
    if not records:
        raise DataFormatError("empty dataset")
    k = records[0].logits.size
    if any(r.logits.size != k for r in records):
        raise DataFormatError("inconsistent logit width")
    z = np.stack([r.logits for r in records]) / temperature
    z = z - z.max(axis=1, keepdims=True)
    ez = np.exp(z)
    probs = ez / ez.sum(axis=1, keepdims=True)
    top = np.argmax(probs, axis=1)
    scores = probs[np.arange(len(records)), top]
    truth = np.array([r.label for r in records])
    return ScoredDataset(scores, (top == truth).astype(np.float64))
