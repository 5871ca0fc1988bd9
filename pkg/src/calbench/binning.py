"""Equal-width and equal-mass binning of scored datasets.

Equal-width bin k covers [k/b, (k+1)/b), with the last bin closed at 1;
empty bins are kept with count 0. Equal-mass binning sorts by score
(stable, so ties keep input order) and puts sorted indices
[floor(k*n/b), floor((k+1)*n/b)) into bin k, which leaves every bin
nonempty whenever b <= n and never lets counts differ by more than one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .data import ScoredDataset
from .errors import PreconditionError

EQUAL_WIDTH = "equal-width"
EQUAL_MASS = "equal-mass"


@dataclass(frozen=True)
class BinningScheme:
    kind: str
    b: int

    def __post_init__(self):
        if self.kind not in (EQUAL_WIDTH, EQUAL_MASS):
            raise PreconditionError(f"unknown binning kind {self.kind!r}")
        if self.b < 1:
            raise PreconditionError("bin count must be >= 1")

    @classmethod
    def equal_width(cls, b: int) -> "BinningScheme":
        return cls(EQUAL_WIDTH, b)

    @classmethod
    def equal_mass(cls, b: int) -> "BinningScheme":
        return cls(EQUAL_MASS, b)


@dataclass(frozen=True)
class BinSummary:
    """One bin: occupancy, mean score, mean label, and score-space bounds."""

    count: int
    mean_score: float
    mean_label: float
    lo: float
    hi: float


def sort_by_score(dataset: ScoredDataset) -> tuple[np.ndarray, np.ndarray]:
    """Scores and labels sorted by score ascending, stable on ties."""
    order = np.argsort(dataset.scores, kind="stable")
    return dataset.scores[order], dataset.labels[order]


def bin_dataset(dataset: ScoredDataset, scheme: BinningScheme) -> list[BinSummary]:
    """Partition the dataset per the scheme; bins in ascending score order."""
    ss, sl = sort_by_score(dataset)
    n = dataset.n
    if scheme.kind == EQUAL_MASS:
        if scheme.b > n:
            raise PreconditionError("more bins than samples")
        counts, sum_s, sum_y = _kernels.em_stats(ss, sl, scheme.b)
        bounds = (np.arange(scheme.b + 1, dtype=np.int64) * n) // scheme.b
        out = []
        for k in range(scheme.b):
            c = int(counts[k])
            out.append(
                BinSummary(
                    count=c,
                    mean_score=float(sum_s[k] / c),
                    mean_label=float(sum_y[k] / c),
                    lo=float(ss[bounds[k]]),
                    hi=float(ss[bounds[k + 1] - 1]),
                )
            )
        return out
    counts, sum_s, sum_y = _kernels.ew_stats(ss, sl, scheme.b)
    out = []
    for k in range(scheme.b):
        c = int(counts[k])
        out.append(
            BinSummary(
                count=c,
                mean_score=float(sum_s[k] / c) if c else 0.0,
                mean_label=float(sum_y[k] / c) if c else 0.0,
                lo=k / scheme.b,
                hi=(k + 1) / scheme.b,
            )
        )
    return out
