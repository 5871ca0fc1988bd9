"""Post-hoc recalibration: temperature scaling, histogram binning, PAV isotonic.

All three produce monotone score transforms. Temperature scaling works
on logits (rescale, re-softmax, re-select top-1); the other two are
fitted step functions on scores.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.special import logsumexp

from . import _kernels
from .binning import BinningScheme, bin_dataset, sort_by_score
from .data import LogitRecord, ScoredDataset, to_top1_scores
from .errors import PreconditionError

#: fixed method order, also the tie-break order when ranking methods
METHOD_ORDER = ("histogram", "temperature", "isotonic")

_LN_T_RANGE = (-3.0, 3.0)
_LN_T_TOL = 1e-6
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class TemperatureScaler:
    t: float

    def __post_init__(self):
        if not self.t > 0:
            raise PreconditionError("temperature must be positive")


def _freeze(arr) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class HistogramRecalibrator:
    """Step function: scores falling in [edges[k], edges[k+1]) map to values[k]."""

    edges: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        edges = _freeze(self.edges)
        values = _freeze(self.values)
        if edges.size != values.size + 1:
            raise PreconditionError("histogram needs len(edges) == len(values) + 1")
        if np.any(np.diff(edges) <= 0):
            raise PreconditionError("histogram edges must be strictly ascending")
        if np.any((values < 0) | (values > 1)):
            raise PreconditionError("histogram values must lie in [0, 1]")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class IsotonicRecalibrator:
    """Right-continuous step function through (breakpoint, value) pairs."""

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        bp = _freeze(self.breakpoints)
        values = _freeze(self.values)
        if bp.size != values.size or bp.size == 0:
            raise PreconditionError("isotonic needs matching nonempty breakpoints/values")
        if np.any(np.diff(bp) < 0) or np.any(np.diff(values) < 0):
            raise PreconditionError("isotonic breakpoints and values must be non-decreasing")
        if np.any((values < 0) | (values > 1)):
            raise PreconditionError("isotonic values must lie in [0, 1]")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", values)


Recalibrator = Union[TemperatureScaler, HistogramRecalibrator, IsotonicRecalibrator]


def _temperature_nll(z: np.ndarray, z_true: np.ndarray, t: float) -> float:
    return float(np.sum(logsumexp(z / t, axis=1)) - np.sum(z_true) / t)


def fit_temperature(records: Sequence[LogitRecord]) -> TemperatureScaler:
    """Temperature minimizing the multiclass NLL of softmax(logits / t).

    Golden-section search over ln t in [-3, 3] to 1e-6; an optimum on the
    boundary clamps there.
    """
    if not records:
        raise PreconditionError("need at least one record")
    z = np.stack([r.logits for r in records])
    z_true = np.array([r.logits[r.label] for r in records])

    def nll_at(x: float) -> float:
        return _temperature_nll(z, z_true, math.exp(x))

    a, b = _LN_T_RANGE
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = nll_at(c), nll_at(d)
    while b - a > _LN_T_TOL:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = nll_at(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = nll_at(d)
    return TemperatureScaler(math.exp(0.5 * (a + b)))


def fit_histogram(dataset: ScoredDataset, b: int = 15) -> HistogramRecalibrator:
    """Equal-mass histogram binning: each bin maps to its mean label.

    Interior edges sit midway between adjacent bins' extreme scores, so
    the fitted map is total on [0, 1].
    """
    if b > dataset.n:
        raise PreconditionError("more bins than samples")
    bins = bin_dataset(dataset, BinningScheme.equal_mass(b))
    edges = [0.0]
    for left, right in zip(bins[:-1], bins[1:]):
        edges.append(0.5 * (left.hi + right.lo))
    edges.append(1.0)
    return HistogramRecalibrator(np.array(edges), np.array([s.mean_label for s in bins]))


def fit_isotonic(dataset: ScoredDataset) -> IsotonicRecalibrator:
    """Least-squares monotone fit of label against score via PAV."""
    ss, sl = sort_by_score(dataset)
    fitted = _kernels.pav(sl)
    return IsotonicRecalibrator(ss, np.asarray(fitted))


def apply_recalibrator(recal: Recalibrator, data) -> ScoredDataset:
    """Transform scores with a fitted recalibrator; labels are untouched.

    Temperature scaling expects logit records (it must re-softmax); the
    step-function methods expect a ScoredDataset.
    """
    if isinstance(recal, TemperatureScaler):
        if isinstance(data, ScoredDataset) or not data or not isinstance(data[0], LogitRecord):
            raise PreconditionError("temperature scaling applies to logit records")
        return to_top1_scores(data, temperature=recal.t)
    if not isinstance(data, ScoredDataset):
        raise PreconditionError(f"{type(recal).__name__} applies to a ScoredDataset")
    s = data.scores
    if isinstance(recal, HistogramRecalibrator):
        idx = np.searchsorted(recal.edges, s, side="right") - 1
        idx = np.clip(idx, 0, recal.values.size - 1)
        return ScoredDataset(recal.values[idx], data.labels)
    idx = np.searchsorted(recal.breakpoints, s, side="right") - 1
    idx = np.clip(idx, 0, recal.values.size - 1)
    return ScoredDataset(recal.values[idx], data.labels)


def recalibrator_to_dict(recal: Recalibrator) -> dict:
    if isinstance(recal, TemperatureScaler):
        return {"kind": "temperature", "t": recal.t}
    if isinstance(recal, HistogramRecalibrator):
        return {"kind": "histogram", "edges": recal.edges.tolist(), "values": recal.values.tolist()}
    return {
        "kind": "isotonic",
        "breakpoints": recal.breakpoints.tolist(),
        "values": recal.values.tolist(),
    }


def recalibrator_from_dict(d: dict) -> Recalibrator:
    kind = d.get("kind")
    if kind == "temperature":
        return TemperatureScaler(float(d["t"]))
    if kind == "histogram":
        return HistogramRecalibrator(np.array(d["edges"]), np.array(d["values"]))
    if kind == "isotonic":
        return IsotonicRecalibrator(np.array(d["breakpoints"]), np.array(d["values"]))
    raise PreconditionError(f"unknown recalibrator kind {kind!r}")
