"""Experiment drivers: bias estimation, heatmaps, power tests, method ranking.

Every driver samples replicate datasets from deterministic substreams
keyed by (seed, experiment tag, coordinates, replicate index), evaluates
all requested estimators on the same replicate, and reduces in replicate
order. Adding estimators never changes the sampled data, and running on
one thread or many yields identical reports.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .binning import sort_by_score
from .data import LogitRecord, ScoredDataset, to_top1_scores
from .errors import CalbenchError, PreconditionError
from .estimators import EstimatorSpec, Norm, evaluate_sorted
from .recalibration import (
    METHOD_ORDER,
    apply_recalibrator,
    fit_histogram,
    fit_isotonic,
    fit_temperature,
)
from .rng import substream
from .synthetic import (
    IdentityCurve,
    PowerCurve,
    ScoreDistribution,
    SyntheticModel,
    power_d_for_tce,
    sample,
    tce,
)


@dataclass(frozen=True)
class SimulationConfig:
    model: SyntheticModel
    n: int
    m: int
    estimators: tuple[EstimatorSpec, ...]
    seed: int

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise PreconditionError("need n >= 1 and m >= 1")
        if not self.estimators:
            raise PreconditionError("need at least one estimator")


@dataclass(frozen=True)
class BiasReport:
    """Monte-Carlo summary for one estimator: bias = mean_ece - tce."""

    estimator: EstimatorSpec
    n: int
    m: int
    mean_ece: float
    tce: float
    bias: float
    std: float
    stderr: float
    mean_bins: float | None = None
    error: str | None = None
    values: np.ndarray | None = None


@dataclass(frozen=True)
class PowerReport:
    estimator: EstimatorSpec
    n: int
    alpha: float
    threshold: float
    tce_grid: tuple[float, ...]
    d_grid: tuple[float, ...]
    type2: tuple[float, ...]


@dataclass(frozen=True)
class HeatmapCell:
    """One (n, b) cell; the sweep diagnostic row uses the sentinel b = -1."""

    n: int
    b: int
    tce: float
    mean_ece: float
    bias: float
    std: float
    stderr: float
    valid: bool


@dataclass(frozen=True)
class RankEntry:
    phase: str  # "full" or "subsample"
    repeat: int  # -1 for the full-set phase
    metric: EstimatorSpec
    method: str  # "uncalibrated" or a recalibration method
    value: float
    bins_used: int | None
    preferred: bool
    tie: bool


def _simulate_values(model, n, m, specs, seed, tag_parts, threads):
    """(m x n_spec) estimator values and bins_used over m replicate datasets.

    Worker j fills only row j, so any thread schedule produces the same
    arrays. Estimator exceptions are recorded, not raised.
    """
    n_spec = len(specs)
    values = np.full((m, n_spec), np.nan)
    bins_used = np.full((m, n_spec), np.nan)
    errors: list[list] = [[None] * n_spec for _ in range(m)]

    def run(j: int) -> None:
        ds = sample(model, n, substream(seed, *tag_parts, j))
        ss, sl = sort_by_score(ds)
        for e, spec in enumerate(specs):
            try:
                res = evaluate_sorted(spec, ss, sl)
            except CalbenchError as exc:
                errors[j][e] = str(exc)
                continue
            values[j, e] = res.value
            if res.bins_used is not None:
                bins_used[j, e] = res.bins_used

    if threads <= 1:
        for j in range(m):
            run(j)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run, range(m)))

    first_error = [None] * n_spec
    for e in range(n_spec):
        for j in range(m):
            if errors[j][e] is not None:
                first_error[e] = errors[j][e]
                break
    return values, bins_used, first_error


def _summarize(spec, n, m, col, bins_col, true_ce, error, keep_values) -> BiasReport:
    if error is not None:
        return BiasReport(spec, n, m, np.nan, true_ce, np.nan, np.nan, np.nan, error=error)
    mean = float(np.mean(col))
    std = float(np.std(col, ddof=1)) if m > 1 else 0.0
    mean_bins = float(np.mean(bins_col)) if not np.all(np.isnan(bins_col)) else None
    return BiasReport(
        estimator=spec,
        n=n,
        m=m,
        mean_ece=mean,
        tce=true_ce,
        bias=mean - true_ce,
        std=std,
        stderr=std / np.sqrt(m),
        mean_bins=mean_bins,
        values=col.copy() if keep_values else None,
    )


def estimate_bias(config: SimulationConfig, threads: int = 1,
                  keep_values: bool = False) -> list[BiasReport]:
    """Sample m datasets and report each estimator's mean, bias, and spread.

    All estimators see the same replicate datasets. An estimator that
    raises gets an error report; the rest of the run is unaffected.
    """
    specs = tuple(config.estimators)
    tces = {spec.norm.p: tce(config.model, spec.norm) for spec in specs}
    values, bins_used, errs = _simulate_values(
        config.model, config.n, config.m, specs, config.seed, ("sim",), threads
    )
    return [
        _summarize(spec, config.n, config.m, values[:, e], bins_used[:, e],
                   tces[spec.norm.p], errs[e], keep_values)
        for e, spec in enumerate(specs)
    ]


def bias_vs_tce(dist: ScoreDistribution, estimator: EstimatorSpec, n: int, m: int,
                d_grid: Sequence[float], seed: int, threads: int = 1) -> list[dict]:
    """Mean estimate and bias along a family of power curves c^d.

    One row per d: {d, tce, mean_ece, bias, std, stderr}.
    """
    rows = []
    for di, d in enumerate(d_grid):
        model = SyntheticModel(dist, PowerCurve(float(d)))
        true_ce = tce(model, estimator.norm)
        values, bins_used, errs = _simulate_values(
            model, n, m, (estimator,), seed, ("bvt", di), threads
        )
        rep = _summarize(estimator, n, m, values[:, 0], bins_used[:, 0],
                         true_ce, errs[0], False)
        if rep.error is not None:
            raise PreconditionError(rep.error)
        rows.append(
            {"d": float(d), "tce": rep.tce, "mean_ece": rep.mean_ece,
             "bias": rep.bias, "std": rep.std, "stderr": rep.stderr}
        )
    return rows


_SWEEP_SENTINEL = -1


def bias_heatmap(model: SyntheticModel, n_grid: Sequence[int], b_grid: Sequence[int],
                 estimator_kind: str, m: int, seed: int, p: float = 2.0,
                 threads: int = 1) -> list[HeatmapCell]:
    """Bias and spread over an (n, b) grid, plus a sweep row at b = -1.

    ``estimator_kind`` is a fixed-bin kind (ew-bin, em-bin, em-debiased);
    the sweep row uses the matching binning scheme. Cells whose
    estimator cannot run (e.g. more equal-mass bins than samples) are
    returned invalid rather than failing the grid.
    """
    if not n_grid or not b_grid:
        raise PreconditionError("need nonempty n and b grids")
    norm = Norm(p)
    sweep_kind = "ew-sweep" if estimator_kind.startswith("ew") else "em-sweep"
    true_ce = tce(model, norm)
    cells = []
    for ni, n in enumerate(sorted(set(int(v) for v in n_grid))):
        specs = [EstimatorSpec(estimator_kind, int(b), norm) for b in b_grid]
        specs.append(EstimatorSpec(sweep_kind, None, norm))
        values, bins_used, errs = _simulate_values(
            model, n, m, tuple(specs), seed, ("heat", ni), threads
        )
        for e, spec in enumerate(specs):
            b = _SWEEP_SENTINEL if spec.bins is None else spec.bins
            if errs[e] is not None:
                cells.append(HeatmapCell(n, b, true_ce, np.nan, np.nan, np.nan, np.nan, False))
                continue
            rep = _summarize(spec, n, m, values[:, e], bins_used[:, e], true_ce, None, False)
            cells.append(
                HeatmapCell(n, b, true_ce, rep.mean_ece, rep.bias, rep.std, rep.stderr, True)
            )
    return cells


def power_test(dist: ScoreDistribution, estimator: EstimatorSpec, n: int, alpha: float,
               tce_targets: Sequence[float], m_null: int, m_alt: int, seed: int,
               threads: int = 1, d_max: float = 50.0) -> PowerReport:
    """Miss rate of the miscalibration test built on the estimator.

    The detection threshold is the empirical (1 - alpha) quantile of the
    estimator under the perfectly calibrated model; each target TCE is
    realized by a power curve and the type II rate is the fraction of
    alternative replicates at or below the threshold.
    """
    if not 0.0 < alpha < 1.0:
        raise PreconditionError("alpha must lie in (0, 1)")
    null_model = SyntheticModel(dist, IdentityCurve())
    null_vals, _, errs = _simulate_values(
        null_model, n, m_null, (estimator,), seed, ("power-null",), threads
    )
    if errs[0] is not None:
        raise PreconditionError(errs[0])
    threshold = float(np.quantile(null_vals[:, 0], 1.0 - alpha))
    ds = []
    type2 = []
    for ti, target in enumerate(tce_targets):
        d = power_d_for_tce(dist, float(target), estimator.norm, d_max=d_max)
        model = SyntheticModel(dist, PowerCurve(d))
        vals, _, errs = _simulate_values(
            model, n, m_alt, (estimator,), seed, ("power-alt", ti), threads
        )
        if errs[0] is not None:
            raise PreconditionError(errs[0])
        ds.append(d)
        type2.append(float(np.mean(vals[:, 0] <= threshold)))
    return PowerReport(
        estimator=estimator,
        n=n,
        alpha=alpha,
        threshold=threshold,
        tce_grid=tuple(float(t) for t in tce_targets),
        d_grid=tuple(ds),
        type2=tuple(type2),
    )


def _rank_one(val_records, eval_records, eval_uncal, metrics, histogram_bins,
              phase, repeat) -> list[RankEntry]:
    val_scores = to_top1_scores(val_records)
    recalibrated = {
        "histogram": apply_recalibrator(fit_histogram(val_scores, histogram_bins), eval_uncal),
        "temperature": apply_recalibrator(fit_temperature(val_records), eval_records),
        "isotonic": apply_recalibrator(fit_isotonic(val_scores), eval_uncal),
    }
    entries = []
    for spec in metrics:
        results = {}
        for method in ("uncalibrated",) + METHOD_ORDER:
            ds = eval_uncal if method == "uncalibrated" else recalibrated[method]
            ss, sl = sort_by_score(ds)
            results[method] = evaluate_sorted(spec, ss, sl)
        best = min(results[m].value for m in METHOD_ORDER)
        winners = [m for m in METHOD_ORDER if results[m].value == best]
        for method in ("uncalibrated",) + METHOD_ORDER:
            res = results[method]
            entries.append(
                RankEntry(
                    phase=phase,
                    repeat=repeat,
                    metric=spec,
                    method=method,
                    value=res.value,
                    bins_used=res.bins_used,
                    preferred=(method == winners[0]),
                    tie=(method in winners and len(winners) > 1),
                )
            )
    return entries


def rank_recalibrators(records: Sequence[LogitRecord], val_size: int, eval_size: int,
                       metrics: Sequence[EstimatorSpec], subsample_fraction: float = 0.1,
                       repeats: int = 20, seed: int = 0,
                       histogram_bins: int = 15) -> list[RankEntry]:
    """Which recalibration method each metric prefers.

    Records are shuffled once (seeded); the first val_size fit the three
    recalibrators and the next eval_size score them. The full-set pass is
    followed by ``repeats`` refits on random subsamples of the validation
    set, mimicking small-validation conditions. Exact value ties are
    flagged and the winner falls to the fixed method order.
    """
    if val_size + eval_size > len(records):
        raise PreconditionError("not enough records for the requested split")
    if not 0.0 < subsample_fraction <= 1.0:
        raise PreconditionError("subsample fraction must lie in (0, 1]")
    perm = substream(seed, "rank").permutation(len(records))
    val_records = [records[i] for i in perm[:val_size]]
    eval_records = [records[i] for i in perm[val_size : val_size + eval_size]]
    eval_uncal = to_top1_scores(eval_records)

    entries = _rank_one(val_records, eval_records, eval_uncal, metrics,
                        histogram_bins, "full", -1)
    sub_n = max(1, int(round(subsample_fraction * val_size)))
    for r in range(repeats):
        idx = substream(seed, "rank-sub", r).choice(val_size, size=sub_n, replace=False)
        sub_val = [val_records[i] for i in idx]
        entries.extend(
            _rank_one(sub_val, eval_records, eval_uncal, metrics,
                      histogram_bins, "subsample", r)
        )
    return entries
