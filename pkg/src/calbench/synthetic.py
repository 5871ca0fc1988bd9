"""Parametric score distributions and true calibration curves.

A synthetic model couples a score distribution F with a calibration
curve T(c) = E[Y | score = c]. That makes the true calibration error an
ordinary one-dimensional integral: substituting c = Q(u) with Q the
quantile function of F,

    TCE^p = integral_0^1 |Q(u) - T(Q(u))|^p du,

evaluated by the midpoint rule in u-space. Working in quantile space
keeps the integrand smooth even for the heavily right-skewed Beta score
distributions produced by image classifiers (beta parameter well below
1, most mass hugging c = 1), which a c-space rule would underresolve.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import special

from .data import ScoredDataset
from .errors import NumericalError, PreconditionError
from .estimators import Norm
from .fitting import GlmModel, glm_predict
from .rng import substream

_QUANTILE_TOL = 1e-12
_TCE_NODES = 2**14
_TCE_MAX_NODES = 2**20
_TCE_TOL = 1e-8
_CURVE_CHECK_GRID = 1001


def beta_pdf(alpha: float, beta: float, x):
    """Beta(alpha, beta) density, computed in log space.

    Stays finite for alpha or beta far below 1; x must lie strictly
    inside (0, 1).
    """
    if not (alpha > 0 and beta > 0 and np.isfinite(alpha) and np.isfinite(beta)):
        raise PreconditionError("beta parameters must be positive and finite")
    arr = np.asarray(x, dtype=np.float64)
    if np.any((arr <= 0.0) | (arr >= 1.0)):
        raise PreconditionError("beta_pdf requires 0 < x < 1")
    log_pdf = (
        (alpha - 1.0) * np.log(arr)
        + (beta - 1.0) * np.log1p(-arr)
        - special.betaln(alpha, beta)
    )
    out = np.exp(log_pdf)
    return float(out) if np.isscalar(x) else out


def beta_cdf(alpha: float, beta: float, x):
    """Regularized incomplete beta function, the Beta CDF."""
    return special.betainc(alpha, beta, x)


def beta_quantile(alpha: float, beta: float, u):
    """Inverse Beta CDF by bracketed bisection to 1e-12 absolute.

    quantile(0) = 0 and quantile(1) = 1 exactly. Beta(1, 1) short-circuits
    to the identity.
    """
    if not (alpha > 0 and beta > 0 and np.isfinite(alpha) and np.isfinite(beta)):
        raise PreconditionError("beta parameters must be positive and finite")
    arr = np.asarray(u, dtype=np.float64)
    if np.any((arr < 0.0) | (arr > 1.0)):
        raise PreconditionError("quantile argument must lie in [0, 1]")
    if alpha == 1.0 and beta == 1.0:
        out = arr.copy()
        return float(out) if np.isscalar(u) else out
    lo = np.zeros_like(arr)
    hi = np.ones_like(arr)
    # 41 halvings shrink the bracket below the 1e-12 tolerance
    for _ in range(41):
        mid = 0.5 * (lo + hi)
        below = special.betainc(alpha, beta, mid) < arr
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    out = 0.5 * (lo + hi)
    out = np.where(arr == 0.0, 0.0, out)
    out = np.where(arr == 1.0, 1.0, out)
    return float(out) if np.isscalar(u) else out


@dataclass(frozen=True)
class UniformScores:
    """Scores uniform on [0, 1]."""

    def quantile(self, u):
        return np.asarray(u, dtype=np.float64)


@dataclass(frozen=True)
class BetaScores:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0) or not (
            np.isfinite(self.alpha) and np.isfinite(self.beta)
        ):
            raise PreconditionError("beta parameters must be positive and finite")

    def quantile(self, u):
        return beta_quantile(self.alpha, self.beta, u)


ScoreDistribution = Union[UniformScores, BetaScores]


def _check_curve_range(curve) -> None:
    grid = np.linspace(0.0, 1.0, _CURVE_CHECK_GRID)
    vals = curve(grid)
    if np.any(~np.isfinite(vals)) or np.any((vals < 0.0) | (vals > 1.0)):
        raise PreconditionError("calibration curve must map [0,1] into [0,1]")


@dataclass(frozen=True)
class IdentityCurve:
    """Perfect calibration: T(c) = c."""

    def __call__(self, c):
        return np.asarray(c, dtype=np.float64)


@dataclass(frozen=True)
class PowerCurve:
    """T(c) = c^d with d >= 1; larger d means worse calibration."""

    d: float

    def __post_init__(self):
        if not (self.d >= 1.0 and np.isfinite(self.d)):
            raise PreconditionError("power curve exponent must be >= 1")
        _check_curve_range(self)

    def __call__(self, c):
        return np.asarray(c, dtype=np.float64) ** self.d


@dataclass(frozen=True)
class LogisticCurve:
    """T(c) = 1 / (1 + exp(-(a*c + c0)))."""

    a: float
    c0: float

    def __post_init__(self):
        _check_curve_range(self)

    def __call__(self, c):
        return special.expit(self.a * np.asarray(c, dtype=np.float64) + self.c0)


@dataclass(frozen=True)
class GlmCurve:
    """A fitted GLM used as the true calibration curve."""

    model: GlmModel

    def __post_init__(self):
        _check_curve_range(self)

    def __call__(self, c):
        return glm_predict(self.model, np.asarray(c, dtype=np.float64))


CalibrationCurve = Union[IdentityCurve, PowerCurve, LogisticCurve, GlmCurve]


@dataclass(frozen=True)
class SyntheticModel:
    dist: ScoreDistribution
    curve: CalibrationCurve


@functools.lru_cache(maxsize=16)
def _beta_quantile_grid(alpha: float, beta: float, nodes: int) -> np.ndarray:
    u = (np.arange(nodes) + 0.5) / nodes
    q = beta_quantile(alpha, beta, u)
    q.setflags(write=False)
    return q


def _quantile_grid(dist: ScoreDistribution, nodes: int) -> np.ndarray:
    if isinstance(dist, BetaScores):
        return _beta_quantile_grid(dist.alpha, dist.beta, nodes)
    return (np.arange(nodes) + 0.5) / nodes


def _tce_at(model: SyntheticModel, p: float, nodes: int) -> float:
    q = _quantile_grid(model.dist, nodes)
    gap = np.abs(q - model.curve(q))
    return float(np.mean(gap**p) ** (1.0 / p))


def tce(model: SyntheticModel, norm: Norm = Norm()) -> float:
    """True calibration error of the model under the L^p norm.

    Midpoint rule on 2^14 quantile-space nodes, doubled until two
    successive refinements agree to 1e-8 (errors out past 2^20 nodes).
    """
    nodes = _TCE_NODES
    prev = _tce_at(model, norm.p, nodes)
    while nodes < _TCE_MAX_NODES:
        nodes *= 2
        cur = _tce_at(model, norm.p, nodes)
        if abs(cur - prev) < _TCE_TOL:
            return cur
        prev = cur
    raise NumericalError("quadrature failed to converge")


def sample(model: SyntheticModel, n: int, seed) -> ScoredDataset:
    """Draw n (score, label) pairs from the model.

    Scores come from inverse-CDF sampling of one uniform stream; labels
    are Bernoulli draws at the curve's value. ``seed`` is a 64-bit int
    or an existing numpy Generator (for substream callers). A given
    (model, n, seed) triple is bit-reproducible.
    """
    if n < 1:
        raise PreconditionError("need n >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else substream(int(seed))
    u = rng.random(n)
    scores = model.dist.quantile(u)
    t = model.curve(scores)
    labels = (rng.random(n) < t).astype(np.float64)
    return ScoredDataset(scores, labels)


def power_d_for_tce(dist: ScoreDistribution, target_tce: float,
                    norm: Norm = Norm(), d_max: float = 50.0) -> float:
    """Exponent d in [1, d_max] whose power curve hits the target TCE.

    Uses bisection on d; the TCE of c^d grows monotonically from 0 at
    d = 1, so any target up to tce(d_max) is reachable to 1e-6.
    """
    if not 0.0 <= target_tce < 1.0:
        raise PreconditionError("target TCE must lie in [0, 1)")
    if target_tce == 0.0:
        return 1.0
    reach = tce(SyntheticModel(dist, PowerCurve(d_max)), norm)
    if target_tce > reach:
        raise PreconditionError("target TCE unreachable")
    lo, hi = 1.0, d_max
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        val = tce(SyntheticModel(dist, PowerCurve(mid)), norm)
        if abs(val - target_tce) < 1e-6:
            return mid
        if val < target_tce:
            lo = mid
        else:
            hi = mid
    raise NumericalError("bisection for power exponent failed to converge")
