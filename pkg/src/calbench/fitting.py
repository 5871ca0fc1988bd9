"""Parametric fits to empirical score data.

Two fit families: a two-parameter Beta distribution for the confidence
scores, found by a recursively refining brute-force grid search, and
one-covariate binary GLMs for the calibration curve, with the winning
GLM picked by the Akaike information criterion.

The GLM family crosses a link g and a score transform t, with
p = g^{-1}(b0 + b1 * t(s)); the admissible (link, transform) pairs are
(logit, logit), (logit, logflip), (logflip, logflip) and (log, log),
each with b0 only, b1 only, or both free — 12 candidates in total.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize, special

from .data import ScoredDataset
from .errors import NumericalError, PreconditionError

#: clamp applied to scores before transforms and to probabilities after links
EPS = 1e-12

GLM_COMBOS = (("logit", "logit"), ("logit", "logflip"), ("logflip", "logflip"), ("log", "log"))

# Beta MLE search box and grid-search hyperparameters
_ALPHA_MAX = 200.0
_BETA_MAX = 50.0
_GRID_N = 11
_GRID_CONTRACTION = 0.5
_GRID_TOL = 1e-5


@dataclass(frozen=True)
class BetaFit:
    alpha_hat: float
    beta_hat: float
    nll: float
    grid_tolerance: float


@dataclass(frozen=True)
class GlmModel:
    """A binary GLM p = g^{-1}(b0 + b1 t(s)); absent parameters stay 0."""

    link: str
    transform: str
    has_b0: bool
    has_b1: bool
    b0: float = 0.0
    b1: float = 0.0

    def __post_init__(self):
        if (self.link, self.transform) not in GLM_COMBOS:
            raise PreconditionError(
                f"unsupported link/transform pair ({self.link}, {self.transform})"
            )
        if not (self.has_b0 or self.has_b1):
            raise PreconditionError("GLM needs at least one free parameter")

    @property
    def k(self) -> int:
        return int(self.has_b0) + int(self.has_b1)

    @property
    def name(self) -> str:
        params = "_".join(p for p, on in (("b0", self.has_b0), ("b1", self.has_b1)) if on)
        return f"{self.link}_{self.transform}_{params}"


@dataclass(frozen=True)
class GlmFit:
    model: GlmModel
    nll: float
    aic: float


def candidate_models() -> list[GlmModel]:
    """The 12 GLM templates considered by AIC selection."""
    out = []
    for link, transform in GLM_COMBOS:
        for has_b0, has_b1 in ((True, False), (False, True), (True, True)):
            out.append(GlmModel(link, transform, has_b0, has_b1))
    return out


def _clamp01(x):
    return np.clip(x, EPS, 1.0 - EPS)


def _transform(name: str, s):
    s = _clamp01(np.asarray(s, dtype=np.float64))
    if name == "logit":
        return np.log(s / (1.0 - s))
    if name == "log":
        return np.log(s)
    return np.log(1.0 - s)  # logflip


def _link_inverse(name: str, eta):
    with np.errstate(over="ignore"):
        if name == "logit":
            p = special.expit(eta)
        elif name == "log":
            p = np.exp(eta)
        else:  # logflip
            p = 1.0 - np.exp(eta)
    return _clamp01(p)


def glm_predict(model: GlmModel, score):
    """Evaluate the GLM calibration curve at score(s) in [0, 1]."""
    eta = model.b0 + model.b1 * _transform(model.transform, score)
    out = _link_inverse(model.link, eta)
    if np.isscalar(score):
        return float(out)
    return out


def _binary_nll(p: np.ndarray, y: np.ndarray) -> float:
    return float(-np.sum(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def fit_glm(dataset: ScoredDataset, template: GlmModel) -> GlmFit:
    """Maximum-likelihood fit of the template's free parameters.

    Deterministic local search (BFGS with analytic gradient from the
    unclamped model, then a Nelder-Mead polish) from fixed starting
    points: (0, 1) when both parameters are free, 0 for a lone b0, 1 for
    a lone b1.
    """
    if dataset.n < 2:
        raise PreconditionError("GLM fit needs n >= 2")
    y = dataset.labels
    tau = _transform(template.transform, dataset.scores)
    link = template.link

    def unpack(theta):
        if template.has_b0 and template.has_b1:
            return theta[0], theta[1]
        if template.has_b0:
            return theta[0], 0.0
        return 0.0, theta[0]

    def objective(theta):
        b0, b1 = unpack(theta)
        p = _link_inverse(link, b0 + b1 * tau)
        return _binary_nll(p, y)

    def objective_grad(theta):
        b0, b1 = unpack(theta)
        p = _link_inverse(link, b0 + b1 * tau)
        if link == "logit":
            deta = p - y
        elif link == "log":
            deta = (p - y) / (1.0 - p)
        else:  # logflip
            deta = -(p - y) / p
        nll = _binary_nll(p, y)
        grad = []
        if template.has_b0:
            grad.append(float(np.sum(deta)))
        if template.has_b1:
            grad.append(float(np.sum(deta * tau)))
        return nll, np.array(grad)

    if template.has_b0 and template.has_b1:
        x0 = np.array([0.0, 1.0])
    elif template.has_b0:
        x0 = np.array([0.0])
    else:
        x0 = np.array([1.0])

    if not np.isfinite(objective(x0)):
        raise NumericalError("glm fit failed")
    res = optimize.minimize(objective_grad, x0, jac=True, method="BFGS",
                            options={"gtol": 1e-8, "maxiter": 500})
    best_x, best_f = res.x, float(res.fun)
    polish = optimize.minimize(objective, best_x, method="Nelder-Mead",
                               options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000})
    if polish.fun <= best_f:
        best_x, best_f = polish.x, float(polish.fun)
    if not np.isfinite(best_f):
        raise NumericalError("glm fit failed")
    b0, b1 = unpack(best_x)
    model = replace(template, b0=float(b0), b1=float(b1))
    return GlmFit(model=model, nll=best_f, aic=2.0 * template.k + 2.0 * best_f)


def _fit_order(a: GlmFit, b: GlmFit) -> int:
    # near-ties go to the smaller model, then to the lexicographic name
    if abs(a.aic - b.aic) >= 1e-9:
        return -1 if a.aic < b.aic else 1
    if a.model.k != b.model.k:
        return a.model.k - b.model.k
    return -1 if a.model.name < b.model.name else (1 if a.model.name > b.model.name else 0)


def select_glm_by_aic(dataset: ScoredDataset) -> list[GlmFit]:
    """Fit all 12 candidates and sort ascending by AIC; head is the pick.

    Candidates whose fit raises are dropped; only a full wipeout is an
    error.
    """
    fits = []
    for template in candidate_models():
        try:
            fits.append(fit_glm(dataset, template))
        except NumericalError:
            continue
    if not fits:
        raise NumericalError("glm fit failed for all candidates")
    return sorted(fits, key=functools.cmp_to_key(_fit_order))


def _beta_nll_grid(alphas, betas, n, sum_log_x, sum_log_1mx):
    ga = special.gammaln(alphas)[:, None]
    gb = special.gammaln(betas)[None, :]
    gab = special.gammaln(alphas[:, None] + betas[None, :])
    return (
        n * (ga + gb - gab)
        - (alphas - 1.0)[:, None] * sum_log_x
        - (betas - 1.0)[None, :] * sum_log_1mx
    )


def fit_beta_mle(dataset: ScoredDataset) -> BetaFit:
    """Beta(alpha, beta) maximum likelihood by recursive grid refinement.

    An 11-point-per-axis grid over (0, 200] x (0, 50] is refined around
    the running optimum, halving each axis span per level while staying
    inside the box, until both grid spacings fall below 1e-5. Scores are
    clamped away from 0 and 1 before the log-likelihood is evaluated.
    """
    if dataset.n < 2:
        raise PreconditionError("beta fit needs n >= 2")
    x = _clamp01(dataset.scores)
    n = dataset.n
    s1 = float(np.sum(np.log(x)))
    s2 = float(np.sum(np.log1p(-x)))

    lo_a, hi_a = EPS, _ALPHA_MAX
    lo_b, hi_b = EPS, _BETA_MAX
    best = (np.nan, np.nan, np.inf)
    for _ in range(200):
        alphas = np.linspace(lo_a, hi_a, _GRID_N)
        betas = np.linspace(lo_b, hi_b, _GRID_N)
        nll = _beta_nll_grid(alphas, betas, n, s1, s2)
        if not np.any(np.isfinite(nll)):
            raise NumericalError("beta fit failed")
        i, j = np.unravel_index(np.nanargmin(np.where(np.isfinite(nll), nll, np.inf)), nll.shape)
        best = (float(alphas[i]), float(betas[j]), float(nll[i, j]))
        tol_a = (hi_a - lo_a) / (_GRID_N - 1)
        tol_b = (hi_b - lo_b) / (_GRID_N - 1)
        if tol_a < _GRID_TOL and tol_b < _GRID_TOL:
            return BetaFit(best[0], best[1], best[2], max(tol_a, tol_b))
        span_a = (hi_a - lo_a) * _GRID_CONTRACTION
        span_b = (hi_b - lo_b) * _GRID_CONTRACTION
        lo_a = max(EPS, best[0] - span_a / 2)
        hi_a = min(_ALPHA_MAX, best[0] + span_a / 2)
        lo_b = max(EPS, best[1] - span_b / 2)
        hi_b = min(_BETA_MAX, best[1] + span_b / 2)
    raise NumericalError("beta fit failed to converge")


def beta_fit_to_dict(fit: BetaFit) -> dict:
    return {"alpha": fit.alpha_hat, "beta": fit.beta_hat, "nll": fit.nll}


def glm_fit_to_dict(fit: GlmFit) -> dict:
    return {
        "model_name": fit.model.name,
        "b0": fit.model.b0 if fit.model.has_b0 else None,
        "b1": fit.model.b1 if fit.model.has_b1 else None,
        "nll": fit.nll,
        "aic": fit.aic,
    }


def glm_model_from_dict(d: dict) -> GlmModel:
    """Rebuild a fitted GlmModel from its serialized form."""
    link, transform, params = d["model_name"].split("_", 2)
    has_b0 = "b0" in params
    has_b1 = "b1" in params
    return GlmModel(
        link,
        transform,
        has_b0,
        has_b1,
        b0=float(d["b0"]) if has_b0 else 0.0,
        b1=float(d["b1"]) if has_b1 else 0.0,
    )
