"""Calibration-error estimation and simulation toolkit.

Estimators for the calibration error of probabilistic classifiers,
parametric (Beta + GLM) fits to empirical score data, post-hoc
recalibration methods, and Monte-Carlo drivers that measure estimator
bias and miscalibration-detection power against an analytically known
true calibration error.
"""

__version__ = "0.1.0"

from .analysis import (
    BiasReport,
    HeatmapCell,
    PowerReport,
    RankEntry,
    SimulationConfig,
    bias_heatmap,
    bias_vs_tce,
    estimate_bias,
    power_test,
    rank_recalibrators,
)
from .binning import EQUAL_MASS, EQUAL_WIDTH, BinningScheme, BinSummary, bin_dataset
from .data import (
    LogitRecord,
    ScoredDataset,
    ScoredSample,
    load_logits,
    load_scores,
    save_scores,
    to_top1_scores,
)
from .errors import CalbenchError, DataFormatError, NumericalError, PreconditionError
from .estimators import (
    EstimateResult,
    EstimatorSpec,
    Norm,
    ece_bin,
    ece_debiased,
    ece_kde,
    ece_lb,
    ece_sweep,
    evaluate,
    parse_spec,
)
from .fitting import (
    BetaFit,
    GlmFit,
    GlmModel,
    candidate_models,
    fit_beta_mle,
    fit_glm,
    glm_predict,
    select_glm_by_aic,
)
from .recalibration import (
    HistogramRecalibrator,
    IsotonicRecalibrator,
    Recalibrator,
    TemperatureScaler,
    apply_recalibrator,
    fit_histogram,
    fit_isotonic,
    fit_temperature,
)
from .synthetic import (
    BetaScores,
    CalibrationCurve,
    GlmCurve,
    IdentityCurve,
    LogisticCurve,
    PowerCurve,
    ScoreDistribution,
    SyntheticModel,
    UniformScores,
    beta_cdf,
    beta_pdf,
    beta_quantile,
    power_d_for_tce,
    sample,
    tce,
)

__all__ = [name for name in dir() if not name.startswith("_")]
