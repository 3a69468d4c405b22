"""Four competing smoothers for old-age (85-109) death rates."""

from .base import (
    METHODS,
    N_AGES,
    OLD_AGES,
    FitError,
    SmoothedSeries,
    SmoothedSurface,
)
from .bayes import (
    ESTIMATOR_KINDS,
    GammaPosterior,
    bayes_estimate,
    bayes_posterior,
    smooth_bayes,
)
from .ggm import GGMParams, fit_ggm, fit_ggm_arrays, ggm_hazard, ggm_loglik
from .pclm import GroupedCounts, composition_matrix, fit_pclm, group_for_pclm
from .pspline import fit_pspline, fit_pspline_arrays

__all__ = [
    "METHODS",
    "N_AGES",
    "OLD_AGES",
    "FitError",
    "SmoothedSeries",
    "SmoothedSurface",
    "ESTIMATOR_KINDS",
    "GammaPosterior",
    "bayes_estimate",
    "bayes_posterior",
    "smooth_bayes",
    "GGMParams",
    "fit_ggm",
    "fit_ggm_arrays",
    "ggm_hazard",
    "ggm_loglik",
    "GroupedCounts",
    "composition_matrix",
    "fit_pclm",
    "group_for_pclm",
    "fit_pspline",
    "fit_pspline_arrays",
]
