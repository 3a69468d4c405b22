"""Penalized B-spline smoothing of old-age death counts.

Poisson regression of deaths on age with log-exposure offset, cubic
B-spline basis with one knot per age, and a second-order difference
penalty on the coefficients.  The penalty weight comes from a BIC scan;
its null space is the degree-one polynomials, so the infinite-smoothing
limit is a straight line in log rate.
"""

from __future__ import annotations

import numpy as np
from scipy.interpolate import BSpline

from ..ingest import AGE_HI, AGE_LO, MortalitySeries
from .base import SmoothedSeries, check_exposures
from .pirls import LAMBDA_GRID, PIRLSFit, pirls, pirls_bic

SPLINE_DEGREE = 3


def bspline_basis(
    grid: np.ndarray, degree: int = SPLINE_DEGREE
) -> np.ndarray:
    """Cubic B-spline design on an integer grid, one knot per grid point."""
    grid = np.asarray(grid, dtype=float)
    knots = np.arange(grid[0] - degree, grid[-1] + degree + 1, dtype=float)
    design = BSpline.design_matrix(grid, knots, degree, extrapolate=False)
    return design.toarray()


def fit_pspline(series: MortalitySeries, lam: float | None = None) -> SmoothedSeries:
    """Smooth the 25 old-age rates of one population-year.

    ``lam`` forces a fixed smoothing weight; by default the weight is
    selected by BIC over ``LAMBDA_GRID``.
    """
    deaths = series.old_age_deaths()
    exposures = check_exposures(series.old_age_exposures())
    return fit_pspline_arrays(deaths, exposures, lam=lam)


def fit_pspline_arrays(
    deaths: np.ndarray,
    exposures: np.ndarray,
    lam: float | None = None,
    ages: np.ndarray | None = None,
) -> SmoothedSeries:
    deaths = np.asarray(deaths, dtype=float)
    exposures = check_exposures(exposures)
    if ages is None:
        ages = np.arange(AGE_LO, AGE_HI + 1, dtype=float)
    design = bspline_basis(ages)
    offset = np.log(exposures)

    if lam is None:
        fit = pirls_bic(deaths, design=design, offset=offset)
    else:
        fit = pirls(deaths, lam, design=design, offset=offset)
    return _to_series(fit, exposures)


def _to_series(fit: PIRLSFit, exposures: np.ndarray) -> SmoothedSeries:
    rates = fit.fitted / exposures
    return SmoothedSeries(
        method="pspline",
        rates=rates,
        diagnostics={
            "lambda": fit.lam,
            "bic": fit.bic,
            "edf": fit.edf,
            "deviance": fit.deviance,
            "iterations": fit.iterations,
            "pen_dev_history": list(fit.pen_dev_history),
        },
    )
