"""Per-age conjugate estimation of death rates.

A Poisson death count d with exposure E and a flat prior on the rate
gives a Gamma(d + 1, E) posterior.  Point estimates: the posterior mode
(d/E, the single-cell maximum-likelihood rate), the mean ((d+1)/E), or
the median.  Ages are treated independently; no smoothness across the
age axis is imposed, which keeps the estimator honest at ages with zero
deaths but makes it sensitive to outliers where exposures are tiny.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import gamma as gamma_dist

from ..ingest import MortalitySeries
from .base import SmoothedSeries, check_exposures

ESTIMATOR_KINDS = ("map", "mean", "median")


@dataclass(frozen=True, slots=True)
class GammaPosterior:
    """Gamma(kappa, lambda) in shape/rate form; kappa = d + 1, lambda = E."""

    kappa: float
    lam: float

    def __post_init__(self) -> None:
        if not (self.kappa > 0 and np.isfinite(self.kappa)):
            raise ValueError("kappa must be positive and finite")
        if not (self.lam > 0 and np.isfinite(self.lam)):
            raise ValueError("lam must be positive and finite")

    def pdf(self, x) -> np.ndarray:
        return gamma_dist.pdf(x, a=self.kappa, scale=1.0 / self.lam)


def bayes_posterior(d: float, exposure: float) -> GammaPosterior:
    """Posterior for the death rate given d deaths over a positive exposure."""
    if d < 0:
        raise ValueError("death count must be nonnegative")
    if exposure <= 0:
        raise ValueError("exposure must be positive")
    return GammaPosterior(kappa=float(d) + 1.0, lam=float(exposure))


def gamma_median(kappa: float, lam: float) -> float:
    return float(gamma_dist.ppf(0.5, a=kappa, scale=1.0 / lam))


def bayes_estimate(post: GammaPosterior, kind: str) -> float:
    """Point estimate from the posterior.

    ``map`` is (kappa-1)/lam = d/E and is exactly zero when d = 0 (an
    invalid rate; callers that need positive rates substitute the median,
    see smooth_bayes).
    """
    if kind == "map":
        return (post.kappa - 1.0) / post.lam
    if kind == "mean":
        return post.kappa / post.lam
    if kind == "median":
        return gamma_median(post.kappa, post.lam)
    raise ValueError(f"kind must be one of {ESTIMATOR_KINDS}, got {kind!r}")


def smooth_bayes(series: MortalitySeries, kind: str = "mean") -> SmoothedSeries:
    """Independent per-age estimates for ages 85-109.

    With kind="map", ages with zero deaths would get a zero rate; those
    cells fall back to the posterior median and are flagged in the
    diagnostics.
    """
    if kind not in ESTIMATOR_KINDS:
        raise ValueError(f"kind must be one of {ESTIMATOR_KINDS}, got {kind!r}")
    deaths = series.old_age_deaths()
    exposures = check_exposures(series.old_age_exposures())

    rates = np.empty(len(deaths))
    substituted: list[int] = []
    for i, (d, e) in enumerate(zip(deaths, exposures)):
        post = bayes_posterior(d, e)
        if kind == "map" and d == 0:
            rates[i] = bayes_estimate(post, "median")
            substituted.append(int(series.ages[series.age_slice(85, 109)][i]))
        else:
            rates[i] = bayes_estimate(post, kind)
    return SmoothedSeries(
        method=f"bayes-{kind}",
        rates=rates,
        diagnostics={"kind": kind, "map_zero_substituted_ages": substituted},
    )
