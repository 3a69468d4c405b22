"""Ungrouping coarse old-age death counts with a penalized composite
link model.

Sparse death counts above some age make single-age rates unusable, so
counts are re-binned first: single ages are kept from 40 up to the first
age Y with fewer than 100 deaths, and everything from Y through the open
110+ group is collapsed into one tail bin.  The model then treats the
single-age counts on 40-109 as latent Poisson cells whose log values
carry a second-order difference penalty, linked to the observed bins by
an aggregation matrix; maximizing the penalized likelihood recovers a
smooth latent count schedule whose binned totals reproduce the data.
Death rates on 85-109 are the latent counts divided by exposures.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..ingest import AGE_HI, AGE_LO, AGE_MIN, AGE_OPEN, MortalitySeries
from .base import FitError, SmoothedSeries, check_exposures
from .pirls import PIRLSFit, pirls, pirls_bic

GROUPING_THRESHOLD = 100.0  # deaths; bins start at the first age below it
MIN_SINGLE_BINS = 5

LATENT_AGES = np.arange(AGE_MIN, AGE_HI + 1)
LATENT_AGES.flags.writeable = False


@dataclass(frozen=True, slots=True)
class GroupedCounts:
    """Single-age counts for 40..Y-1 plus one open bin from Y through 110+."""

    single_ages: np.ndarray
    single_counts: np.ndarray
    open_start: int  # Y
    open_count: float

    def __post_init__(self) -> None:
        ages = np.asarray(self.single_ages, dtype=int)
        counts = np.asarray(self.single_counts, dtype=float)
        if len(ages) != len(counts):
            raise ValueError("ages and counts must align")
        if len(ages) and ages[-1] != self.open_start - 1:
            raise ValueError("single ages must end right before the open bin")
        for arr in (ages, counts):
            arr.flags.writeable = False
        object.__setattr__(self, "single_ages", ages)
        object.__setattr__(self, "single_counts", counts)

    @property
    def total(self) -> float:
        return float(np.sum(self.single_counts) + self.open_count)


def group_for_pclm(series: MortalitySeries) -> GroupedCounts:
    """Re-bin one population-year's deaths for ungrouping.

    Y is the first age at or above 40 with fewer than 100 deaths; if no
    single age falls below the threshold, Y is 110 and the open bin holds
    only the 110+ deaths.  Totals are conserved exactly.
    """
    ages = series.ages
    deaths = series.deaths
    single_mask = (ages >= AGE_MIN) & (ages < AGE_OPEN)
    single_ages = ages[single_mask]
    single_deaths = deaths[single_mask]

    below = np.flatnonzero(single_deaths < GROUPING_THRESHOLD)
    y_cut = int(single_ages[below[0]]) if below.size else AGE_OPEN

    keep = single_ages < y_cut
    open_count = float(np.sum(single_deaths[~keep]) + np.sum(deaths[ages == AGE_OPEN]))
    return GroupedCounts(
        single_ages=single_ages[keep],
        single_counts=single_deaths[keep],
        open_start=y_cut,
        open_count=open_count,
    )


def composition_matrix(grouped: GroupedCounts) -> tuple[np.ndarray, np.ndarray]:
    """Aggregation matrix from latent ages 40..109 to the observed bins.

    Returns (matrix, observed counts).  When the open bin starts past the
    latent range (Y = 110) it has no latent support and is dropped from
    the likelihood: only its 110+ deaths are then outside the model.
    """
    n_latent = len(LATENT_AGES)
    n_single = len(grouped.single_ages)
    rows: list[np.ndarray] = []
    obs: list[float] = []
    for i in range(n_single):
        row = np.zeros(n_latent)
        row[i] = 1.0
        rows.append(row)
        obs.append(float(grouped.single_counts[i]))
    if grouped.open_start <= AGE_HI:
        row = np.zeros(n_latent)
        row[LATENT_AGES >= grouped.open_start] = 1.0
        rows.append(row)
        obs.append(grouped.open_count)
    return np.vstack(rows), np.asarray(obs)


def fit_pclm(
    grouped: GroupedCounts,
    exposures_old: np.ndarray,
    lam: float | None = None,
) -> SmoothedSeries:
    """Ungroup binned counts and return rates on ages 85-109.

    ``exposures_old`` are the 25 exposures for ages 85-109 (already
    imputed where zero).  Raises FitError on degenerate grouping (fewer
    than 5 single-age bins before the open group).
    """
    exposures_old = check_exposures(exposures_old)
    if len(exposures_old) != AGE_HI - AGE_LO + 1:
        raise ValueError(f"expected {AGE_HI - AGE_LO + 1} old-age exposures")
    if len(grouped.single_ages) < MIN_SINGLE_BINS:
        raise FitError(
            f"degenerate grouping: {len(grouped.single_ages)} single-age bins "
            f"before the open group (need {MIN_SINGLE_BINS})"
        )
    comp, observed = composition_matrix(grouped)
    if lam is None:
        fit = pirls_bic(observed, comp=comp)
    else:
        fit = pirls(observed, lam, comp=comp)
    return _to_series(fit, comp, observed, exposures_old)


def _to_series(
    fit: PIRLSFit,
    comp: np.ndarray,
    observed: np.ndarray,
    exposures_old: np.ndarray,
) -> SmoothedSeries:
    latent = fit.latent
    old_mask = LATENT_AGES >= AGE_LO
    rates = latent[old_mask] / exposures_old

    reproduced = comp @ latent
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.abs(reproduced - observed) / np.where(observed > 0, observed, 1.0)
    return SmoothedSeries(
        method="pclm",
        rates=rates,
        diagnostics={
            "lambda": fit.lam,
            "bic": fit.bic,
            "edf": fit.edf,
            "deviance": fit.deviance,
            "iterations": fit.iterations,
            "pen_dev_history": list(fit.pen_dev_history),
            "latent_total": float(np.sum(latent)),
            "observed_total": float(np.sum(observed)),
            "max_bin_rel_error": float(np.max(rel)) if rel.size else 0.0,
        },
    )
