"""Shared types for the old-age death-rate smoothers.

Every smoother maps one population-year to 25 fitted death rates on ages
85-109; a stack of those per-year fits for one (country, sex) is a
surface, the unit the model-selection step scores.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np

from ..ingest import AGE_HI, AGE_LO

N_AGES = AGE_HI - AGE_LO + 1
OLD_AGES = np.arange(AGE_LO, AGE_HI + 1)
OLD_AGES.flags.writeable = False

MIN_EXPOSURE = 1e-12  # smaller exposures must be imputed before smoothing

METHODS = ("ggm", "pspline", "pclm", "bayes-map", "bayes-mean", "bayes-median")


class FitError(RuntimeError):
    """A smoother failed to converge or hit a degenerate configuration."""

    def __init__(self, message: str, diagnostics: Mapping[str, Any] | None = None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


@dataclass(frozen=True, slots=True)
class SmoothedSeries:
    """Fitted death rates for one population-year on ages 85-109."""

    method: str
    rates: np.ndarray
    diagnostics: dict

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        rates = np.asarray(self.rates, dtype=float)
        if rates.shape != (N_AGES,):
            raise ValueError(f"expected {N_AGES} rates, got shape {rates.shape}")
        if not np.all(np.isfinite(rates)) or np.any(rates <= 0):
            raise ValueError("rates must be finite and strictly positive")
        rates.flags.writeable = False
        object.__setattr__(self, "rates", rates)

    @property
    def ages(self) -> np.ndarray:
        return OLD_AGES

    def log_rates(self) -> np.ndarray:
        return np.log(self.rates)


@dataclass(frozen=True, slots=True)
class SmoothedSurface:
    """Per-year smoothed rates for one (country, sex) and one method."""

    country: str
    sex: str
    method: str
    years: np.ndarray
    rates: np.ndarray  # shape (n_years, N_AGES)

    def __post_init__(self) -> None:
        years = np.asarray(self.years, dtype=int)
        rates = np.asarray(self.rates, dtype=float)
        if rates.shape != (len(years), N_AGES):
            raise ValueError("rates must be (n_years, 25)")
        if np.any(np.diff(years) <= 0):
            raise ValueError("years must be strictly increasing")
        for arr in (years, rates):
            arr.flags.writeable = False
        object.__setattr__(self, "years", years)
        object.__setattr__(self, "rates", rates)

    def rate_series(self, age: int) -> np.ndarray:
        """Fitted rates over years at one age."""
        if not AGE_LO <= age <= AGE_HI:
            raise ValueError(f"age {age} outside {AGE_LO}-{AGE_HI}")
        return self.rates[:, age - AGE_LO]


def check_exposures(exposures: np.ndarray) -> np.ndarray:
    exposures = np.asarray(exposures, dtype=float)
    if np.any(exposures < MIN_EXPOSURE):
        raise FitError(
            f"exposures below {MIN_EXPOSURE} present; impute zero exposures first"
        )
    return exposures
