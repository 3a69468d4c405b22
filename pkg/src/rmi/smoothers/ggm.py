"""Parametric old-age hazard: Gompertz aging with gamma frailty and a
constant background term.

The population hazard is

    mu(x) = alpha * exp(beta x) / (1 + (gamma alpha / beta)(exp(beta x) - 1)) + c

with alpha, beta > 0 and c, gamma >= 0.  gamma is the variance of a
unit-mean gamma multiplier on individual hazards; gamma > 0 bends the
exponential increase toward a plateau at beta/gamma + c, gamma = 0
recovers Gompertz-Makeham.  Death counts are treated as Poisson with
mean E_x * mu(x), and the log-likelihood

    sum_x D_x ln mu(x) - E_x mu(x)

is maximized over ages 85-109 by a derivative-free simplex search in an
unconstrained parameterization (log for alpha, beta; softplus for c,
gamma), restarted from five deterministic rate-of-aging starting points.

Ages enter the likelihood as x = age - 85, so alpha is the baseline
hazard at 85; extrapolating the reported parameters to age 0 is not
meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from ..ingest import AGE_HI, AGE_LO, MortalitySeries
from .base import FitError, SmoothedSeries, check_exposures

AGE_ORIGIN = AGE_LO

BETA_STARTS = (0.08, 0.10, 0.12, 0.14, 0.16)
RELATIVE_GAIN_TOL = 1e-10
MAX_RESTARTS = 8

_SOFTPLUS_LINEAR = 30.0  # softplus(t) ~ t beyond this


@dataclass(frozen=True, slots=True)
class GGMParams:
    """Hazard parameters; alpha is the baseline at the age origin (85)."""

    alpha: float
    beta: float
    c: float
    gamma: float

    def __post_init__(self) -> None:
        values = (self.alpha, self.beta, self.c, self.gamma)
        if not all(np.isfinite(v) for v in values):
            raise ValueError("parameters must be finite")
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be positive")
        if self.c < 0 or self.gamma < 0:
            raise ValueError("c and gamma must be nonnegative")


def _softplus(t: float) -> float:
    if t > _SOFTPLUS_LINEAR:
        return t
    return float(np.log1p(np.exp(t)))


def _softplus_inv(v: float) -> float:
    if v > _SOFTPLUS_LINEAR:
        return v
    if v <= 0:
        return -745.0  # softplus underflows to 0 here
    return float(np.log(np.expm1(v)))


def _unpack(theta: np.ndarray) -> GGMParams:
    return GGMParams(
        alpha=float(np.exp(theta[0])),
        beta=float(np.exp(theta[1])),
        c=_softplus(float(theta[2])),
        gamma=_softplus(float(theta[3])),
    )


def _pack(p: GGMParams) -> np.ndarray:
    return np.array(
        [np.log(p.alpha), np.log(p.beta), _softplus_inv(p.c), _softplus_inv(p.gamma)]
    )


def ggm_hazard(params: GGMParams, x) -> np.ndarray | float:
    """Hazard at x years past the age origin (vectorized over x).

    Evaluated as alpha / (exp(-beta x) + (gamma alpha/beta)(1 - exp(-beta x))) + c,
    which stays finite for any gamma > 0 however large beta*x gets and
    exposes the plateau beta/gamma + c directly.
    """
    x = np.asarray(x, dtype=float)
    emz = np.exp(-params.beta * x)
    frail = (params.gamma * params.alpha / params.beta) * (1.0 - emz)
    out = params.alpha / (emz + frail) + params.c
    return float(out) if out.ndim == 0 else out


def ggm_loglik(
    params: GGMParams, deaths: np.ndarray, exposures: np.ndarray
) -> float:
    """Poisson log-likelihood over the 25 old ages (x = age - 85)."""
    deaths = np.asarray(deaths, dtype=float)
    exposures = np.asarray(exposures, dtype=float)
    if deaths.shape != exposures.shape:
        raise ValueError("deaths and exposures must align")
    x = np.arange(len(deaths), dtype=float)
    mu = np.asarray(ggm_hazard(params, x))
    mu = np.clip(mu, 1e-300, 1e300)
    terms = np.where(deaths > 0, deaths * np.log(mu), 0.0)
    return float(np.sum(terms - exposures * mu))


def _polish(nll, theta0: np.ndarray) -> tuple[np.ndarray, float, int, bool]:
    """Simplex search restarted until successive gains fall below tolerance."""
    theta = theta0
    best = nll(theta)
    nfev = 0
    for _ in range(MAX_RESTARTS):
        res = minimize(
            nll,
            theta,
            method="Nelder-Mead",
            options={
                "maxiter": 2000,
                "xatol": 1e-10,
                "fatol": max(1e-12, 1e-11 * abs(best)),
            },
        )
        nfev += res.nfev
        gain = best - res.fun  # nll decreases
        theta, prev_best, best = res.x, best, min(best, float(res.fun))
        if gain < RELATIVE_GAIN_TOL * max(1.0, abs(prev_best)):
            return theta, best, nfev, True
    return theta, best, nfev, False


def fit_ggm(series: MortalitySeries) -> tuple[GGMParams, SmoothedSeries]:
    """Maximum-likelihood fit; returns the parameters and the fitted rates.

    Five simplex runs start from beta in {0.08, ..., 0.16}; each run is
    restarted until the relative log-likelihood gain drops below 1e-10.
    Boundary solutions (c or gamma numerically zero) are accepted.  If no
    start converges, a FitError carrying the best attempt is raised.
    """
    deaths = series.old_age_deaths()
    exposures = check_exposures(series.old_age_exposures())
    return fit_ggm_arrays(deaths, exposures)


def fit_ggm_arrays(
    deaths: np.ndarray, exposures: np.ndarray
) -> tuple[GGMParams, SmoothedSeries]:
    deaths = np.asarray(deaths, dtype=float)
    exposures = check_exposures(exposures)
    x = np.arange(len(deaths), dtype=float)

    def nll(theta: np.ndarray) -> float:
        return -ggm_loglik(_unpack(theta), deaths, exposures)

    # baseline start: observed rate at the first ages, floored away from 0
    crude = np.sum(deaths[:3]) / np.sum(exposures[:3])
    alpha0 = max(float(crude), 1e-6)

    best_theta = None
    best_val = np.inf
    converged_any = False
    total_nfev = 0
    for beta0 in BETA_STARTS:
        theta0 = np.array(
            [np.log(alpha0), np.log(beta0), _softplus_inv(1e-4), _softplus_inv(0.1)]
        )
        theta, val, nfev, converged = _polish(nll, theta0)
        total_nfev += nfev
        converged_any = converged_any or converged
        if val < best_val:
            best_val, best_theta = val, theta

    if best_theta is None or not np.isfinite(best_val):
        raise FitError("hazard fit failed from every start")
    params = _unpack(best_theta)
    if not converged_any:
        raise FitError(
            "hazard fit did not converge from any start",
            {
                "best_loglik": -best_val,
                "params": params,
                "nfev": total_nfev,
            },
        )

    rates = np.asarray(ggm_hazard(params, x))
    smoothed = SmoothedSeries(
        method="ggm",
        rates=rates,
        diagnostics={
            "loglik": -best_val,
            "alpha": params.alpha,
            "beta": params.beta,
            "c": params.c,
            "gamma": params.gamma,
            "age_origin": AGE_ORIGIN,
            "nfev": total_nfev,
        },
    )
    return params, smoothed


def transformed_loglik_gradient(
    params: GGMParams,
    deaths: np.ndarray,
    exposures: np.ndarray,
    rel_step: float = 1e-6,
) -> np.ndarray:
    """Central-difference log-likelihood gradient in the unconstrained
    coordinates the optimizer works in (log alpha, log beta, softplus
    preimages of c and gamma)."""
    theta = _pack(params)
    grad = np.zeros_like(theta)
    for i in range(len(theta)):
        h = rel_step * max(1.0, abs(theta[i]))
        up, dn = theta.copy(), theta.copy()
        up[i] += h
        dn[i] -= h
        grad[i] = (
            ggm_loglik(_unpack(up), deaths, exposures)
            - ggm_loglik(_unpack(dn), deaths, exposures)
        ) / (2 * h)
    return grad
