"""Penalized Poisson fitting shared by the spline smoother and the
count-ungrouping smoother.

Model: observed counts y_i ~ Poisson(mu_i) with mu = C @ exp(X b + o),
where C aggregates latent cells into observed bins (the identity when the
data are already at the target resolution), X is the latent design, o a
fixed offset, and b carries a second-order difference penalty lam*||D b||^2.

Fitting is iteratively reweighted least squares on the composite working
design, with step halving so the penalized deviance never increases from
one iteration to the next (the per-iteration history is part of the
result).  The smoothing weight is chosen by BIC over a log-spaced grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import FitError

LAMBDA_GRID = np.logspace(-4.0, 4.0, 41)
MAX_ITER = 200
REL_TOL = 1e-10
MAX_HALVINGS = 30


def difference_matrix(n_coefs: int, order: int = 2) -> np.ndarray:
    """Finite-difference operator of the given order, shape (n-order, n)."""
    d = np.eye(n_coefs)
    for _ in range(order):
        d = np.diff(d, axis=0)
    return d


def poisson_deviance(y: np.ndarray, mu: np.ndarray) -> float:
    """2 * sum[ y log(y/mu) - (y - mu) ], with 0 log 0 = 0."""
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(y > 0, y * np.log(y / mu), 0.0)
    return float(2.0 * np.sum(ratio - (y - mu)))


@dataclass(frozen=True, slots=True)
class PIRLSFit:
    coefs: np.ndarray
    eta: np.ndarray  # latent log scale, X @ coefs + offset
    latent: np.ndarray  # exp(eta)
    fitted: np.ndarray  # C @ latent, per observed bin
    deviance: float
    penalty: float
    edf: float
    bic: float
    lam: float
    iterations: int
    pen_dev_history: tuple[float, ...]


def _initial_coefs(
    y: np.ndarray,
    comp: np.ndarray,
    design: np.ndarray,
    offset: np.ndarray,
    pen: np.ndarray,
) -> np.ndarray:
    # Spread each bin's count uniformly over its latent cells, then do a
    # lightly ridged least-squares fit of the latent log counts.
    widths = comp.sum(axis=1)
    per_cell = comp.T @ (y / np.maximum(widths, 1.0))
    eta0 = np.log(per_cell + 0.5)
    a = design.T @ design + 1e-6 * (pen + np.eye(design.shape[1]))
    b = design.T @ (eta0 - offset)
    return np.linalg.solve(a, b)


def pirls(
    y: np.ndarray,
    lam: float,
    comp: np.ndarray | None = None,
    design: np.ndarray | None = None,
    offset: np.ndarray | None = None,
    penalty_order: int = 2,
) -> PIRLSFit:
    """Fit one penalized Poisson model at a fixed smoothing weight."""
    y = np.asarray(y, dtype=float)
    n_obs = len(y)
    if comp is None:
        comp = np.eye(n_obs)
    n_latent = comp.shape[1]
    if design is None:
        design = np.eye(n_latent)
    if offset is None:
        offset = np.zeros(n_latent)
    n_coefs = design.shape[1]
    dmat = difference_matrix(n_coefs, penalty_order)
    pen = lam * (dmat.T @ dmat)

    coefs = _initial_coefs(y, comp, design, offset, dmat.T @ dmat)
    eta = design @ coefs + offset
    latent = np.exp(eta)
    mu = comp @ latent
    pen_dev = poisson_deviance(y, mu) + float(coefs @ pen @ coefs)

    history = [pen_dev]
    converged = False
    for iteration in range(1, MAX_ITER + 1):
        # working design for the composite model: rows x_i*, and response z
        work = (comp * latent) @ design / np.maximum(mu, 1e-300)[:, None]
        z = work @ coefs + (y - mu) / np.maximum(mu, 1e-300)
        w = mu
        a = work.T @ (w[:, None] * work) + pen
        b = work.T @ (w * z)
        try:
            proposal = np.linalg.solve(a, b)
        except np.linalg.LinAlgError as exc:
            raise FitError(f"singular penalized system at lam={lam:g}") from exc

        step = 1.0
        for _ in range(MAX_HALVINGS):
            cand = coefs + step * (proposal - coefs)
            eta_c = design @ cand + offset
            latent_c = np.exp(np.clip(eta_c, -700, 700))
            mu_c = comp @ latent_c
            pen_dev_c = poisson_deviance(y, mu_c) + float(cand @ pen @ cand)
            if np.isfinite(pen_dev_c) and pen_dev_c <= pen_dev + REL_TOL * (
                1.0 + abs(pen_dev)
            ):
                break
            step *= 0.5
        else:
            raise FitError(
                f"penalized deviance would not decrease at lam={lam:g}",
                {"iteration": iteration, "pen_dev": pen_dev},
            )

        moved = np.max(np.abs(cand - coefs)) if len(cand) else 0.0
        gain = pen_dev - pen_dev_c
        coefs, eta, latent, mu = cand, eta_c, latent_c, mu_c
        pen_dev = pen_dev_c
        history.append(pen_dev)
        if gain <= REL_TOL * (1.0 + abs(pen_dev)) and moved < 1e-8:
            converged = True
            break
    if not converged:
        raise FitError(
            f"IRLS did not converge in {MAX_ITER} iterations at lam={lam:g}"
        )

    # effective dimension: trace of the ridge-style hat matrix at convergence
    work = (comp * latent) @ design / np.maximum(mu, 1e-300)[:, None]
    xtwx = work.T @ (mu[:, None] * work)
    edf = float(np.trace(np.linalg.solve(xtwx + pen, xtwx)))
    deviance = poisson_deviance(y, mu)
    bic = deviance + np.log(n_obs) * edf
    return PIRLSFit(
        coefs=coefs,
        eta=eta,
        latent=latent,
        fitted=mu,
        deviance=deviance,
        penalty=float(coefs @ pen @ coefs) if lam > 0 else 0.0,
        edf=edf,
        bic=bic,
        lam=float(lam),
        iterations=len(history) - 1,
        pen_dev_history=tuple(history),
    )


def pirls_bic(
    y: np.ndarray,
    comp: np.ndarray | None = None,
    design: np.ndarray | None = None,
    offset: np.ndarray | None = None,
    grid: np.ndarray = LAMBDA_GRID,
) -> PIRLSFit:
    """Scan the smoothing-weight grid and keep the minimum-BIC fit.

    Grid points where the solver fails are skipped unless all of them
    fail; ties pick the smallest weight.
    """
    best: PIRLSFit | None = None
    last_error: FitError | None = None
    for lam in grid:
        try:
            fit = pirls(y, lam, comp=comp, design=design, offset=offset)
        except FitError as exc:
            last_error = exc
            continue
        if best is None or fit.bic < best.bic:
            best = fit
    if best is None:
        raise FitError("no smoothing weight produced a fit") from last_error
    return best
