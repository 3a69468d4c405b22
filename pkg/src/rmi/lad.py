"""Exact least-absolute-deviations (LAD) fitting for small dense designs.

The workhorse is a basis-exchange method, the classical simplex walk
specialized to the LAD problem: for a full-rank n x p design, some optimal
parameter vector interpolates p observations exactly, so the search moves
between interpolating "bases", descending along the elementary direction
that violates the subgradient optimality condition the most and pivoting
at the weighted-median step length.  Termination is certified by the
optimality condition itself (all directional derivatives nonnegative);
if the walk stalls or the basis degenerates, the problem is re-solved as
a linear program with scipy's HiGHS backend, which is slower but equally
exact.

Loss convention: ``loss`` is the raw sum of absolute residuals.  Callers
that define their objective as the tau=0.5 check loss should halve it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import qr
from scipy.optimize import linprog

_OPT_TOL = 1e-9  # slack on the unit bound of the subgradient condition
_ZERO_RESIDUAL = 1e-11  # residuals at or below this (relative) count as tied


class DegenerateDesignError(ValueError):
    """The design matrix does not have full column rank."""


@dataclass(frozen=True, slots=True)
class LADFit:
    params: np.ndarray
    loss: float
    basis: tuple[int, ...]
    iterations: int
    solver: str  # "exchange" or "linprog"


def _initial_basis(X: np.ndarray) -> np.ndarray:
    """Pick p well-conditioned rows via column-pivoted QR of X^T."""
    p = X.shape[1]
    _, r, piv = qr(X.T, pivoting=True, mode="economic")
    diag = np.abs(np.diag(r))
    scale = max(diag.max(), 1.0) if diag.size else 0.0
    if diag.size < p or diag.min() <= 1e-12 * scale:
        raise DegenerateDesignError("design matrix is rank deficient")
    return np.sort(piv[:p])


def lad_linprog(X: np.ndarray, y: np.ndarray) -> LADFit:
    """LAD fit via the standard epigraph linear program (HiGHS)."""
    n, p = X.shape
    c = np.concatenate([np.zeros(p), np.ones(2 * n)])
    a_eq = np.hstack([X, np.eye(n), -np.eye(n)])
    bounds = [(None, None)] * p + [(0.0, None)] * (2 * n)
    res = linprog(c, A_eq=a_eq, b_eq=y, bounds=bounds, method="highs")
    if not res.success:
        raise DegenerateDesignError(f"LAD linear program failed: {res.message}")
    params = res.x[:p]
    loss = float(np.sum(np.abs(y - X @ params)))
    return LADFit(params=params, loss=loss, basis=(), iterations=int(res.nit), solver="linprog")


def lad_fit(
    X: np.ndarray,
    y: np.ndarray,
    initial_basis: np.ndarray | None = None,
    max_pivots: int = 500,
) -> LADFit:
    """Minimize sum |y - X @ beta| exactly.

    ``initial_basis`` may carry the optimal basis of a nearby problem
    (warm start); it is ignored if unusable.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if n < p:
        raise DegenerateDesignError(f"need at least {p} observations, got {n}")

    basis = None
    if initial_basis is not None and len(initial_basis) == p:
        cand = np.asarray(initial_basis, dtype=int)
        if cand.min() >= 0 and cand.max() < n and len(set(cand.tolist())) == p:
            basis = cand.copy()
    if basis is None:
        basis = _initial_basis(X)

    y_scale = max(1.0, float(np.max(np.abs(y))))
    bland_after = 4 * p + 20
    in_basis = np.zeros(n, dtype=bool)

    for iteration in range(max_pivots):
        xb = X[basis]
        try:
            params = np.linalg.solve(xb, y[basis])
            # rows of U are x_i^T Xb^{-1}; U[basis] == I
            u = np.linalg.solve(xb.T, X.T).T
        except np.linalg.LinAlgError:
            if iteration == 0 and initial_basis is not None:
                basis = _initial_basis(X)
                continue
            return lad_linprog(X, y)

        in_basis[:] = False
        in_basis[basis] = True
        r = y - X @ params
        tied = np.abs(r) <= _ZERO_RESIDUAL * y_scale
        signs = np.sign(r)
        signs[tied | in_basis] = 0.0

        g = signs @ u
        off_basis_tied = tied & ~in_basis
        extra = np.abs(u[off_basis_tied]).sum(axis=0) if off_basis_tied.any() else 0.0
        violation = np.abs(g) - 1.0 - extra

        if np.all(violation <= _OPT_TOL):
            loss = float(np.sum(np.abs(r)))
            return LADFit(
                params=params,
                loss=loss,
                basis=tuple(int(b) for b in basis),
                iterations=iteration,
                solver="exchange",
            )

        if iteration < bland_after:
            j = int(np.argmax(violation))
        else:  # Bland's rule against cycling on heavily tied data
            j = int(np.flatnonzero(violation > _OPT_TOL)[0])
        sigma = 1.0 if g[j] > 0 else -1.0
        direction = sigma * u[:, j]  # u_i = x_i^T d along the move

        # Walk until the directional derivative of sum|r - eps*u| turns
        # nonnegative; each crossed residual flips its sign contribution.
        start_slope = 1.0 - abs(g[j]) + (
            float(np.abs(direction[off_basis_tied]).sum()) if off_basis_tied.any() else 0.0
        )
        movable = (~tied) & (~in_basis) & (direction * r > 0) & (np.abs(direction) > 1e-13)
        candidates = np.flatnonzero(movable)
        if candidates.size == 0:
            return lad_linprog(X, y)
        steps = r[candidates] / direction[candidates]
        order = np.argsort(steps, kind="stable")
        slope = start_slope
        entering = -1
        for idx in order:
            i = candidates[idx]
            slope += 2.0 * abs(direction[i])
            if slope >= 0.0:
                entering = int(i)
                break
        if entering < 0:
            return lad_linprog(X, y)
        basis = basis.copy()
        basis[j] = entering

    return lad_linprog(X, y)
