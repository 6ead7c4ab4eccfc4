"""Damped Gauss-Newton least-squares minimizer.

Small, dependency-free Levenberg-Marquardt implementation shared by the
spectrum fit and the noise-model fit.  Residual Jacobians are taken by
central finite differences in parameter-scaled coordinates, steps are
damped with an adaptive lambda on the Marquardt-scaled normal equations,
and simple box bounds are enforced by clipping.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class LeastSquaresResult:
    x: np.ndarray
    cost: float  # sum of squared residuals
    residual: np.ndarray
    jacobian: np.ndarray  # d residual / d x at the solution (unscaled x)
    n_iter: int
    converged: bool
    at_lower: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    at_upper: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    @property
    def pinned(self) -> np.ndarray:
        return self.at_lower | self.at_upper


def _finite_cost(r) -> float:
    r = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(r)):
        return np.inf
    return float(r @ r)


def _jacobian(fun, x, scale, free, rel_step):
    """Central-difference Jacobian with respect to the unscaled parameters.

    Falls back to a one-sided difference when one side of the stencil
    produces non-finite residuals (e.g. a physics guard tripped)."""
    r0 = np.asarray(fun(x), dtype=float)
    m = r0.size
    jac = np.zeros((m, x.size))
    for j in np.flatnonzero(free):
        h = rel_step * scale[j]
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        rp = np.asarray(fun(xp), dtype=float)
        rm = np.asarray(fun(xm), dtype=float)
        ok_p = np.all(np.isfinite(rp))
        ok_m = np.all(np.isfinite(rm))
        if ok_p and ok_m:
            jac[:, j] = (rp - rm) / (2.0 * h)
        elif ok_p:
            jac[:, j] = (rp - r0) / h
        elif ok_m:
            jac[:, j] = (r0 - rm) / h
        # else: leave the column at zero; damping handles the rest
    return jac, r0


def levenberg_marquardt(
    fun,
    x0,
    *,
    bounds=None,
    x_scale=None,
    free=None,
    max_iter: int = 500,
    cost_rtol: float = 1e-12,
    diff_rel_step: float = 1e-6,
    lambda0: float = 1e-3,
    lambda_up: float = 10.0,
    lambda_down: float = 3.0,
    lambda_max: float = 1e14,
    iteration_callback=None,
) -> LeastSquaresResult:
    """Minimize sum(fun(x)**2) over x.

    Parameters
    ----------
    fun : callable
        Maps a parameter vector to a residual vector.  May return
        non-finite entries; such trial steps are rejected.
    x0 : array_like
        Starting point.
    bounds : (lo, hi) arrays or None
        Box constraints; trial points are clipped into the box.
    x_scale : array_like or None
        Characteristic magnitudes used for finite-difference steps and
        damping; defaults to max(|x0|, 1e-30) per component.
    free : boolean array or None
        Components set to False are held fixed at their starting value.
    cost_rtol : float
        Convergence when an accepted step changes the cost by less than
        this relative amount.
    iteration_callback : callable or None
        Called with the new x after every accepted step.  The residual
        function may change its internal state here (e.g. refresh a data
        mask); each iteration re-evaluates the residual from scratch, so
        step acceptance always compares costs under one consistent state.

    Returns
    -------
    LeastSquaresResult
        ``converged`` is False only when the iteration cap was reached
        while steps were still improving the cost.
    """
    x = np.asarray(x0, dtype=float).copy()
    n = x.size
    if x_scale is None:
        scale = np.where(np.abs(x) > 0, np.abs(x), 1.0)
    else:
        scale = np.asarray(x_scale, dtype=float).copy()
    free = np.ones(n, dtype=bool) if free is None else np.asarray(free, dtype=bool)
    if bounds is None:
        lo = np.full(n, -np.inf)
        hi = np.full(n, np.inf)
    else:
        lo = np.asarray(bounds[0], dtype=float)
        hi = np.asarray(bounds[1], dtype=float)
        x = np.clip(x, lo, hi)

    r = np.asarray(fun(x), dtype=float)
    cost = _finite_cost(r)
    if not np.isfinite(cost):
        raise ValueError("residuals are not finite at the starting point")

    lam = lambda0
    converged = False
    n_iter = 0
    jac = np.zeros((r.size, n))

    for n_iter in range(1, max_iter + 1):
        # Fresh residual alongside the Jacobian: the callback may have
        # changed the residual function's state after the last step.
        jac, r = _jacobian(fun, x, scale, free, diff_rel_step)
        cost = _finite_cost(r)
        idx = np.flatnonzero(free)
        js = jac[:, idx] * scale[idx]  # scaled-coordinate Jacobian
        g = js.T @ r
        a = js.T @ js
        diag = np.diag(a).copy()
        diag[diag <= 0] = 1.0

        accepted = False
        while lam <= lambda_max:
            m = a + lam * np.diag(diag)
            try:
                step_scaled = np.linalg.solve(m, -g)
            except np.linalg.LinAlgError:
                step_scaled, *_ = np.linalg.lstsq(m, -g, rcond=None)
            x_new = x.copy()
            x_new[idx] += step_scaled * scale[idx]
            np.clip(x_new, lo, hi, out=x_new)
            r_new = np.asarray(fun(x_new), dtype=float)
            cost_new = _finite_cost(r_new)
            if cost_new < cost:
                accepted = True
                lam = max(lam / lambda_down, 1e-12)
                improvement = cost - cost_new
                x, r, cost = x_new, r_new, cost_new
                if iteration_callback is not None:
                    iteration_callback(x)
                if improvement <= cost_rtol * max(cost, 1e-300):
                    converged = True
                break
            lam *= lambda_up
        if not accepted:
            # Damping exhausted without improvement: at a (possibly bounded)
            # local minimum to within machine precision.
            converged = True
            break
        if converged:
            break

    at_lower = free & np.isfinite(lo) & (x <= lo)
    at_upper = free & np.isfinite(hi) & (x >= hi)
    return LeastSquaresResult(
        x=x,
        cost=cost,
        residual=r,
        jacobian=jac,
        n_iter=n_iter,
        converged=converged,
        at_lower=at_lower,
        at_upper=at_upper,
    )


def covariance_from_jacobian(jacobian, residual, n_free=None):
    """Parameter covariance sigma^2 (J^T J)^+ from the final Jacobian.

    The residual variance sigma^2 is estimated from the sum of squared
    residuals over the effective degrees of freedom.  Uses a pseudo-inverse
    so rank-deficient (degenerate) problems yield large but finite entries.
    """
    jac = np.asarray(jacobian, dtype=float)
    r = np.asarray(residual, dtype=float)
    m = r.size
    p = jac.shape[1] if n_free is None else n_free
    dof = max(m - p, 1)
    sigma_sq = float(r @ r) / dof
    jtj = jac.T @ jac
    return sigma_sq * np.linalg.pinv(jtj)
