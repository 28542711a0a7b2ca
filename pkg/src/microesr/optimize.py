"""Damped least squares (Levenberg-Marquardt) with a numerical Jacobian.

Deliberately small and deterministic: forward-difference Jacobian with a
relative step, multiplicative damping on the normal equations, optional box
bounds enforced by clipping trial steps. Convergence is declared when an
accepted step changes the cost by less than a relative tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["LeastSquaresResult", "damped_least_squares"]


@dataclass
class LeastSquaresResult:
    x: np.ndarray
    cost: float
    residuals: np.ndarray
    covariance: np.ndarray
    n_iter: int
    converged: bool
    message: str
    degenerate: bool = False
    history: list = field(default_factory=list)

    @property
    def residual_rms(self) -> float:
        return float(np.sqrt(np.mean(self.residuals**2)))


def _jacobian(fun, x, r0, rel_step):
    m, n = r0.size, x.size
    jac = np.empty((m, n))
    for k in range(n):
        step = rel_step * max(abs(x[k]), 1.0)
        xk = x.copy()
        xk[k] += step
        jac[:, k] = (fun(xk) - r0) / step
    return jac


def _clip(x, bounds):
    if bounds is None:
        return x
    lo, hi = bounds
    return np.clip(x, lo, hi)


def damped_least_squares(
    fun,
    x0,
    bounds=None,
    max_iter: int = 500,
    rel_step: float = 1e-6,
    cost_rtol: float = 1e-10,
    lambda0: float = 1e-3,
) -> LeastSquaresResult:
    """Minimize ``sum(fun(x)**2)`` starting from x0.

    `fun` maps an (n,) parameter vector to an (m,) residual vector. `bounds`
    is an optional (lower, upper) pair of arrays (use +/-inf for free
    parameters). Hitting `max_iter` reports the best-so-far solution with
    ``converged=False`` instead of raising.
    """
    x = _clip(np.asarray(x0, dtype=float).copy(), bounds)
    r = np.asarray(fun(x), dtype=float)
    cost = float(r @ r)
    lam = lambda0
    converged = False
    message = "iteration cap reached"
    n_iter = 0
    jac = _jacobian(fun, x, r, rel_step)

    for n_iter in range(1, max_iter + 1):
        jtj = jac.T @ jac
        jtr = jac.T @ r
        diag = np.diag(jtj).copy()
        diag[diag <= 0] = 1.0

        improved = False
        for _ in range(25):
            try:
                delta = np.linalg.solve(jtj + lam * np.diag(diag), -jtr)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            x_new = _clip(x + delta, bounds)
            if not np.all(np.isfinite(x_new)) or np.allclose(x_new, x):
                lam *= 10
                continue
            r_new = np.asarray(fun(x_new), dtype=float)
            cost_new = float(r_new @ r_new)
            if np.isfinite(cost_new) and cost_new < cost:
                improved = True
                break
            lam *= 10
        if not improved:
            converged = True
            message = "no descent direction (damping exhausted)"
            break

        rel_change = (cost - cost_new) / max(cost, 1e-300)
        x, r, cost = x_new, r_new, cost_new
        lam = max(lam / 3.0, 1e-12)
        if rel_change < cost_rtol:
            converged = True
            message = "relative cost change below tolerance"
            break
        jac = _jacobian(fun, x, r, rel_step)

    covariance, degenerate = _covariance(jac, r, x.size, cost)
    return LeastSquaresResult(
        x=x,
        cost=cost,
        residuals=r,
        covariance=covariance,
        n_iter=n_iter,
        converged=converged,
        message=message,
        degenerate=degenerate,
    )


def _covariance(jac, r, n_params, cost):
    """Parameter covariance from the final Jacobian; flags near-singular fits."""
    m = r.size
    dof = max(m - n_params, 1)
    sigma2 = cost / dof
    jtj = jac.T @ jac
    degenerate = False
    try:
        cond = np.linalg.cond(jtj)
        if not np.isfinite(cond) or cond > 1e12:
            degenerate = True
        cov = sigma2 * np.linalg.pinv(jtj, hermitian=True)
    except np.linalg.LinAlgError:
        degenerate = True
        cov = np.full((n_params, n_params), np.nan)
    # Symmetrize against floating-point drift.
    cov = 0.5 * (cov + cov.T)
    return cov, degenerate
