"""Bounded damped Gauss-Newton (Levenberg-Marquardt) least squares.

Bounds are handled by a change of variables (sine transform for two-sided
bounds, square-root transform for one-sided), so the inner iteration is
unconstrained.  The covariance is computed in the original parameters
from the Jacobian at the solution, scaled by the residual variance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import SingularFitError

MAX_ITER = 200
XTOL = 1e-10
FTOL = 1e-12
MAX_CONDITION = 1e12
_FD_STEP = 6e-6  # ~ eps ** (1/3), central differences


class _Transform:
    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, float)
        self.hi = np.asarray(hi, float)
        self.two = np.isfinite(self.lo) & np.isfinite(self.hi)
        self.low = np.isfinite(self.lo) & ~np.isfinite(self.hi)
        self.up = ~np.isfinite(self.lo) & np.isfinite(self.hi)

    def to_external(self, z):
        p = z.copy()
        t, lo, hi = self.two, self.lo, self.hi
        p[t] = lo[t] + (hi[t] - lo[t]) * (np.sin(z[t]) + 1.0) / 2.0
        p[self.low] = lo[self.low] - 1.0 + np.sqrt(z[self.low] ** 2 + 1.0)
        p[self.up] = hi[self.up] + 1.0 - np.sqrt(z[self.up] ** 2 + 1.0)
        return p

    def to_internal(self, p):
        z = p.astype(float).copy()
        t, lo, hi = self.two, self.lo, self.hi
        with np.errstate(invalid="ignore", divide="ignore"):
            s = np.clip(2.0 * (p[t] - lo[t]) / (hi[t] - lo[t]) - 1.0, -1.0, 1.0)
        z[t] = np.where(hi[t] > lo[t], np.arcsin(s), 0.0)
        z[self.low] = np.sqrt((p[self.low] - lo[self.low] + 1.0) ** 2 - 1.0)
        z[self.up] = np.sqrt((hi[self.up] - p[self.up] + 1.0) ** 2 - 1.0)
        return z

    def derivative(self, z):
        d = np.ones_like(z)
        t, lo, hi = self.two, self.lo, self.hi
        d[t] = (hi[t] - lo[t]) * np.cos(z[t]) / 2.0
        d[self.low] = z[self.low] / np.sqrt(z[self.low] ** 2 + 1.0)
        d[self.up] = -z[self.up] / np.sqrt(z[self.up] ** 2 + 1.0)
        return d


@dataclass
class LsqResult:
    params: np.ndarray
    covariance: np.ndarray
    residuals: np.ndarray
    iterations: int
    cost: float
    converged: bool
    message: str
    active_bounds: list = field(default_factory=list)
    cost_history: list = field(default_factory=list)
    condition: float = float("nan")

    @property
    def stderr(self):
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))


def finite_difference_jacobian(fun, p, scale=None, step=_FD_STEP):
    """Central-difference Jacobian of ``fun(p)`` (vector output) w.r.t. `p`."""
    p = np.asarray(p, float)
    scale = np.ones_like(p) if scale is None else np.asarray(scale, float)
    cols = []
    for j in range(p.size):
        h = step * max(abs(p[j]), scale[j])
        up, dn = p.copy(), p.copy()
        up[j] += h
        dn[j] -= h
        cols.append((np.asarray(fun(up)) - np.asarray(fun(dn))) / (2 * h))
    return np.column_stack(cols)


def covariance_from_jacobian(jac, residuals, dof=None):
    """Gauss-Markov covariance ``s^2 (J^T J)^-1`` with column scaling.

    `jac` and `residuals` are already weighted.  Raises
    :class:`SingularFitError` when the scaled Jacobian condition number
    exceeds ``MAX_CONDITION``.
    """
    jac = np.asarray(jac, float)
    n, m = jac.shape
    dof = n - m if dof is None else dof
    norms = np.linalg.norm(jac, axis=0)
    if np.any(norms == 0):
        raise SingularFitError("parameter with no influence on the model", float("inf"))
    _, s, vt = np.linalg.svd(jac / norms, full_matrices=False)
    cond = s[0] / s[-1] if s[-1] > 0 else float("inf")
    if cond > MAX_CONDITION:
        raise SingularFitError("singular normal equations", cond)
    inv = (vt.T / s**2) @ vt
    s2 = float(residuals @ residuals) / dof if dof > 0 else float("nan")
    return s2 * inv / np.outer(norms, norms), cond


def least_squares(model_fn, params0, bounds=None, data=None, jac=None, x_scale=None,
                  max_iter=MAX_ITER, xtol=XTOL, ftol=FTOL):
    """Minimize ``sum(((y - model_fn(x, p)) / sigma)**2)``.

    Parameters
    ----------
    model_fn : callable ``(x, p) -> array``
    params0 : initial parameters, inside `bounds`
    bounds : ``(lo, hi)`` arrays, ``+-inf`` for open sides; None for unbounded
    data : ``(x, y)`` or ``(x, y, sigma)``
    jac : optional callable ``(x, p) -> (n, m)`` model derivatives; central
        differences otherwise
    x_scale : typical parameter magnitudes used for difference steps

    Returns
    -------
    LsqResult
        Non-convergence within `max_iter` is reported with
        ``converged=False`` and the last iterate.
    """
    x, y, *rest = data
    y = np.asarray(y, float)
    sigma = np.asarray(rest[0], float) if rest else np.ones_like(y)
    p0 = np.asarray(params0, float)
    m = p0.size
    if not np.all(np.isfinite(p0)):
        raise ValueError("initial parameters must be finite")
    lo, hi = (np.full(m, -np.inf), np.full(m, np.inf)) if bounds is None else bounds
    lo = np.broadcast_to(np.asarray(lo, float), (m,)).copy()
    hi = np.broadcast_to(np.asarray(hi, float), (m,)).copy()
    if np.any(p0 < lo) or np.any(p0 > hi):
        raise ValueError("initial parameters outside bounds")
    scale = np.maximum(np.abs(p0), 1e-12) if x_scale is None else np.asarray(x_scale, float)
    tr = _Transform(lo, hi)

    def resid(z):
        return (y - model_fn(x, tr.to_external(z))) / sigma

    def model_jac(p):
        if jac is not None:
            return np.asarray(jac(x, p), float)
        return finite_difference_jacobian(lambda q: model_fn(x, q), p, scale)

    def rjac(z):
        # d resid / dz
        return -model_jac(tr.to_external(z)) * tr.derivative(z) / sigma[:, None]

    z = tr.to_internal(p0)
    r = resid(z)
    cost = 0.5 * float(r @ r)
    history = [cost]
    J = rjac(z)
    mu = 0.0
    nu = 2.0
    converged = False
    message = "iteration cap reached"
    it = 0
    while it < max_iter:
        if cost == 0.0:
            converged, message = True, "zero residual"
            break
        it += 1
        A = J.T @ J
        g = J.T @ r
        diag = np.maximum(np.diag(A), 1e-300)
        try:
            delta = np.linalg.solve(A + mu * np.diag(diag), -g)
        except np.linalg.LinAlgError:
            delta = np.linalg.lstsq(A + mu * np.diag(diag), -g, rcond=None)[0]
        small_step = np.linalg.norm(delta) <= xtol * (np.linalg.norm(z) + xtol)
        z_new = z + delta
        r_new = resid(z_new)
        cost_new = 0.5 * float(r_new @ r_new) if np.all(np.isfinite(r_new)) else np.inf
        predicted = cost - 0.5 * float(np.sum((r + J @ delta) ** 2))
        if cost_new < cost:
            rho = (cost - cost_new) / predicted if predicted > 0 else 1.0
            small_cost = (cost - cost_new) <= ftol * cost
            z, r, cost = z_new, r_new, cost_new
            history.append(cost)
            mu *= max(1.0 / 3.0, 1.0 - (2.0 * rho - 1.0) ** 3)
            nu = 2.0
            if small_step or small_cost:
                converged, message = True, "converged"
                break
            J = rjac(z)
        else:
            if small_step:
                converged, message = True, "converged (no further decrease)"
                break
            mu = 1e-3 if mu == 0.0 else mu * nu
            nu *= 2.0
            if mu > 1e32:
                converged, message = True, "converged (stationary point)"
                break

    p = tr.to_external(z)
    width = np.where(np.isfinite(hi - lo), hi - lo, np.inf)
    tol = 1e-6 * np.where(np.isfinite(width), width, np.maximum(np.abs(p), 1.0))
    active = [j for j in range(m) if (np.isfinite(lo[j]) and p[j] - lo[j] <= tol[j])
              or (np.isfinite(hi[j]) and hi[j] - p[j] <= tol[j])]
    Jp = model_jac(p) / sigma[:, None]
    cov, cond = covariance_from_jacobian(Jp, r)
    return LsqResult(p, cov, r, it, cost, converged, message, active, history, cond)
