"""Two-step noise-curve fits: asymptotes first, then the full source law.

Every model is ``y = G (N_in(V) + N + fixed(V))`` with ``N_in`` summed over
the modes the source illuminates (signal only, or signal and idler).
For the saturated model the outputs are first divided by ``lambda(V)`` and
``fixed(V) = (N2/G1) / lambda(V)``; otherwise ``fixed = 0``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import (BoundActiveWarning, InsufficientDataError, NoiseCalError,
                      NonlinearityWarning, SingularFitError)
from ..quanta import E_CHARGE, H, K_B, VACUUM
from ..sources import johnson_noise, sntj_noise, sntj_noise_gradient
from .lsq import covariance_from_jacobian, least_squares

MODEL_KINDS = ("single_input", "two_input", "two_input_saturated", "ps_quadrature")
SLOPE_TOLERANCE = 0.2
MIN_WINDOW_POINTS = 6


@dataclass(frozen=True)
class FitModel:
    """Which model to fit and which parameters are held fixed.

    ``t_e`` fixes the electron temperature (None leaves it free, starting
    from ``t_e_guess``).  ``v_offs`` fixes the bias offset.  ``n2_over_g1``
    is the fixed ``N2/G1`` term of the saturated model.  ``noise_guess``
    is the conventional starting value for the noise parameter; it is
    reported but the asymptotic step is solved in closed form.
    """

    kind: str = "single_input"
    t_e: float | None = None
    t_e_guess: float = 0.05
    v_offs: float | None = None
    n2_over_g1: float | None = None
    noise_guess: float = 0.0
    idler_frequency: float | None = None
    asymptote_factor: float = 10.0
    bound_fraction: float = 0.5
    noise_bound_floor: float = 0.5
    weighting: str = "relative"

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; expected one of {MODEL_KINDS}")
        if self.kind == "two_input_saturated" and self.n2_over_g1 is None:
            raise ValueError("two_input_saturated needs n2_over_g1")
        if self.t_e is not None and self.t_e < 0:
            raise ValueError("t_e must be >= 0")
        if self.weighting not in ("relative", "uniform"):
            raise ValueError("weighting must be 'relative' or 'uniform'")
        if not 0 < self.bound_fraction < 1:
            raise ValueError("bound_fraction must be in (0, 1)")

    # presets following the usual practice for each first amplifier
    @classmethod
    def hemt(cls, **kw):
        return cls(kind="single_input", noise_guess=50.0, **kw)

    @classmethod
    def jtwpa(cls, t_e, **kw):
        return cls(kind="two_input", t_e=t_e, noise_guess=2.0, **kw)

    @classmethod
    def jpa(cls, t_e, **kw):
        return cls(kind="two_input", t_e=t_e, noise_guess=0.0, **kw)

    @property
    def two_mode(self):
        return self.kind in ("two_input", "two_input_saturated")

    def mode_frequencies(self, f):
        if not self.two_mode:
            return (f,)
        return (f, f if self.idler_frequency is None else self.idler_frequency)


@dataclass
class FitResult:
    kind: str
    frequency: float
    g_sys: float
    noise: float
    v_offs: float
    t_e: float | None
    stderr: dict
    residuals: np.ndarray
    setpoints: np.ndarray
    window: dict
    n2_over_g1: float = 0.0
    stage: str = "full"
    converged: bool = True
    iterations: int = 0
    active_bounds: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    fixed: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_sys(self):
        """System-added noise implied by the model kind."""
        if self.kind in ("single_input", "ps_quadrature"):
            return self.noise
        if self.kind == "two_input":
            return VACUUM + self.noise
        return VACUUM + self.noise + self.n2_over_g1

    @property
    def residual_autocorrelation(self):
        return lag1_autocorrelation(self.residuals)

    def to_dict(self):
        def num(x):
            return None if x is None else float(x)

        return {
            "kind": self.kind,
            "stage": self.stage,
            "frequency_hz": float(self.frequency),
            "g_sys": float(self.g_sys),
            "noise": float(self.noise),
            "n_sys": float(self.n_sys),
            "v_offs": float(self.v_offs),
            "t_e": num(self.t_e),
            "n2_over_g1": float(self.n2_over_g1),
            "stderr": {k: float(v) for k, v in sorted(self.stderr.items())},
            "fixed": sorted(self.fixed),
            "window": {k: (float(v) if isinstance(v, (float, np.floating)) else v)
                       for k, v in self.window.items()},
            "n_points": int(self.residuals.size),
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "active_bounds": list(self.active_bounds),
            "warnings": list(self.warnings),
            "residual_rms": float(np.sqrt(np.mean(self.residuals**2))) if self.residuals.size else 0.0,
            "residual_autocorrelation": float(self.residual_autocorrelation),
            "diagnostics": {k: float(v) for k, v in sorted(self.diagnostics.items())},
        }


def lag1_autocorrelation(residuals):
    """Lag-one autocorrelation of residuals in setpoint order (0 for flat residuals)."""
    r = np.asarray(residuals, float)
    if r.size < 2:
        return 0.0
    r = r - r.mean()
    den = float(r @ r)
    return 0.0 if den == 0 else float(r[:-1] @ r[1:] / den)


# -- forward model ------------------------------------------------------------

def _prepared(curve, model):
    """Outputs and fixed term after the optional compression correction."""
    y = curve.outputs
    fixed = np.zeros_like(y)
    if model.kind == "two_input_saturated":
        if curve.lambda_curve is None:
            raise NoiseCalError("saturated model needs a compression curve on the data")
        lam = np.asarray(curve.lambda_curve(curve.setpoints), float)
        y = y / lam
        fixed = model.n2_over_g1 / lam
    return y, fixed


def source_input(curve, model, v_offs=0.0, t_e=0.0):
    """Total source input over the model's modes."""
    x = curve.setpoints
    total = np.zeros_like(x)
    for fm in model.mode_frequencies(curve.frequency):
        if curve.source_kind == "sntj":
            total = total + sntj_noise(x - v_offs, t_e, fm)
        else:
            total = total + johnson_noise(x, fm)
    return total


def source_input_gradient(curve, model, v_offs, t_e):
    """``(d N_in / d V_offs, d N_in / d T_e)`` summed over modes (SNTJ only)."""
    x = curve.setpoints
    dv = np.zeros_like(x)
    dt = np.zeros_like(x)
    for fm in model.mode_frequencies(curve.frequency):
        gv, gt = sntj_noise_gradient(x - v_offs, t_e, fm)
        dv -= gv
        dt += gt
    return dv, dt


def model_output(curve, model, g_sys, noise, v_offs=0.0, t_e=0.0):
    """Model of the (compression-corrected) outputs."""
    _, fixed = _prepared(curve, model)
    return g_sys * (source_input(curve, model, v_offs, t_e) + noise + fixed)


def model_jacobian(curve, model, g_sys, noise, v_offs=0.0, t_e=0.0):
    """Columns ``d y / d (g_sys, noise, t_e, v_offs)`` of :func:`model_output`."""
    _, fixed = _prepared(curve, model)
    n_in = source_input(curve, model, v_offs, t_e)
    if curve.source_kind == "sntj":
        dv, dt = source_input_gradient(curve, model, v_offs, t_e)
    else:
        dv = dt = np.zeros_like(n_in)
    return np.column_stack([n_in + noise + fixed, np.full_like(n_in, g_sys), g_sys * dt, g_sys * dv])


def _sigma(y, model):
    if model.weighting == "relative" and np.all(y != 0):
        return np.abs(y)
    return np.ones_like(y)


def _window_info(curve, selection, half_width=None):
    x = curve.setpoints
    return {"selection": selection, "half_width_quanta": half_width,
            "setpoint_min": float(x.min()), "setpoint_max": float(x.max()),
            "setpoint_unit": curve.setpoint_unit}


# -- step one: asymptotes ---------------------------------------------------

def fit_asymptotes(curve, model):
    """Linear fit of the high-input asymptotes.

    SNTJ curves: points with ``e|V - V0| >= factor * max(hf, k_B T_e)`` (at
    the largest mode frequency) are split in two branches, and
    ``y = G (k |V - V_offs| + N + fixed)`` with ``k = sum_m e/(2 h f_m)`` is
    solved jointly by weighted linear least squares.  VTS curves have no
    offset; the Johnson law is linear in its parameters and all points
    are used.

    Raises InsufficientDataError with fewer than two points per branch.
    """
    y, fixed = _prepared(curve, model)
    freqs = model.mode_frequencies(curve.frequency)
    t_guess = model.t_e if model.t_e is not None else model.t_e_guess
    notes = []
    diag = {}

    if curve.source_kind == "vts":
        n_j = source_input(curve, model)
        if curve.setpoints.size < 3:
            raise InsufficientDataError("need at least 3 temperature setpoints")
        cols = np.column_stack([n_j + fixed, np.ones_like(y)])
        sel = np.ones_like(y, dtype=bool)
        v_offs = 0.0
        w = 1.0 / _sigma(y, model)
        sol = np.linalg.lstsq(cols * w[:, None], y * w, rcond=None)[0]
        g = float(sol[0])
        noise = float(sol[1] / g)
        jac = np.column_stack([n_j + noise + fixed, np.full_like(y, g)])
        names = ["g_sys", "noise"]
        fixed_names = ["v_offs", "t_e"]
        t_out = None
    else:
        v0 = 0.0 if model.v_offs is None else model.v_offs
        hf = H * max(freqs)
        thresh = model.asymptote_factor * max(hf, K_B * t_guess) / E_CHARGE
        x = curve.setpoints
        pos = x - v0 >= thresh
        neg = x - v0 <= -thresh
        if pos.sum() < 2 or neg.sum() < 2:
            raise InsufficientDataError(
                f"need >= 2 points in each asymptotic branch (|V| >= {thresh:.3g} V); "
                f"have {int(pos.sum())} positive and {int(neg.sum())} negative")
        sel = pos | neg
        k = sum(E_CHARGE / (2 * H * fm) for fm in freqs)
        slopes = []
        for branch in (pos, neg):
            slopes.append(np.polyfit(x[branch], y[branch] - fixed[branch], 1)[0])
        mean_slope = 0.5 * (abs(slopes[0]) + abs(slopes[1]))
        diag["gain_guess"] = mean_slope / k
        diag["slope_positive"] = slopes[0]
        diag["slope_negative"] = slopes[1]
        if slopes[0] <= 0 or slopes[1] >= 0 or \
                abs(abs(slopes[0]) - abs(slopes[1])) > SLOPE_TOLERANCE * mean_slope:
            msg = "asymptotic branch slopes disagree by more than 20%"
            notes.append(msg)
            warnings.warn(msg, NonlinearityWarning, stacklevel=2)

        xs, ys, fs = x[sel], y[sel], fixed[sel]
        s = np.sign(xs - v0)
        w = 1.0 / _sigma(ys, model)
        if model.v_offs is None:
            cols = np.column_stack([k * s * xs + fs, -k * s, np.ones_like(xs)])
            sol = np.linalg.lstsq(cols * w[:, None], ys * w, rcond=None)[0]
            g = float(sol[0])
            v_offs = float(sol[1] / g)
            noise = float(sol[2] / g)
        else:
            cols = np.column_stack([k * s * (xs - v0) + fs, np.ones_like(xs)])
            sol = np.linalg.lstsq(cols * w[:, None], ys * w, rcond=None)[0]
            g = float(sol[0])
            v_offs = v0
            noise = float(sol[1] / g)
        jcols = [k * np.abs(xs - v_offs) + noise + fs, np.full_like(xs, g)]
        names = ["g_sys", "noise"]
        if model.v_offs is None:
            jcols.append(-g * k * s)
            names.append("v_offs")
        jac = np.column_stack(jcols)
        fixed_names = ["t_e"] + (["v_offs"] if model.v_offs is not None else [])
        t_out = t_guess
        y, fixed = ys, fs

    if not g > 0:
        raise NoiseCalError("asymptotic fit produced a non-positive gain")
    xs_fit = curve.setpoints[sel]
    if curve.source_kind == "vts":
        pred = g * (n_j + noise + fixed)
    else:
        pred = g * (k * np.abs(xs_fit - v_offs) + noise + fixed)
    resid = y - pred
    w = 1.0 / _sigma(y, model)
    try:
        cov, _ = covariance_from_jacobian(jac * w[:, None], resid * w)
        se = np.sqrt(np.clip(np.diag(cov), 0, None))
        stderr = dict(zip(names, map(float, se)))
    except SingularFitError as exc:
        stderr = {n: float("nan") for n in names}
        notes.append(str(exc))
    if curve.source_kind == "vts":
        stderr["v_offs"] = 0.0
    diag["noise_guess"] = model.noise_guess
    diag["threshold_factor"] = model.asymptote_factor
    return FitResult(model.kind, curve.frequency, g, noise, v_offs, t_out, stderr, resid,
                     xs_fit, _window_info(curve.subset(sel), "asymptotes"),
                     n2_over_g1=model.n2_over_g1 or 0.0, stage="asymptotes",
                     warnings=notes, fixed=fixed_names, diagnostics=diag)


# -- step two: full law ------------------------------------------------------

def fit_full(curve, model, seed, window=None):
    """Bounded nonlinear fit of the full source law, seeded by `seed`.

    ``V_offs`` is fixed to the seed value, gain and noise may move by
    ``bound_fraction`` of their seeds (the noise half-width is at least
    ``noise_bound_floor`` quanta).  ``T_e`` is free from ``t_e_guess`` when
    ``model.t_e`` is None and the source is an SNTJ, fixed otherwise.
    """
    y, _ = _prepared(curve, model)
    if y.size < 3:
        raise InsufficientDataError("need at least 3 points for the full fit")
    bf = model.bound_fraction
    g0, n0 = seed.g_sys, seed.noise
    v_offs = seed.v_offs
    free_t = curve.source_kind == "sntj" and model.t_e is None
    t_fixed = model.t_e if model.t_e is not None else (seed.t_e or 0.0)

    half = max(bf * abs(n0), model.noise_bound_floor)
    lo = [g0 * (1 - bf), n0 - half]
    hi = [g0 * (1 + bf), n0 + half]
    p0 = [g0, n0]
    names = ["g_sys", "noise"]
    if free_t:
        t0 = seed.t_e if seed.t_e and seed.t_e > 0 else max(model.t_e_guess, 1e-3)
        lo.append(0.0)
        hi.append(np.inf)
        p0.append(t0)
        names.append("t_e")

    def unpack(p):
        return p[0], p[1], (p[2] if free_t else t_fixed)

    def fn(_, p):
        g, n, t = unpack(p)
        return model_output(curve, model, g, n, v_offs, t)

    def jac(_, p):
        g, n, t = unpack(p)
        j = model_jacobian(curve, model, g, n, v_offs, t)
        return j[:, :3] if free_t else j[:, :2]

    sigma = _sigma(y, model)
    scale = np.array([abs(g0), max(abs(n0), 1.0)] + ([max(t0, 1e-3)] if free_t else []))
    res = least_squares(fn, p0, bounds=(lo, hi), data=(None, y, sigma), jac=jac, x_scale=scale)
    g, n, t = unpack(res.params)
    se = res.stderr
    stderr = {nm: float(s) for nm, s in zip(names, se)}
    stderr["v_offs"] = seed.stderr.get("v_offs", 0.0)
    notes = list(seed.warnings)
    active = [names[j] for j in res.active_bounds]
    if active:
        msg = f"parameter(s) at a bound: {', '.join(active)}"
        notes.append(msg)
        warnings.warn(msg, BoundActiveWarning, stacklevel=2)
    if not res.converged:
        notes.append("iteration cap reached; reporting last iterate")
    fixed = ["v_offs"] + ([] if free_t else ["t_e"])
    resid = y - fn(None, res.params)
    diag = dict(seed.diagnostics)
    diag["cost"] = res.cost
    diag["condition"] = res.condition
    info = window or _window_info(curve, "all")
    return FitResult(model.kind, curve.frequency, float(g), float(n), float(v_offs),
                     float(t) if curve.source_kind == "sntj" else None, stderr, resid,
                     curve.setpoints.copy(), info, n2_over_g1=model.n2_over_g1 or 0.0,
                     stage="full", converged=res.converged, iterations=res.iterations,
                     active_bounds=active, warnings=notes, fixed=fixed, diagnostics=diag)


def fit_curve(curve, model):
    """Asymptotic step followed by the full fit."""
    return fit_full(curve, model, fit_asymptotes(curve, model))


def fit_saturation_corrected(curve, lambda_curve, n2_tilde, g1_small_signal, model=None):
    """Fit a compressing paramp chain after dividing out ``lambda(V)``.

    `model` supplies the two-input settings (fixed ``t_e``, idler
    frequency, asymptote factor); its kind is replaced by the saturated
    one with ``N2/G1`` fixed.  The returned ``n_sys`` is the small-signal
    ``1/2 + N1,ex + N2/G1``.
    """
    if g1_small_signal <= 0 or n2_tilde < 0:
        raise ValueError("need g1 > 0 and n2 >= 0")
    if not lambda_curve.covers(curve.setpoints):
        lambda_curve(curve.setpoints)  # raises ExtrapolationError
    base = model or FitModel(kind="two_input", t_e=0.0)
    sat = replace(base, kind="two_input_saturated", n2_over_g1=n2_tilde / g1_small_signal)
    curve = replace(curve, lambda_curve=lambda_curve)
    return fit_curve(curve, sat)


def _linear_seed(curve, model, v_offs, t_e):
    """Gain and noise by linear least squares at fixed ``V_offs`` and ``T_e``."""
    y, fixed = _prepared(curve, model)
    n_in = source_input(curve, model, v_offs, t_e)
    w = 1.0 / _sigma(y, model)
    cols = np.column_stack([n_in + fixed, np.ones_like(y)])
    a, b = np.linalg.lstsq(cols * w[:, None], y * w, rcond=None)[0]
    return a, b / a


def fit_window_sweep(curve, model, widths, seed=None):
    """Fit symmetric windows of increasing half-width (input quanta) about zero bias.

    ``V_offs`` comes from `seed` (default: asymptotic fit of the whole
    curve).  Each window is seeded by a linear solve with the full source
    law and refined with :func:`fit_full`.  Each result carries the lag-1
    residual autocorrelation in ``diagnostics``.
    """
    widths = [float(w) for w in widths]
    if not widths:
        raise ValueError("no window widths")
    if any(b <= a for a, b in zip(widths, widths[1:])):
        raise ValueError("widths must be strictly ascending")
    if seed is None:
        seed = fit_asymptotes(curve, model)
    t_e = model.t_e if model.t_e is not None else (seed.t_e or model.t_e_guess)
    out = []
    for w in widths:
        sub = curve.window(w, center=seed.v_offs if curve.source_kind == "sntj" else 0.0)
        if len(sub) < MIN_WINDOW_POINTS:
            raise InsufficientDataError(
                f"window of half-width {w} quanta covers {len(sub)} points (< {MIN_WINDOW_POINTS})")
        g, n = _linear_seed(sub, model, seed.v_offs, t_e)
        local = replace(seed, g_sys=float(g), noise=float(n), t_e=t_e, warnings=[])
        res = fit_full(sub, model, local, window=_window_info(sub, "window", w))
        res.diagnostics["residual_autocorrelation"] = res.residual_autocorrelation
        out.append(res)
    return out
