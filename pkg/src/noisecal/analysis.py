"""Frequency-resolved pipelines built on the curve fits.

Y-factor spectra, transmission efficiency between reference planes,
reference-plane corrected spectra, the noise-rise estimate and the
phase-sensitive predictive model.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .chain import efficiency_from_gains, move_reference_plane
from .errors import NoiseCalError, UnphysicalResultWarning
from .fitting.procedures import FitModel, fit_curve
from .sources import johnson_noise

MIN_BIN_SETPOINTS = 4
SPECTRUM_COLUMNS = ("frequency_hz", "g_sys", "g_sys_stderr", "noise", "noise_stderr", "n_sys",
                    "t_e", "status")


@dataclass
class SpectralResult:
    """Per-bin gain and noise.  Failed bins hold NaN and an error message in `status`."""

    kind: str
    frequencies: np.ndarray
    g_sys: np.ndarray
    noise: np.ndarray
    n_sys: np.ndarray
    g_sys_stderr: np.ndarray
    noise_stderr: np.ndarray
    t_e: np.ndarray
    status: list = field(default_factory=list)

    def __post_init__(self):
        arrays = ("frequencies", "g_sys", "noise", "n_sys", "g_sys_stderr", "noise_stderr", "t_e")
        for name in arrays:
            setattr(self, name, np.asarray(getattr(self, name), float))
        n = self.frequencies.size
        if any(getattr(self, a).shape != (n,) for a in arrays):
            raise ValueError("spectral arrays must be aligned")
        if not self.status:
            self.status = ["ok"] * n
        if len(self.status) != n:
            raise ValueError("status must have one entry per bin")

    @property
    def ok(self):
        return np.array([s == "ok" for s in self.status])

    @classmethod
    def from_fits(cls, kind, frequencies, fits):
        """Assemble from per-bin FitResult objects (None or an exception for failures)."""
        rows = []
        status = []
        for fr in fits:
            if isinstance(fr, Exception) or fr is None:
                rows.append([math.nan] * 6)
                status.append(f"failed: {fr}")
            else:
                rows.append([fr.g_sys, fr.noise, fr.n_sys, fr.stderr.get("g_sys", math.nan),
                             fr.stderr.get("noise", math.nan),
                             math.nan if fr.t_e is None else fr.t_e])
                status.append("ok")
        a = np.array(rows, float).reshape(-1, 6)
        return cls(kind, frequencies, a[:, 0], a[:, 1], a[:, 2], a[:, 3], a[:, 4], a[:, 5], status)

    def to_dict(self):
        def clean(v):
            return [None if not np.isfinite(x) else float(x) for x in v]

        return {"kind": self.kind, "frequency_hz": clean(self.frequencies),
                "g_sys": clean(self.g_sys), "g_sys_stderr": clean(self.g_sys_stderr),
                "noise": clean(self.noise), "noise_stderr": clean(self.noise_stderr),
                "n_sys": clean(self.n_sys), "t_e": clean(self.t_e), "status": list(self.status)}

    @classmethod
    def from_dict(cls, d):
        def arr(key):
            return np.array([math.nan if x is None else x for x in d[key]], float)

        try:
            return cls(d["kind"], arr("frequency_hz"), arr("g_sys"), arr("noise"), arr("n_sys"),
                       arr("g_sys_stderr"), arr("noise_stderr"), arr("t_e"), list(d["status"]))
        except (KeyError, TypeError) as exc:
            raise NoiseCalError(f"malformed spectral result: {exc}") from None

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SPECTRUM_COLUMNS)
            for i in range(self.frequencies.size):
                vals = [self.frequencies[i]] + [getattr(self, c)[i] for c in SPECTRUM_COLUMNS[1:-1]]
                w.writerow([repr(float(v)) for v in vals] + [self.status[i]])


def yfactor_spectrum(curves, model):
    """Two-step fit in every frequency bin.

    Bins that fail (too few setpoints, singular fits, bad data) are kept
    with NaN values and a ``failed: ...`` status instead of aborting.
    """
    curves = sorted(curves, key=lambda c: c.frequency)
    fits = []
    for c in curves:
        if len(c) < MIN_BIN_SETPOINTS:
            fits.append(NoiseCalError(f"only {len(c)} setpoints"))
            continue
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                fits.append(fit_curve(c, model))
        except (NoiseCalError, ValueError, np.linalg.LinAlgError) as exc:
            fits.append(exc)
    return SpectralResult.from_fits(model.kind, [c.frequency for c in curves], fits)


def _check_grid(a, b):
    if a.frequencies.shape != b.frequencies.shape or not np.allclose(
            a.frequencies, b.frequencies, rtol=1e-12, atol=0):
        raise NoiseCalError("frequency grids do not match")


def efficiency_spectrum(result_near, result_far):
    """Per-bin ``eta = G_near / G_far`` and insertion loss in dB."""
    _check_grid(result_near, result_far)
    out = []
    for gn, gf in zip(result_near.g_sys, result_far.g_sys):
        if not (np.isfinite(gn) and np.isfinite(gf) and gn > 0 and gf > 0):
            out.append({"eta": math.nan, "insertion_loss_db": math.nan})
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UnphysicalResultWarning)
            out.append(efficiency_from_gains(gn, gf))
    return out


def reference_plane_spectrum(result, etas, loss_temperature=0.0):
    """Refer a spectrum to a plane further down the chain, past a loss `etas`.

    Two-input spectra use the equal-efficiency correction
    ``eta n - 2 (1 - eta) N_T``; single-input spectra ``eta n - (1 - eta) N_T``.
    Gains become ``G / eta``.
    """
    etas = np.asarray(etas, float)
    if etas.shape != result.frequencies.shape:
        raise NoiseCalError("efficiency grid does not match the spectrum")
    n_t = johnson_noise(loss_temperature, result.frequencies)
    noise = np.full_like(etas, math.nan)
    ok = np.isfinite(etas) & np.isfinite(result.noise)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UnphysicalResultWarning)
        if result.kind in ("two_input", "two_input_saturated"):
            for i in np.nonzero(ok)[0]:
                noise[i] = move_reference_plane(result.noise[i], min(etas[i], 1.0), n_t[i])
        else:
            noise[ok] = etas[ok] * result.noise[ok] - (1 - etas[ok]) * n_t[ok]
    if np.any(noise[ok] < 0):
        warnings.warn("reference-plane correction over-subtracts in some bins",
                      UnphysicalResultWarning, stacklevel=2)
    offset = result.n_sys - result.noise
    return SpectralResult(result.kind, result.frequencies, result.g_sys / etas, noise,
                          noise + offset, result.g_sys_stderr / etas,
                          etas * result.noise_stderr, result.t_e, list(result.status))


# -- noise rise ------------------------------------------------------------

@dataclass(frozen=True)
class NoiseRiseEstimate:
    """First-amplifier noise from a noise-rise ratio.

    The method ignores the loss ahead of the first amplifier and other
    second-order effects, which all push the estimate low; it is therefore
    always flagged ``optimistic_bias``.
    """

    n1: float
    unphysical: bool
    optimistic_bias: bool = True


def _positive(**kw):
    for k, v in kw.items():
        if not (np.isfinite(v) and v > 0):
            raise ValueError(f"{k} must be finite and > 0")


def noise_rise(g1, n_in, n1, n2_tilde):
    """Ratio of output noise with the first amplifier on and off."""
    _positive(g1=g1, n_in=n_in, n2_tilde=n2_tilde)
    if not (np.isfinite(n1) and n1 >= 0):
        raise ValueError("n1 must be finite and >= 0")
    return g1 * (n_in + n1) / (n_in + n2_tilde)


def n1_from_noise_rise(g1, n_in, n2_tilde, r):
    """Invert :func:`noise_rise` for the first amplifier's added noise."""
    _positive(g1=g1, n_in=n_in, n2_tilde=n2_tilde, r=r)
    n1 = r / g1 * (n_in + n2_tilde) - n_in
    if n1 < 0:
        warnings.warn("noise rise implies negative added noise", UnphysicalResultWarning,
                      stacklevel=2)
    return NoiseRiseEstimate(float(n1), bool(n1 < 0))


# -- phase-sensitive predictive model -----------------------------------------

def ps_predictive_model(m_gain, g_sys_hemt, n_sys_hemt, m_noise, alpha_grid):
    """Gain and added noise of a phase-sensitive chain versus quadrature angle.

    ``G~(a) = M cos^2 a + sin^2 a / M``; ``G_sys = G_H G~`` and
    ``N_sys = m + N_H / G~ - min(N_H / G~)`` over `alpha_grid`.
    """
    if not m_gain > 1:
        raise ValueError("M must be > 1")
    a = np.asarray(alpha_grid, float)
    gt = m_gain * np.cos(a) ** 2 + np.sin(a) ** 2 / m_gain
    ratio = n_sys_hemt / gt
    return {"alpha": a, "gain_factor": gt, "g_sys": g_sys_hemt * gt,
            "n_sys": m_noise + ratio - ratio.min()}


# -- model comparison ---------------------------------------------------------

def model_misinterpretation_report(curve, t_e=None, reference_gain=None, idler_frequency=None,
                                   asymptote_factor=10.0):
    """Fit a curve with both the single-input and the two-input model.

    ``slope_ratio`` is the single-input gain over `reference_gain` (an
    independent gain measurement); it is about 2 for a parametric first
    amplifier read with the wrong model, 1 otherwise.  Without a reference
    it is None.
    """
    common = {"t_e": t_e, "idler_frequency": idler_frequency, "asymptote_factor": asymptote_factor}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        single = fit_curve(curve, FitModel(kind="single_input", **common))
        two = fit_curve(curve, FitModel(kind="two_input", **common))
    ratio = None if reference_gain is None else single.g_sys / reference_gain
    report = {
        "single_input": {"g_sys": single.g_sys, "noise": single.noise, "n_sys": single.n_sys},
        "two_input": {"g_sys": two.g_sys, "noise": two.noise, "n_sys": two.n_sys},
        "slope_ratio": ratio,
        "noise_ratio": single.n_sys / two.n_sys,
        "warning": None,
    }
    if ratio is not None and abs(ratio - 2.0) < 0.1:
        report["warning"] = ("fitted gain is twice the reference: the single-input model "
                             "halves the excess noise of a two-input chain")
    return report


__all__ = [
    "NoiseRiseEstimate", "SpectralResult", "efficiency_spectrum",
    "model_misinterpretation_report", "n1_from_noise_rise", "noise_rise",
    "ps_predictive_model", "reference_plane_spectrum", "yfactor_spectrum",
]
