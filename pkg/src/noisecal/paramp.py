"""Parametric amplifier noise models.

Phase-insensitive amplifiers see two input modes (signal and idler) and a
broadband source illuminates both.  Phase-sensitive amplifiers have one
input but a gain that depends on the measured quadrature angle ``alpha``.
Gain compression is carried by a sampled :class:`CompressionCurve`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .chain import EffectiveAmplifier
from .errors import ExtrapolationError, NoiseCalError, SchemaError
from .sources import johnson_noise, sntj_noise

ONE_DB = 10.0 ** (-0.1)


def pi_output_ideal(g1, n_in, n_in_i):
    """Ideal phase-insensitive amplifier: ``G n_in + (G - 1) n_in_i``."""
    if g1 < 1:
        raise ValueError("gain must be >= 1")
    return g1 * np.asarray(n_in, float) + (g1 - 1.0) * np.asarray(n_in_i, float)


@dataclass(frozen=True)
class PhaseInsensitiveParamp:
    """Non-ideal two-input parametric amplifier preceded by a lossy section.

    ``gain_ss``/``gain_is`` are the signal-to-signal and idler-to-signal
    gains, ``excess_ss``/``excess_is`` the matching noise above the quantum
    limit, ``eta_s``/``eta_i`` the transmission of the loss ahead of the
    amplifier at signal and idler frequencies.
    """

    gain_ss: float
    gain_is: float
    excess_ss: float = 0.0
    excess_is: float = 0.0
    eta_s: float = 1.0
    eta_i: float = 1.0
    loss_temperature: float = 0.0

    def __post_init__(self):
        if self.gain_ss < 1:
            raise ValueError("signal gain must be >= 1")
        if self.gain_is < 0:
            raise ValueError("idler gain must be >= 0")
        if self.excess_ss < 0 or self.excess_is < 0:
            raise ValueError("excess noise must be >= 0")
        if not (0 <= self.eta_s <= 1) or not (0 <= self.eta_i <= 1):
            raise ValueError("efficiencies must be in [0, 1]")

    @classmethod
    def ideal(cls, gain):
        return cls(gain_ss=gain, gain_is=gain - 1.0)

    @property
    def effective_gain(self):
        return self.eta_s * self.gain_ss

    @property
    def idler_gain_ratio(self):
        """Effective idler-to-signal over signal-to-signal gain."""
        return self.eta_i * self.gain_is / self.effective_gain

    def effective_excess(self, f):
        """Input-referred excess noise of the amplifier plus its input loss.

        With a filtered idler (``eta_i == 0``) the idler port noise is not
        part of the excess; it appears as the separate ``G^i N_T`` term.
        """
        if self.eta_s <= 0:
            raise NoiseCalError("signal efficiency is zero")
        n_t = johnson_noise(self.loss_temperature, f)
        sig = ((1 - self.eta_s) * n_t + self.excess_ss) / self.eta_s
        if self.eta_i == 0:
            return sig + self.gain_is / self.effective_gain * self.excess_is
        return sig + self.gain_is / self.effective_gain * ((1 - self.eta_i) * n_t + self.excess_is)


def pi_output_nonideal(p, n_in, n_in_i, f):
    """Signal-frequency output of a non-ideal phase-insensitive amplifier."""
    if p.eta_s <= 0:
        raise NoiseCalError("signal efficiency is zero")
    n_t = johnson_noise(p.loss_temperature, f)
    n_in = np.asarray(n_in, float)
    n_in_i = np.asarray(n_in_i, float)
    out = (p.gain_ss * (p.eta_s * n_in + (1 - p.eta_s) * n_t + p.excess_ss)
           + p.gain_is * (p.eta_i * n_in_i + (1 - p.eta_i) * n_t + p.excess_is))
    return float(out) if out.ndim == 0 else out


def asymmetry_intercept_bounds(n_ex_tilde, ratio_range):
    """Range of the excess noise recovered under the equal-gain assumption.

    When the true effective idler/signal gain ratio lies in
    ``ratio_range = (lo, hi)``, a fit that assumes ratio 1 recovers
    ``2 n / (1 + ratio)``; this returns ``(2n/(1+hi), 2n/(1+lo))``.
    """
    lo, hi = ratio_range
    if not (0 < lo <= hi):
        raise ValueError("need 0 < lo <= hi")
    return (2.0 * n_ex_tilde / (1.0 + hi), 2.0 * n_ex_tilde / (1.0 + lo))


# -- gain compression --------------------------------------------------------

@dataclass
class CompressionCurve:
    """Sampled gain compression ``lambda(V) = G1(V) / G1`` versus source bias.

    Interpolation is monotone cubic (PCHIP); asking outside the sampled
    bias range raises :class:`ExtrapolationError`.
    """

    biases: np.ndarray
    lambdas: np.ndarray
    small_signal_gain: float = 1.0
    input_1db_point: float | None = None
    _interp: PchipInterpolator = field(init=False, repr=False)

    def __post_init__(self):
        b = np.asarray(self.biases, float)
        lam = np.asarray(self.lambdas, float)
        if b.ndim != 1 or b.shape != lam.shape or b.size < 2:
            raise ValueError("biases and lambdas must be 1-D of equal length >= 2")
        if not (np.all(np.isfinite(b)) and np.all(np.isfinite(lam))):
            raise ValueError("compression samples must be finite")
        order = np.argsort(b)
        b, lam = b[order], lam[order]
        if np.any(np.diff(b) <= 0):
            raise ValueError("duplicate bias values")
        if np.any(lam <= 0):
            raise NoiseCalError("lambda must be > 0")
        self.biases, self.lambdas = b, lam
        self._interp = PchipInterpolator(b, lam, extrapolate=False)

    @classmethod
    def from_gain_db(cls, biases, gain_db, input_1db_point=None):
        """Normalize a measured gain trace to its small-signal value (the bias nearest 0)."""
        biases = np.asarray(biases, float)
        gain_db = np.asarray(gain_db, float)
        g0 = gain_db[np.argmin(np.abs(biases))]
        return cls(biases, 10.0 ** ((gain_db - g0) / 10.0), 10.0 ** (g0 / 10.0), input_1db_point)

    @classmethod
    def flat(cls, v_max, small_signal_gain=1.0):
        return cls(np.array([-v_max, v_max]), np.ones(2), small_signal_gain)

    def covers(self, v):
        v = np.asarray(v, float)
        return bool(np.all((v >= self.biases[0]) & (v <= self.biases[-1])))

    def __call__(self, v):
        v_arr = np.asarray(v, float)
        if not self.covers(v_arr):
            raise ExtrapolationError(
                f"bias outside compression curve range [{self.biases[0]:.4g}, {self.biases[-1]:.4g}] V")
        lam = self._interp(v_arr)
        if np.any(lam <= 0):
            raise NoiseCalError("interpolated lambda <= 0")
        return float(lam) if lam.ndim == 0 else lam

    def one_db_bias(self):
        """Smallest positive bias where the gain has dropped by 1 dB, or None."""
        pos = self.biases >= 0
        b, lam = self.biases[pos], self.lambdas[pos]
        below = np.nonzero(lam <= ONE_DB)[0]
        if below.size == 0 or below[0] == 0:
            return None
        k = below[0]
        return brentq(lambda v: self._interp(v) - ONE_DB, b[k - 1], b[k])

    def one_db_input(self, electron_temperature, f):
        """Input 1 dB compression point in quanta, referred to the source output."""
        v = self.one_db_bias()
        return None if v is None else sntj_noise(v, electron_temperature, f)


def logistic_compression_curve(biases, f, electron_temperature=0.0, n_1db=2.1, width=1.5,
                               small_signal_gain=1.0):
    """Synthetic compression following a logistic roll-off in source input quanta.

    ``lambda(n) = (1 + exp((n0 - c)/w)) / (1 + exp((n - c)/w))`` with ``n0``
    the zero-bias input, so lambda is exactly 1 at zero bias; the centre
    ``c`` is solved so that lambda drops by 1 dB at ``n = n_1db``.
    """
    biases = np.asarray(biases, float)
    n0 = sntj_noise(0.0, electron_temperature, f)
    if n_1db <= n0:
        raise ValueError("1 dB point must exceed the zero-bias input")

    def lam(n, c):
        return (1 + np.exp((n0 - c) / width)) / (1 + np.exp((n - c) / width))

    c = brentq(lambda c: lam(n_1db, c) - ONE_DB, n0 - 50 * width, n_1db + 50 * width)
    n = sntj_noise(biases, electron_temperature, f)
    return CompressionCurve(biases, lam(n, c), small_signal_gain, input_1db_point=n_1db)


def load_compression_csv(path, small_signal_gain=None):
    """Read ``bias_volt,gain_db`` or ``bias_volt,lambda`` columns."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        if "bias_volt" not in cols or not ({"gain_db", "lambda"} & set(cols)):
            raise SchemaError("expected columns bias_volt and gain_db or lambda", str(path))
        rows = list(reader)
    if len(rows) < 2:
        raise SchemaError("need at least two rows", str(path))
    try:
        b = [float(r["bias_volt"]) for r in rows]
        if "gain_db" in cols:
            return CompressionCurve.from_gain_db(b, [float(r["gain_db"]) for r in rows])
        lam = np.array([float(r["lambda"]) for r in rows])
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"bad number: {exc}", str(path)) from None
    b = np.array(b)
    lam = lam / lam[np.argmin(np.abs(b))]
    return CompressionCurve(b, lam, 1.0 if small_signal_gain is None else small_signal_gain)


def save_compression_csv(curve, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bias_volt", "lambda"])
        for b, lam in zip(curve.biases, curve.lambdas):
            w.writerow([repr(float(b)), repr(float(lam))])


@dataclass(frozen=True)
class ParampChain:
    """Phase-insensitive paramp followed by the rest of the chain (reduced).

    ``output`` gives ``G2 (lambda(V) N_out,1 + N2)`` for a source that
    illuminates signal and idler.  ``idler_frequency`` defaults to the
    signal frequency.
    """

    paramp: PhaseInsensitiveParamp
    post: EffectiveAmplifier
    compression: CompressionCurve | None = None
    idler_frequency: float | None = None

    def idler_f(self, f):
        return f if self.idler_frequency is None else self.idler_frequency

    def output(self, n_in, n_in_i, f, lam=1.0):
        n1 = pi_output_nonideal(self.paramp, n_in, n_in_i, f)
        return self.post.gain * (np.asarray(lam) * n1 + self.post.added_noise)

    def sntj_output(self, v, electron_temperature, f):
        lam = 1.0 if self.compression is None else self.compression(v)
        n_s = sntj_noise(v, electron_temperature, f)
        n_i = sntj_noise(v, electron_temperature, self.idler_f(f))
        return self.output(n_s, n_i, f, lam)

    def johnson_output(self, temperature, f):
        if self.compression is not None:
            raise NoiseCalError("compression curves are indexed by SNTJ bias")
        return self.output(johnson_noise(temperature, f), johnson_noise(temperature, self.idler_f(f)), f)

    def system_gain(self):
        return self.post.gain * self.paramp.effective_gain

    def system_excess(self, f):
        """``N_sys,ex`` under the equal effective gain assumption."""
        return self.paramp.effective_excess(f) + self.post.added_noise / self.paramp.effective_gain


def saturated_chain_output(curve, v, source, f, n_ex_tilde, n2_tilde, g_sys=1.0,
                           idler_frequency=None):
    """Gain-corrected output ``N_out / lambda(V)`` of a compressing paramp chain.

    ``g_sys * (N_in + N_in^i + n_ex + n2 / (G1 lambda(V)))`` with the inputs
    from the junction `source` (its electron temperature is used, its bias
    is replaced by `v`).  ``G1`` is ``curve.small_signal_gain``.
    """
    lam = np.asarray(curve(v))
    if np.any(lam <= 0):
        raise NoiseCalError("lambda <= 0")
    f_i = f if idler_frequency is None else idler_frequency
    t_e = source.electron_temperature
    n = (sntj_noise(v, t_e, f) + sntj_noise(v, t_e, f_i) + n_ex_tilde
         + n2_tilde / (curve.small_signal_gain * lam))
    out = g_sys * n
    return float(out) if np.ndim(out) == 0 else out


# -- phase-sensitive ----------------------------------------------------------

def ps_gain(g1, alpha):
    """High-gain phase-sensitive gain ``4 G cos^2(a) + sin^2(a) / (4 G)``."""
    g1 = np.asarray(g1, float)
    if np.any(g1 < 1):
        raise ValueError("gain must be >= 1")
    alpha = np.asarray(alpha, float)
    out = 4 * g1 * np.cos(alpha) ** 2 + np.sin(alpha) ** 2 / (4 * g1)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PhaseSensitiveParamp:
    gain: float
    pump_phase: float = 0.0
    eta_s: float = 1.0
    eta_i: float = 1.0
    excess: float = 0.0

    def __post_init__(self):
        if self.gain < 1:
            raise ValueError("gain must be >= 1")
        if not (0 < self.eta_s <= 1) or not (0 < self.eta_i <= 1):
            raise ValueError("efficiencies must be in (0, 1]")
        if self.excess < 0:
            raise ValueError("excess must be >= 0")

    @property
    def transmission(self):
        return math.sqrt(self.eta_s * self.eta_i)

    @property
    def effective_excess(self):
        return self.excess / self.transmission

    def quadrature_angle(self, lo_phase):
        """Measurement angle from the amplified quadrature for a given LO phase."""
        return lo_phase - self.pump_phase

    def effective_gain(self, alpha):
        return self.transmission * ps_gain(self.gain, alpha)


def ps_quadrature_variances(p, n_in, exact=False):
    """Amplified and squeezed quadrature noise after the lossy phase-sensitive amp.

    Uses the high-gain factors ``4G`` and ``1/(4G)`` unless `exact`, which
    uses ``(sqrt(G) +/- sqrt(G-1))^2``.
    """
    g = p.gain
    if exact:
        up = (math.sqrt(g) + math.sqrt(g - 1)) ** 2
        down = (math.sqrt(g) - math.sqrt(g - 1)) ** 2
    else:
        up, down = 4 * g, 1 / (4 * g)
    return {"amplified": up * p.transmission * n_in, "squeezed": down * p.transmission * n_in}


def ps_chain_output(p, alpha, n_in, g2_tilde, n2_tilde):
    """Output of a phase-sensitive paramp followed by a phase-insensitive amplifier."""
    g_eff = p.effective_gain(alpha)
    return g2_tilde * g_eff * (np.asarray(n_in, float) + p.effective_excess + n2_tilde / g_eff)


def ps_system_added_noise(p, alpha, n2_tilde):
    """``N_sys(alpha) = excess / sqrt(eta eta_i) + N2 / G_eff(alpha)``."""
    return p.effective_excess + n2_tilde / p.effective_gain(alpha)
