"""Calibrated noise sources: Johnson resistor (VTS) and shot-noise tunnel junction.

All emitted noise is returned in quanta (see :mod:`noisecal.quanta`).  The
SNTJ expression is evaluated in reduced units ``a = eV/(hf)`` and
``t = k_B T_e/(hf)``::

    N = (a+1)/4 coth((a+1)/(2t)) + (a-1)/4 coth((a-1)/(2t))

Each term is written as ``(t/2) * u coth(u)`` with ``u = (a±1)/(2t)``, which
stays finite when ``a±1`` or ``t`` goes to zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError
from .quanta import E_CHARGE, H, K_B

_SERIES_CUT = 1e-4
_SATURATION = 20.0


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def _finite(x, name):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} must be finite")
    return x


def _temperature(t, name="temperature"):
    t = _finite(t, name)
    if np.any(t < 0):
        raise ValueError(f"{name} must be >= 0")
    return t


def _frequency(f):
    f = _finite(f, "frequency")
    if np.any(f <= 0):
        raise ValueError("frequency must be > 0")
    return f


def coth(x):
    """Hyperbolic cotangent with a Laurent series near 0 and saturation beyond |x| > 20."""
    x = np.asarray(x, dtype=float)
    shape = x.shape
    x = np.atleast_1d(x)
    small = np.abs(x) < _SERIES_CUT
    big = np.abs(x) > _SATURATION
    mid = ~(small | big)
    out = np.empty_like(x)
    xs = x[small]
    with np.errstate(divide="ignore"):
        out[small] = 1.0 / xs + xs / 3.0 - xs**3 / 45.0
    out[big] = np.sign(x[big])
    out[mid] = 1.0 / np.tanh(x[mid])
    return _out(out.reshape(shape))


def _ucoth(u):
    # u * coth(u), even, >= 1
    u = np.abs(u)
    out = np.empty_like(u)
    small = u < _SERIES_CUT
    big = u > _SATURATION
    mid = ~(small | big)
    us = u[small]
    out[small] = 1.0 + us**2 / 3.0 - us**4 / 45.0
    out[big] = u[big]
    out[mid] = u[mid] / np.tanh(u[mid])
    return out


def _ducoth(u):
    # d/du [u coth u] = coth u - u csch^2 u, odd
    s = np.sign(u)
    a = np.abs(u)
    out = np.empty_like(a)
    small = a < _SERIES_CUT
    rest = ~small
    out[small] = 2.0 * a[small] / 3.0 - 4.0 * a[small] ** 3 / 45.0
    ar = a[rest]
    q = np.exp(-2.0 * ar)
    # coth = (1+q)/(1-q), csch^2 = 4q/(1-q)^2
    out[rest] = (1.0 + q) / (1.0 - q) - ar * 4.0 * q / (1.0 - q) ** 2
    return s * out


def _u2csch2(u):
    # u^2 csch^2 u, even
    a = np.abs(u)
    out = np.empty_like(a)
    small = a < _SERIES_CUT
    rest = ~small
    out[small] = 1.0 - a[small] ** 2 / 3.0 + a[small] ** 4 / 15.0
    ar = a[rest]
    q = np.exp(-2.0 * ar)
    out[rest] = ar**2 * 4.0 * q / (1.0 - q) ** 2
    return out


def _mode_term(x, t):
    """``x coth(x/(2t)) / 4`` in reduced units; exact ``|x|/4`` when saturated or t == 0."""
    x, t = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float))
    shape = x.shape
    x = np.atleast_1d(x)
    t = np.atleast_1d(t)
    out = np.abs(x) / 4.0
    live = (t > 0) & (np.abs(x) <= 2.0 * _SATURATION * t)
    if np.any(live):
        tl = t[live]
        out[live] = 0.5 * tl * _ucoth(x[live] / (2.0 * tl))
    return out.reshape(shape)


def johnson_noise(temperature, f):
    """Quantum Johnson noise ``coth(hf / 2 k_B T) / 2`` delivered to a matched load.

    Exactly 0.5 at zero temperature.
    """
    t = _temperature(temperature) * K_B / (H * _frequency(f))
    # 0.5 coth(1/(2t)) == t * ucoth(1/(2t)) == 2 * _mode_term(1, t)
    return _out(2.0 * _mode_term(1.0, t))


def sntj_noise(voltage, electron_temperature, f):
    """Noise emitted by a biased tunnel junction into a matched line, in quanta.

    Even in `voltage`; equals :func:`johnson_noise` at zero bias and tends to
    ``e|V| / (2hf)`` at large bias.
    """
    v = _finite(voltage, "voltage")
    t_e = _temperature(electron_temperature, "electron temperature")
    hf = H * _frequency(f)
    a = E_CHARGE * v / hf
    t = K_B * t_e / hf
    return _out(_mode_term(a + 1.0, t) + _mode_term(a - 1.0, t))


def sntj_noise_gradient(voltage, electron_temperature, f):
    """Partial derivatives ``(dN/dV, dN/dT_e)`` of :func:`sntj_noise`.

    dN/dV is in 1/volt and dN/dT_e in 1/kelvin.  At ``T_e = 0`` the
    temperature derivative is reported as its zero limit.
    """
    v = _finite(voltage, "voltage")
    t_e = _temperature(electron_temperature, "electron temperature")
    hf = H * _frequency(f)
    a, t = np.broadcast_arrays(E_CHARGE * v / hf, K_B * t_e / hf)
    shape = a.shape
    a = np.atleast_1d(np.array(a, dtype=float))
    t = np.atleast_1d(np.array(t, dtype=float))
    d_a = np.zeros_like(a)
    d_t = np.zeros_like(a)
    for x in (a + 1.0, a - 1.0):
        live = t > 0
        u = np.zeros_like(x)
        u[live] = x[live] / (2.0 * t[live])
        d_a += np.where(live, _ducoth(u) / 4.0, np.sign(x) / 4.0)
        d_t += np.where(live, 0.5 * _u2csch2(u), 0.0)
    hf = np.atleast_1d(hf)
    return _out((d_a * E_CHARGE / hf).reshape(shape)), _out((d_t * K_B / hf).reshape(shape))


LIMIT_CASES = ("zero_bias", "zero_frequency", "zero_temperature")


def sntj_limit(voltage, electron_temperature, f, case):
    """Closed-form limit of the SNTJ noise when one energy scale is negligible.

    `case` names the neglected scale: ``zero_bias`` (e|V|), ``zero_frequency``
    (hf) or ``zero_temperature`` (k_B T_e).  Raises PreconditionError when
    the neglected scale exceeds 10% of the smallest non-zero retained one.
    """
    if case not in LIMIT_CASES:
        raise ValueError(f"unknown limit case {case!r}; expected one of {LIMIT_CASES}")
    v = float(_finite(voltage, "voltage"))
    t_e = float(_temperature(electron_temperature, "electron temperature"))
    f = float(_frequency(f))
    hf = H * f
    scales = {"zero_bias": E_CHARGE * abs(v), "zero_frequency": hf, "zero_temperature": K_B * t_e}
    neglected = scales.pop(case)
    retained = [s for s in scales.values() if s > 0]
    if neglected > 0 and (not retained or neglected > 0.1 * min(retained)):
        raise PreconditionError(f"{case} limit not applicable: neglected scale is not small")

    if case == "zero_bias":
        return johnson_noise(t_e, f)
    if case == "zero_frequency":
        ev = E_CHARGE * abs(v)
        if t_e == 0:
            return ev / (2 * hf)
        x = ev / (2 * K_B * t_e)
        return float(K_B * t_e * _ucoth(np.array([x]))[0] / hf)
    return max(0.5, E_CHARGE * abs(v) / (2 * hf))


PSD_UNITS = ("W/Hz", "V2/Hz", "A2/Hz")


def psd(kind, unit="W/Hz", *, temperature=None, resistance=None, voltage=None, current=None):
    """Classical noise spectral densities of a resistor or a tunnel junction.

    ========  =======  =======================
    kind      unit     value
    ========  =======  =======================
    johnson   W/Hz     k_B T
    johnson   V2/Hz    4 k_B T R
    johnson   A2/Hz    4 k_B T / R
    shot      W/Hz     e|V| / 2
    shot      A2/Hz    2 e |I|   (I = V/R if only V given)
    shot      V2/Hz    2 e |I| R^2
    ========  =======  =======================
    """
    if unit not in PSD_UNITS:
        raise ValueError(f"unsupported unit {unit!r}")
    if kind == "johnson":
        if temperature is None:
            raise ValueError("johnson PSD needs a temperature")
        kt = K_B * float(_temperature(temperature))
        if unit == "W/Hz":
            return kt
        if resistance is None or resistance <= 0:
            raise ValueError("resistance > 0 required for V2/Hz and A2/Hz")
        return 4 * kt * resistance if unit == "V2/Hz" else 4 * kt / resistance
    if kind == "shot":
        if unit == "W/Hz":
            if voltage is None:
                raise ValueError("shot PSD in W/Hz needs the junction voltage")
            return E_CHARGE * abs(voltage) / 2
        if current is None:
            if voltage is None or resistance is None:
                raise ValueError("shot PSD needs a current, or a voltage and a resistance")
            current = voltage / resistance
        s_i = 2 * E_CHARGE * abs(current)
        if unit == "A2/Hz":
            return s_i
        if resistance is None or resistance <= 0:
            raise ValueError("resistance > 0 required for V2/Hz")
        return s_i * resistance**2
    raise ValueError(f"unsupported source kind {kind!r}")


VOLTAGE_CONVENTIONS = ("eV_over_kB", "eV_over_2kB")


def voltage_temperature_equivalent(voltage, convention="eV_over_kB"):
    """Temperature of a resistor emitting as much as a junction biased at `voltage`.

    ``eV_over_kB`` gives ``e|V|/k_B`` (1 mV -> 11.6 K); ``eV_over_2kB``
    matches the classical PSDs ``e|V|/2 = k_B T`` (1 mV -> 5.8 K).
    """
    v = np.abs(_finite(voltage, "voltage"))
    if convention == "eV_over_kB":
        return _out(E_CHARGE * v / K_B)
    if convention == "eV_over_2kB":
        return _out(E_CHARGE * v / (2 * K_B))
    raise ValueError(f"unknown convention {convention!r}")


def bias_for_temperature(temperature, convention="eV_over_2kB"):
    """Junction voltage with the given temperature equivalent (inverse of the above)."""
    t = _finite(temperature, "temperature")
    if convention == "eV_over_kB":
        return _out(t * K_B / E_CHARGE)
    if convention == "eV_over_2kB":
        return _out(2 * t * K_B / E_CHARGE)
    raise ValueError(f"unknown convention {convention!r}")


@dataclass(frozen=True)
class JohnsonSource:
    """Matched resistor on a variable temperature stage."""

    temperature: float
    resistance: float = 50.0

    def __post_init__(self):
        if not np.isfinite(self.temperature) or self.temperature < 0:
            raise ValueError("temperature must be finite and >= 0")
        if not self.resistance > 0:
            raise ValueError("resistance must be > 0")

    def noise(self, f):
        return johnson_noise(self.temperature, f)

    def voltage_psd(self):
        return psd("johnson", "V2/Hz", temperature=self.temperature, resistance=self.resistance)


@dataclass(frozen=True)
class SntjSource:
    """Shot-noise tunnel junction.  The dc impedance only matters for biasing."""

    bias_voltage: float
    electron_temperature: float
    dc_impedance: float = 50.0

    def __post_init__(self):
        if not np.isfinite(self.bias_voltage):
            raise ValueError("bias voltage must be finite")
        if not np.isfinite(self.electron_temperature) or self.electron_temperature < 0:
            raise ValueError("electron temperature must be finite and >= 0")
        if not self.dc_impedance > 0:
            raise ValueError("dc impedance must be > 0")

    def noise(self, f):
        return sntj_noise(self.bias_voltage, self.electron_temperature, f)

    def current_psd(self):
        return psd("shot", "A2/Hz", voltage=self.bias_voltage, resistance=self.dc_impedance)


@dataclass(frozen=True)
class BiasNetwork:
    """Series resistor feeding the junction, with a voltage-tap readout amplifier."""

    series_resistance: float = 1e5
    junction_impedance: float = 50.0
    amplifier_gain: float = 100.0

    def __post_init__(self):
        if self.series_resistance < 0:
            raise ValueError("series resistance must be >= 0")
        if not self.junction_impedance > 0:
            raise ValueError("junction impedance must be > 0")

    @property
    def division_ratio(self):
        return self.series_resistance / self.junction_impedance + 1.0

    def tap_reading(self, junction_voltage):
        """Voltmeter reading behind the tap amplifier."""
        return junction_voltage * self.amplifier_gain


def bias_network_solve(network, awg_voltage):
    """Junction voltage produced by `awg_voltage` through the divider.

    Returns ``{"junction_voltage": ..., "division_ratio": ...}``.
    """
    ratio = network.division_ratio
    return {"junction_voltage": awg_voltage / ratio, "division_ratio": ratio}
