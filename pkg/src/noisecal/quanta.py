"""Physical constants and photon-normalized noise units.

Noise is carried around the package as photon-normalized power spectral
density ("quanta"), ``N = P / (h f)``.  Half a quantum is the vacuum level.
Everything else is SI.
"""

from __future__ import annotations

import numpy as np

# CODATA 2018 (exact in the 2019 SI)
H = 6.62607015e-34
K_B = 1.380649e-23
E_CHARGE = 1.602176634e-19

VACUUM = 0.5
STANDARD_QUANTUM_LIMIT = 1.0


def _check_frequency(f):
    f = np.asarray(f, dtype=float)
    if not np.all(np.isfinite(f)) or np.any(f <= 0):
        raise ValueError("frequency must be finite and > 0")
    return f


def _check_nonneg(x, name):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} must be finite")
    if np.any(x < 0):
        raise ValueError(f"{name} must be >= 0")
    return x


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def quanta_from_psd(p, f):
    """Convert a power spectral density in W/Hz to quanta at frequency `f`."""
    p = _check_nonneg(p, "psd")
    f = _check_frequency(f)
    return _out(p / (H * f))


def psd_from_quanta(n, f):
    """Inverse of :func:`quanta_from_psd`."""
    n = _check_nonneg(n, "noise")
    f = _check_frequency(f)
    return _out(n * H * f)


def noise_temperature(n, f):
    """Noise temperature ``T_N = P / k_B`` in kelvin of `n` quanta at `f`."""
    n = _check_nonneg(n, "noise")
    f = _check_frequency(f)
    return _out(n * H * f / K_B)


def quanta_from_temperature(t, f):
    """Classical ``k_B T / (h f)``; not the Johnson formula (see sources)."""
    t = _check_nonneg(t, "temperature")
    f = _check_frequency(f)
    return _out(K_B * t / (H * f))


def photon_energy_temperature(f):
    """``h f / k_B`` in kelvin."""
    return _out(H * _check_frequency(f) / K_B)


def db_to_linear(db):
    return _out(10.0 ** (np.asarray(db, dtype=float) / 10.0))


def linear_to_db(x):
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("power ratio must be > 0")
    return _out(10.0 * np.log10(x))
