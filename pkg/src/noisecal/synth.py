"""Synthetic output-noise curves with spectrum-analyzer-like acquisition noise.

Forward models:

* :class:`~noisecal.chain.EffectiveAmplifier` -- single-input chain,
  ``G (N_in + N)``;
* :class:`~noisecal.paramp.ParampChain` -- two-input paramp chain, with
  optional gain compression;
* :class:`PhaseSensitiveChain` -- phase-sensitive paramp read along one
  quadrature.

Acquisition noise is multiplicative Gaussian with relative standard
deviation ``1/sqrt(n_eff)``, a radiometer-style estimate for averaged
power spectra.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .chain import EffectiveAmplifier, chain_from_dict, reduce_chain
from .errors import NoiseCalError, SchemaError
from .fitting.curves import NoiseCurve
from .paramp import (ParampChain, PhaseInsensitiveParamp, PhaseSensitiveParamp,
                     logistic_compression_curve, ps_chain_output)
from .quanta import db_to_linear
from .sources import JohnsonSource, SntjSource, bias_for_temperature, johnson_noise, sntj_noise

REFERENCE_GAIN = 1e9
REFERENCE_NOISE = 1.0
REFERENCE_FREQUENCY = 6e9
REFERENCE_ELECTRON_TEMPERATURES = (0.0, 0.1)


@dataclass(frozen=True)
class AcquisitionSettings:
    rbw: float = 8e6
    vbw: float = 15e3
    points_per_sweep: int = 501
    sweep_time: float = 0.05
    trace_averages: int = 1500
    rng_seed: int = 0

    def __post_init__(self):
        if not (self.rbw > 0 and self.vbw > 0 and self.sweep_time > 0):
            raise ValueError("bandwidths and sweep time must be > 0")
        if self.points_per_sweep < 1 or self.trace_averages < 1:
            raise ValueError("counts must be positive")
        if self.vbw > self.rbw:
            raise ValueError("vbw must not exceed rbw")
        if self.rng_seed < 0:
            raise ValueError("seed must be >= 0")

    @property
    def n_eff(self):
        """Effective number of averaged independent samples per point."""
        return self.trace_averages * max(1.0, self.rbw * self.sweep_time / self.points_per_sweep)

    @property
    def relative_sigma(self):
        return 1.0 / math.sqrt(self.n_eff)

    @classmethod
    def phase_insensitive(cls, rng_seed=0):
        """Wideband settings: 8 MHz RBW, 501 points, 50 ms sweeps, 1500 traces."""
        return cls(rng_seed=rng_seed)

    @classmethod
    def phase_sensitive(cls, rng_seed=0):
        """Zero-span settings with the RBW reduced to 1.5 MHz."""
        return cls(rbw=1.5e6, rng_seed=rng_seed)

    @classmethod
    def from_n_eff(cls, n_eff, rng_seed=0):
        """Settings whose ``n_eff`` equals `n_eff` (rounded to whole traces)."""
        n = int(round(n_eff))
        return cls(rbw=1.0, vbw=1.0, points_per_sweep=1, sweep_time=1.0, trace_averages=n,
                   rng_seed=rng_seed)

    def rng(self, bin_index=0):
        """Independent generator for one frequency bin (counter-based sub-seed)."""
        return np.random.default_rng(np.random.SeedSequence(self.rng_seed, spawn_key=(bin_index,)))


@dataclass(frozen=True)
class PhaseSensitiveChain:
    """Phase-sensitive first amplifier read at quadrature angle `alpha`."""

    paramp: PhaseSensitiveParamp
    alpha: float
    post: EffectiveAmplifier


def default_sntj_biases(points=10, temperature_span=0.5):
    """Evenly spaced biases covering ``eV/(2 k_B) = +-temperature_span``."""
    if points < 2:
        raise ValueError("need at least two biases")
    v = bias_for_temperature(temperature_span, "eV_over_2kB")
    return np.linspace(-v, v, points)


def _check_setpoints(setpoints, source):
    x = np.asarray(setpoints, float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("setpoints must be a non-empty 1-D list")
    if isinstance(source, JohnsonSource) and np.any(x < 0):
        raise ValueError("temperatures must be >= 0")
    return x


def forward_output(model, source, setpoints, f, bias_offset=0.0):
    """Noiseless output (quanta) of `model` driven by `source` at each setpoint.

    For an SNTJ the setpoints are bias voltages (the junction sees
    ``V - bias_offset``); for a VTS they are temperatures.
    """
    x = _check_setpoints(setpoints, source)
    sntj = isinstance(source, SntjSource)
    if not sntj and not isinstance(source, JohnsonSource):
        raise TypeError("source must be an SntjSource or a JohnsonSource")

    def law(freq):
        if sntj:
            return sntj_noise(x - bias_offset, source.electron_temperature, freq)
        return johnson_noise(x, freq)

    if isinstance(model, EffectiveAmplifier):
        return model.gain * (law(f) + model.added_noise)
    if isinstance(model, ParampChain):
        lam = 1.0
        if model.compression is not None:
            if not sntj:
                raise NoiseCalError("compression curves are indexed by SNTJ bias")
            lam = model.compression(x)  # raises ExtrapolationError outside coverage
        return np.asarray(model.output(law(f), law(model.idler_f(f)), f, lam), float)
    if isinstance(model, PhaseSensitiveChain):
        return np.asarray(ps_chain_output(model.paramp, model.alpha, law(f), model.post.gain,
                                          model.post.added_noise), float)
    raise TypeError(f"unsupported model type {type(model).__name__}")


def ground_truth(model, f):
    """Parameters a correct fit should recover, as a plain dict.

    For paramp chains these are the equal-gain two-input parameters with
    the idler at the signal frequency: gain ``G2 (eta_s G_ss + eta_i G_is)/2``
    and excess noise referred to it.  With compression the excess excludes
    the ``N2/G1`` term, reported separately.
    """
    if isinstance(model, EffectiveAmplifier):
        return {"kind": "single_input", "g_sys": model.gain, "noise": model.added_noise,
                "n_sys": model.added_noise}
    if isinstance(model, ParampChain):
        p = model.paramp
        n_t = johnson_noise(p.loss_temperature, f)
        g_avg = 0.5 * (p.eta_s * p.gain_ss + p.eta_i * p.gain_is)
        n1 = (p.gain_ss * ((1 - p.eta_s) * n_t + p.excess_ss)
              + p.gain_is * ((1 - p.eta_i) * n_t + p.excess_is)) / g_avg
        n2 = model.post.added_noise / g_avg
        out = {"g_sys": model.post.gain * g_avg, "g1": g_avg, "n2_tilde": model.post.added_noise}
        if model.compression is None:
            out.update(kind="two_input", noise=n1 + n2, n_sys=0.5 + n1 + n2)
        else:
            out.update(kind="two_input_saturated", noise=n1, n2_over_g1=n2, n_sys=0.5 + n1 + n2)
        return out
    if isinstance(model, PhaseSensitiveChain):
        g_eff = model.paramp.effective_gain(model.alpha)
        n = model.paramp.effective_excess + model.post.added_noise / g_eff
        return {"kind": "ps_quadrature", "g_sys": model.post.gain * g_eff, "noise": n, "n_sys": n}
    raise TypeError(f"unsupported model type {type(model).__name__}")


def generate_curve(model, source, setpoints, f, acq=None, bias_offset=0.0, bin_index=0):
    """One synthetic :class:`NoiseCurve`.

    Without `acq` the outputs are the exact forward model.  With `acq` each
    point is multiplied by ``1 + eps``, ``eps ~ N(0, 1/n_eff)``, drawn from
    the generator of bin `bin_index`.
    """
    x = _check_setpoints(setpoints, source)
    y = forward_output(model, source, x, f, bias_offset)
    if acq is not None:
        eps = acq.rng(bin_index).standard_normal(x.size) * acq.relative_sigma
        y = y * (1.0 + eps)
    unit = "V" if isinstance(source, SntjSource) else "K"
    lam = model.compression if isinstance(model, ParampChain) else None
    meta = {"truth": ground_truth(model, f), "bias_offset": bias_offset,
            "n_eff": None if acq is None else acq.n_eff}
    if isinstance(source, SntjSource):
        meta["electron_temperature"] = source.electron_temperature
    return NoiseCurve(f, x, y, unit, lambda_curve=lam, metadata=meta)


def generate_spectrum(model, source, setpoints, frequencies, acq=None, bias_offset=0.0):
    """One curve per frequency bin.

    `model` is a forward model or a callable ``f -> model`` for chains whose
    parameters vary across the band.  Bin ``i`` uses sub-seed ``i``.
    """
    freqs = np.asarray(frequencies, float)
    if freqs.ndim != 1 or freqs.size == 0:
        raise ValueError("frequency grid must be non-empty")
    curves = []
    for i, f in enumerate(freqs):
        m = model(f) if callable(model) else model
        curves.append(generate_curve(m, source, setpoints, float(f), acq, bias_offset, i))
    return curves


def reference_curves(biases=None, electron_temperatures=REFERENCE_ELECTRON_TEMPERATURES, acq=None):
    """The canonical ``G_sys = 1e9``, ``N_sys = 1`` chain at 6 GHz, one curve per ``T_e``.

    Default biases: 201 points over +-1 mV.
    """
    biases = np.linspace(-1e-3, 1e-3, 201) if biases is None else biases
    chain = EffectiveAmplifier(REFERENCE_GAIN, REFERENCE_NOISE)
    return [generate_curve(chain, SntjSource(0.0, t), biases, REFERENCE_FREQUENCY, acq, bin_index=i)
            for i, t in enumerate(electron_temperatures)]


def with_offset(curve, dv):
    """Copy of an SNTJ curve with its bias axis shifted by `dv`."""
    return replace(curve, setpoints=curve.setpoints + dv)


# -- scenario documents ---------------------------------------------------------

SCENARIO_SCHEMA_VERSION = 1


@dataclass
class Scenario:
    """A parsed simulation scenario: one curve set per source setting."""

    model_for: object
    sources: list
    setpoints: np.ndarray
    frequencies: np.ndarray
    acquisition: AcquisitionSettings | None
    bias_offset: float = 0.0
    compression: object = None

    def generate(self):
        """List of ``(source, curves)``; curve set ``j``, bin ``i`` uses sub-seed ``j*nf + i``."""
        out = []
        nf = self.frequencies.size
        for j, src in enumerate(self.sources):
            curves = [generate_curve(self.model_for(float(f)), src, self.setpoints, float(f),
                                     self.acquisition, self.bias_offset, j * nf + i)
                      for i, f in enumerate(self.frequencies)]
            out.append((src, curves))
        return out


def _get(d, key, where, kind=float, default=None, required=True):
    if key not in d:
        if not required or default is not None:
            return default
        raise SchemaError(f"missing field {key!r}", where)
    v = d[key]
    if kind is float:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise SchemaError(f"field {key!r} must be a finite number", f"{where}.{key}")
        return float(v)
    if kind is int:
        if isinstance(v, bool) or not isinstance(v, int):
            raise SchemaError(f"field {key!r} must be an integer", f"{where}.{key}")
        return v
    if not isinstance(v, kind):
        raise SchemaError(f"field {key!r} has the wrong type", f"{where}.{key}")
    return v


def _gain(d, where, key="gain"):
    if f"{key}_db" in d:
        return db_to_linear(_get(d, f"{key}_db", where))
    return _get(d, key, where)


def _frequencies(doc):
    if "frequency_grid" in doc:
        g = _get(doc, "frequency_grid", "frequency_grid", dict)
        n = _get(g, "points", "frequency_grid", int)
        if n < 1:
            raise SchemaError("points must be >= 1", "frequency_grid.points")
        return np.linspace(_get(g, "start_hz", "frequency_grid"), _get(g, "stop_hz", "frequency_grid"), n)
    if "frequencies_hz" in doc:
        fs = _get(doc, "frequencies_hz", "frequencies_hz", list)
        if not fs:
            raise SchemaError("empty frequency list", "frequencies_hz")
        return np.array([_get({"f": f}, "f", f"frequencies_hz[{i}]") for i, f in enumerate(fs)])
    return np.array([_get(doc, "frequency_hz", "scenario")])


def _setpoints(doc, where="setpoints"):
    sp = _get(doc, "setpoints", "scenario", dict)
    if "preset" in sp:
        if sp["preset"] != "standard_sntj":
            raise SchemaError(f"unknown setpoint preset {sp['preset']!r}", f"{where}.preset")
        return default_sntj_biases()
    if "values" in sp:
        vals = _get(sp, "values", where, list)
        x = np.array([_get({"v": v}, "v", f"{where}.values[{i}]") for i, v in enumerate(vals)])
    else:
        n = _get(sp, "points", where, int)
        x = np.linspace(_get(sp, "start", where), _get(sp, "stop", where), max(n, 0))
    if x.size == 0:
        raise SchemaError("no setpoints", where)
    if x.size > 1 and not (np.all(np.diff(x) > 0) or np.all(np.diff(x) < 0)):
        raise SchemaError("setpoints must be strictly monotone", where)
    return x


def _acquisition(doc, seed):
    a = doc.get("acquisition")
    if a is None:
        return None
    if not isinstance(a, dict):
        raise SchemaError("acquisition must be an object or null", "acquisition")
    try:
        if "preset" in a:
            presets = {"phase_insensitive": AcquisitionSettings.phase_insensitive,
                       "phase_sensitive": AcquisitionSettings.phase_sensitive}
            if a["preset"] not in presets:
                raise SchemaError(f"unknown acquisition preset {a['preset']!r}", "acquisition.preset")
            return presets[a["preset"]](seed)
        if "n_eff" in a:
            return AcquisitionSettings.from_n_eff(_get(a, "n_eff", "acquisition"), seed)
        return AcquisitionSettings(
            rbw=_get(a, "rbw_hz", "acquisition"), vbw=_get(a, "vbw_hz", "acquisition"),
            points_per_sweep=_get(a, "points_per_sweep", "acquisition", int),
            sweep_time=_get(a, "sweep_time_s", "acquisition"),
            trace_averages=_get(a, "trace_averages", "acquisition", int), rng_seed=seed)
    except ValueError as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError(str(exc), "acquisition") from None


def scenario_from_dict(doc, seed=None):
    """Parse a scenario document (see the README for the schema).

    `seed` overrides the document's ``seed``.  Raises SchemaError with the
    offending field path.
    """
    if not isinstance(doc, dict):
        raise SchemaError("scenario must be a JSON object")
    if doc.get("schema_version") != SCENARIO_SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema_version {doc.get('schema_version')!r}", "schema_version")
    seed = _get(doc, "seed", "scenario", int, default=0) if seed is None else seed
    if seed < 0:
        raise SchemaError("seed must be >= 0", "seed")
    freqs = _frequencies(doc)
    if np.any(freqs <= 0):
        raise SchemaError("frequencies must be > 0", "frequencies")
    x = _setpoints(doc)
    src = _get(doc, "source", "scenario", dict)
    stype = src.get("type")
    if stype == "sntj":
        if "electron_temperatures_k" in src:
            temps = _get(src, "electron_temperatures_k", "source", list)
        else:
            temps = [_get(src, "electron_temperature_k", "source")]
        if not temps:
            raise SchemaError("no electron temperatures", "source")
        try:
            sources = [SntjSource(0.0, float(t)) for t in temps]
        except (TypeError, ValueError) as exc:
            raise SchemaError(str(exc), "source.electron_temperatures_k") from None
    elif stype == "vts":
        sources = [JohnsonSource(0.0)]
        if np.any(x < 0):
            raise SchemaError("temperatures must be >= 0", "setpoints")
    else:
        raise SchemaError(f"unknown source type {stype!r}", "source.type")

    ch = _get(doc, "chain", "scenario", dict)
    ctype = ch.get("type")
    compression = None
    try:
        if ctype == "effective":
            eff = EffectiveAmplifier(_gain(ch, "chain"), _get(ch, "added_noise_quanta", "chain"))

            def model_for(f):
                return eff
        elif ctype == "stages":
            pairs = chain_from_dict({"schema_version": 1, "stages": ch.get("stages")})

            def model_for(f):
                return reduce_chain(pairs, f)
        elif ctype in ("paramp", "phase_sensitive"):
            post_d = _get(ch, "post", "chain", dict)
            post = EffectiveAmplifier(_gain(post_d, "chain.post"),
                                      _get(post_d, "added_noise_quanta", "chain.post"))
            g = _gain(ch, "chain")
            if ctype == "phase_sensitive":
                ps = PhaseSensitiveParamp(g, 0.0, _get(ch, "eta_s", "chain", default=1.0),
                                          _get(ch, "eta_i", "chain", default=1.0),
                                          _get(ch, "excess", "chain", default=0.0))
                psc = PhaseSensitiveChain(ps, _get(ch, "alpha_rad", "chain", default=0.0), post)

                def model_for(f):
                    return psc
            else:
                p = PhaseInsensitiveParamp(
                    g, _gain(ch, "chain", "idler_gain") if ("idler_gain" in ch or "idler_gain_db" in ch) else g,
                    _get(ch, "excess_ss", "chain", default=0.0), _get(ch, "excess_is", "chain", default=0.0),
                    _get(ch, "eta_s", "chain", default=1.0), _get(ch, "eta_i", "chain", default=1.0),
                    _get(ch, "loss_temperature_k", "chain", default=0.0))
                f_i = _get(ch, "idler_frequency_hz", "chain", required=False)
                if "compression" in ch:
                    comp = _get(ch, "compression", "chain", dict)
                    if freqs.size != 1 or len(sources) != 1 or stype != "sntj":
                        raise SchemaError("compression needs one frequency and one SNTJ temperature",
                                          "chain.compression")
                    grid = np.linspace(x.min(), x.max(), 401)
                    compression = logistic_compression_curve(
                        grid, float(freqs[0]), sources[0].electron_temperature,
                        _get(comp, "n_1db_quanta", "chain.compression", default=2.1),
                        _get(comp, "width_quanta", "chain.compression", default=1.5),
                        small_signal_gain=g)
                pc = ParampChain(p, post, compression, f_i)

                def model_for(f):
                    return pc
        else:
            raise SchemaError(f"unknown chain type {ctype!r}", "chain.type")
    except SchemaError:
        raise
    except ValueError as exc:
        raise SchemaError(str(exc), "chain") from None

    return Scenario(model_for, sources, x, freqs, _acquisition(doc, seed),
                    _get(doc, "bias_offset_v", "scenario", default=0.0), compression)
