"""Amplification chains: loss/amplifier stages, Friis reduction, reference planes.

A chain is a list of ``(LossStage, AmplifierStage)`` pairs.  Each pair
reduces to an :class:`EffectiveAmplifier` (gain ``eta*G``, noise
``((1-eta) N_T + N) / eta``) and the pairs cascade with the Friis formula.
Loss temperatures stay in kelvin until a frequency is supplied.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateChainError, SchemaError, UnphysicalResultWarning
from .quanta import db_to_linear
from .sources import johnson_noise

CHAIN_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class LossStage:
    efficiency: float = 1.0
    temperature: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.efficiency <= 1.0):
            raise ValueError(f"loss efficiency must be in (0, 1], got {self.efficiency}")
        if not (np.isfinite(self.temperature) and self.temperature >= 0):
            raise ValueError("loss temperature must be finite and >= 0")

    @property
    def insertion_loss_db(self):
        return 10.0 * math.log10(1.0 / self.efficiency)


@dataclass(frozen=True)
class AmplifierStage:
    gain: float = 1.0
    added_noise: float = 0.0

    def __post_init__(self):
        if not self.gain >= 1.0:
            raise ValueError(f"amplifier gain must be >= 1, got {self.gain}")
        if not (np.isfinite(self.added_noise) and self.added_noise >= 0):
            raise ValueError("added noise must be finite and >= 0")


@dataclass(frozen=True)
class EffectiveAmplifier:
    gain: float
    added_noise: float

    def output(self, n_in):
        return chain_output(self, n_in)


def compose_stage(loss, amp, f):
    """Fold a loss stage into the amplifier that follows it."""
    eta = loss.efficiency
    if eta <= 0:
        raise DegenerateChainError("zero transmission efficiency")
    n_t = johnson_noise(loss.temperature, f)
    return EffectiveAmplifier(eta * amp.gain, ((1.0 - eta) * n_t + amp.added_noise) / eta)


def _as_effective(stage, f):
    if isinstance(stage, EffectiveAmplifier):
        return stage
    loss, amp = stage
    return compose_stage(loss, amp, f)


def reduce_chain(stages, f):
    """Reduce a chain to ``(G_sys, N_sys)`` with the Friis formula.

    `stages` holds ``(LossStage, AmplifierStage)`` pairs or already-reduced
    :class:`EffectiveAmplifier` objects, in signal order.
    """
    stages = list(stages)
    if not stages:
        raise DegenerateChainError("empty chain")
    gain = 1.0
    noise = 0.0
    for stage in stages:
        eff = _as_effective(stage, f)
        noise += eff.added_noise / gain
        gain *= eff.gain
    return EffectiveAmplifier(gain, noise)


def chain_output(eff, n_in):
    """``G_sys (n_in + N_sys)``."""
    n_in = np.asarray(n_in, dtype=float)
    if np.any(n_in < 0):
        raise ValueError("input noise must be >= 0")
    out = eff.gain * (n_in + eff.added_noise)
    return float(out) if out.ndim == 0 else out


def propagate(stages, n_in, f):
    """Push `n_in` through every loss and amplifier in turn (no reduction)."""
    n = np.asarray(n_in, dtype=float)
    for loss, amp in stages:
        n = loss.efficiency * n + (1.0 - loss.efficiency) * johnson_noise(loss.temperature, f)
        n = amp.gain * (n + amp.added_noise)
    return float(n) if np.ndim(n) == 0 else n


def move_reference_plane(n_sys_ex, eta1, n_t1=0.5):
    """Remove the loss ahead of the first (parametric) amplifier from a system-excess noise.

    Assumes equal efficiencies at signal and idler: ``eta n - 2 (1 - eta) N_T``.
    The corrected system-added noise is the result plus 1/2.  A negative
    result is returned as-is with an :class:`UnphysicalResultWarning`.
    """
    return move_reference_plane_general(n_sys_ex, eta1, eta1, n_t1)


def move_reference_plane_general(n_sys_ex, eta_s, eta_i, n_t1=0.5, idler_gain_ratio=None):
    """Reference-plane correction with distinct signal/idler efficiencies.

    `idler_gain_ratio` is the raw ``G1^i / G1``; by default it is the value
    that makes the effective gains equal, ``eta_s / eta_i``.
    """
    if not (0.0 < eta_s <= 1.0) or not (0.0 < eta_i <= 1.0):
        raise ValueError("efficiencies must be in (0, 1]")
    ratio = eta_s / eta_i if idler_gain_ratio is None else idler_gain_ratio
    corr = (eta_s * np.asarray(n_sys_ex, dtype=float)
            - (1.0 - eta_s) * n_t1 - ratio * (1.0 - eta_i) * n_t1)
    if np.any(corr < 0):
        warnings.warn("reference-plane correction over-subtracts (negative excess noise)",
                      UnphysicalResultWarning, stacklevel=2)
    return float(corr) if corr.ndim == 0 else corr


def efficiency_from_gains(g_near, g_far):
    """Transmission efficiency between two reference planes from their system gains.

    `g_near` is referred to the plane closer to the source (e.g. the SNTJ
    output), `g_far` to the plane further down (e.g. the VTS output).
    Returns ``{"eta": ..., "insertion_loss_db": ...}``.
    """
    g_near = np.asarray(g_near, dtype=float)
    g_far = np.asarray(g_far, dtype=float)
    if np.any(g_near <= 0) or np.any(g_far <= 0):
        raise ValueError("gains must be > 0")
    eta = g_near / g_far
    if np.any(eta > 1):
        warnings.warn("efficiency above 1: inconsistent gain measurements",
                      UnphysicalResultWarning, stacklevel=2)
    il = 10.0 * np.log10(1.0 / eta)
    if eta.ndim == 0:
        return {"eta": float(eta), "insertion_loss_db": float(il)}
    return {"eta": eta, "insertion_loss_db": il}


# -- chain description documents --------------------------------------------

def _number(d, key, where, default=None):
    if key not in d:
        if default is not None:
            return default
        raise SchemaError(f"missing field {key!r}", where)
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise SchemaError(f"field {key!r} must be a finite number", where)
    return float(v)


def _stage_from_dict(d, where):
    if not isinstance(d, dict):
        raise SchemaError("stage must be an object", where)
    kind = d.get("kind")
    try:
        if kind == "loss":
            if "insertion_loss_db" in d:
                eta = 1.0 / db_to_linear(_number(d, "insertion_loss_db", where))
            else:
                eta = _number(d, "efficiency", where)
            return LossStage(eta, _number(d, "temperature_k", where, 0.0))
        if kind == "amplifier":
            if "gain_db" in d:
                gain = db_to_linear(_number(d, "gain_db", where))
            else:
                gain = _number(d, "gain", where)
            return AmplifierStage(gain, _number(d, "added_noise_quanta", where, 0.0))
    except ValueError as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError(str(exc), where) from None
    raise SchemaError(f"unknown stage kind {kind!r}", where)


def chain_from_dict(doc):
    """Parse a chain document into ``(LossStage, AmplifierStage)`` pairs.

    A loss followed by an amplifier forms one pair; a lone loss gets a unit
    amplifier and a lone amplifier a unit (lossless) loss.
    """
    if not isinstance(doc, dict):
        raise SchemaError("chain document must be an object")
    version = doc.get("schema_version")
    if version != CHAIN_SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema_version {version!r}", "schema_version")
    raw = doc.get("stages")
    if not isinstance(raw, list) or not raw:
        raise SchemaError("'stages' must be a non-empty list", "stages")
    parsed = [_stage_from_dict(s, f"stages[{i}]") for i, s in enumerate(raw)]

    pairs = []
    pending = None
    for st in parsed:
        if isinstance(st, LossStage):
            if pending is not None:
                pairs.append((pending, AmplifierStage()))
            pending = st
        else:
            pairs.append((pending or LossStage(), st))
            pending = None
    if pending is not None:
        pairs.append((pending, AmplifierStage()))
    return pairs


def chain_to_dict(stages):
    out = []
    for loss, amp in stages:
        out.append({"kind": "loss", "efficiency": loss.efficiency, "temperature_k": loss.temperature})
        out.append({"kind": "amplifier", "gain": amp.gain, "added_noise_quanta": amp.added_noise})
    return {"schema_version": CHAIN_SCHEMA_VERSION, "stages": out}


def load_chain(path):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc.msg}", f"line {exc.lineno}") from None
    return chain_from_dict(doc)
