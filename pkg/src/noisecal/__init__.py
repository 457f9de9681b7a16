"""Noise calibration of cryogenic microwave amplification chains.

Noise is expressed in photon-normalized units (quanta).  Submodules:

quanta     constants and unit conversions
sources    Johnson (VTS) and shot-noise tunnel junction emitters
chain      loss/amplifier stages, Friis reduction, reference planes
paramp     parametric amplifier models and gain compression
fitting    noise-curve fits and the least-squares engine
analysis   spectra, efficiencies, noise rise, phase-sensitive model
synth      synthetic curves with acquisition noise
cli        the ``noisecal`` command
"""

__version__ = "0.1.0"

from .chain import (AmplifierStage, EffectiveAmplifier, LossStage, compose_stage,
                    move_reference_plane, reduce_chain)
from .fitting import FitModel, FitResult, NoiseCurve, fit_asymptotes, fit_full
from .quanta import E_CHARGE, H, K_B
from .sources import johnson_noise, sntj_noise

__all__ = [
    "AmplifierStage", "E_CHARGE", "EffectiveAmplifier", "FitModel", "FitResult", "H", "K_B",
    "LossStage", "NoiseCurve", "compose_stage", "fit_asymptotes", "fit_full", "johnson_noise",
    "move_reference_plane", "reduce_chain", "sntj_noise",
]
