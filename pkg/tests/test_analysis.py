import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from noisecal.analysis import (SpectralResult, efficiency_spectrum, model_misinterpretation_report,
                               n1_from_noise_rise, noise_rise, ps_predictive_model,
                               reference_plane_spectrum, yfactor_spectrum)
from noisecal.chain import AmplifierStage, EffectiveAmplifier, LossStage, reduce_chain
from noisecal.errors import NoiseCalError, UnphysicalResultWarning
from noisecal.fitting import FitModel, NoiseCurve
from noisecal.paramp import ParampChain, PhaseInsensitiveParamp
from noisecal.sources import SntjSource
from noisecal.synth import generate_spectrum

V = np.linspace(-1e-3, 1e-3, 81)
FREQS = np.linspace(4e9, 8e9, 5)


def hemt_spectrum(loss=None):
    stages = [(LossStage(1.0 if loss is None else loss, 0.0), AmplifierStage(1e4, 5.0)),
              (LossStage(0.9, 4.0), AmplifierStage(1e3, 30.0))]
    return generate_spectrum(lambda f: reduce_chain(stages, f), SntjSource(0.0, 0.02), V, FREQS)


def test_yfactor_spectrum_recovers_truth():
    curves = hemt_spectrum()
    res = yfactor_spectrum(curves, FitModel(kind="single_input", t_e=0.02))
    truth = [c.metadata["truth"] for c in curves]
    np.testing.assert_allclose(res.g_sys, [t["g_sys"] for t in truth], rtol=1e-6)
    np.testing.assert_allclose(res.noise, [t["noise"] for t in truth], rtol=1e-6)
    assert res.ok.all()


def test_failed_bin_is_marked():
    curves = hemt_spectrum()
    curves[2] = NoiseCurve(curves[2].frequency, V[:3], curves[2].outputs[:3])
    res = yfactor_spectrum(curves, FitModel(kind="single_input", t_e=0.02))
    assert res.status[2].startswith("failed")
    assert math.isnan(res.g_sys[2])
    assert np.all(np.isfinite(np.delete(res.g_sys, 2)))
    assert res.to_dict()["g_sys"][2] is None


def test_efficiency_and_reference_plane():
    model = FitModel(kind="single_input", t_e=0.02)
    far = yfactor_spectrum(hemt_spectrum(), model)
    near = yfactor_spectrum(hemt_spectrum(loss=0.5), model)
    eff = efficiency_spectrum(near, far)
    assert [e["eta"] for e in eff] == pytest.approx([0.5] * FREQS.size, rel=1e-6)
    assert eff[0]["insertion_loss_db"] == pytest.approx(3.0103, abs=1e-3)
    moved = reference_plane_spectrum(near, [e["eta"] for e in eff])
    np.testing.assert_allclose(moved.noise, far.noise, rtol=1e-6)
    np.testing.assert_allclose(moved.g_sys, far.g_sys, rtol=1e-6)
    same = efficiency_spectrum(far, far)
    assert all(e["eta"] == 1.0 for e in same)


def test_two_input_reference_plane():
    r = SpectralResult("two_input", [6e9], [1e9], [0.6], [1.1], [0.0], [0.0], [0.0])
    moved = reference_plane_spectrum(r, [0.8])
    # vacuum in the loss: 0.8 * 0.6 - 2 * 0.2 * 0.5
    assert moved.noise[0] == pytest.approx(0.28)
    assert moved.n_sys[0] == pytest.approx(0.78)
    assert moved.g_sys[0] == pytest.approx(1.25e9)
    with pytest.warns(UnphysicalResultWarning):
        reference_plane_spectrum(r, [0.1], loss_temperature=1.0)


def test_grid_mismatch():
    a = SpectralResult("single_input", [1e9, 2e9], *[[1.0, 1.0]] * 6)
    b = SpectralResult("single_input", [1e9, 3e9], *[[1.0, 1.0]] * 6)
    with pytest.raises(NoiseCalError):
        efficiency_spectrum(a, b)
    with pytest.raises(NoiseCalError):
        reference_plane_spectrum(a, [1.0])


def test_spectral_result_io(tmp_path):
    res = yfactor_spectrum(hemt_spectrum(), FitModel(kind="single_input", t_e=0.02))
    res.write_json(tmp_path / "s.json")
    import json
    back = SpectralResult.from_dict(json.loads((tmp_path / "s.json").read_text()))
    np.testing.assert_array_equal(back.g_sys, res.g_sys)
    res.write_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0].startswith("frequency_hz,")
    assert len(lines) == FREQS.size + 1
    with pytest.raises(NoiseCalError):
        SpectralResult.from_dict({"kind": "x"})


def test_noise_rise_value():
    assert noise_rise(200.0, 0.5, 0.5, 33.0) == pytest.approx(5.970149, rel=1e-6)


@given(st.floats(1.0, 1e4), st.floats(0.5, 10), st.floats(0.0, 10), st.floats(1.0, 100))
def test_noise_rise_inverse(g1, n_in, n1, n2):
    r = noise_rise(g1, n_in, n1, n2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UnphysicalResultWarning)
        est = n1_from_noise_rise(g1, n_in, n2, r)
    assert est.n1 == pytest.approx(n1, rel=1e-9, abs=1e-9)
    assert est.optimistic_bias


def test_noise_rise_unphysical():
    with pytest.warns(UnphysicalResultWarning):
        est = n1_from_noise_rise(200.0, 0.5, 33.0, 0.1)
    assert est.unphysical
    with pytest.raises(ValueError):
        noise_rise(0.0, 0.5, 0.5, 33.0)


def test_ps_predictive_model():
    m = 10 ** 1.95
    a = np.linspace(-np.pi, np.pi, 721)
    out = ps_predictive_model(m, 10 ** 7.2, 33.0, 0.0, a)
    assert out["n_sys"][360] == pytest.approx(0.0, abs=1e-12)
    a_min = a[np.argmin(out["n_sys"])]
    assert np.sin(a_min) == pytest.approx(0.0, abs=1e-12)
    assert out["n_sys"][540] == pytest.approx(33.0 * (m - 1 / m), rel=1e-9)
    np.testing.assert_allclose(out["n_sys"][:361], out["n_sys"][360:], rtol=1e-9, atol=1e-9)
    assert out["g_sys"][360] == pytest.approx(10 ** 7.2 * m)
    with pytest.raises(ValueError):
        ps_predictive_model(1.0, 1.0, 1.0, 0.0, a)


def test_misinterpretation_report():
    chain = ParampChain(PhaseInsensitiveParamp.ideal(100.0), EffectiveAmplifier(1e7, 20.0))
    (curve,) = generate_spectrum(chain, SntjSource(0.0, 0.0), V, [6e9])
    g_true = curve.metadata["truth"]["g_sys"]
    rep = model_misinterpretation_report(curve, t_e=0.0, reference_gain=g_true)
    assert rep["slope_ratio"] == pytest.approx(2.0, rel=1e-6)
    assert rep["warning"] is not None
    (hemt,) = generate_spectrum(EffectiveAmplifier(1e9, 5.0), SntjSource(0.0, 0.0), V, [6e9])
    rep = model_misinterpretation_report(hemt, t_e=0.0, reference_gain=1e9)
    assert rep["slope_ratio"] == pytest.approx(1.0, rel=1e-6)
    assert rep["warning"] is None
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert model_misinterpretation_report(hemt, t_e=0.0)["slope_ratio"] is None
