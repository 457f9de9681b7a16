import numpy as np
import pytest

from noisecal.chain import EffectiveAmplifier
from noisecal.errors import SchemaError
from noisecal.quanta import K_B, E_CHARGE
from noisecal.sources import JohnsonSource, SntjSource, sntj_noise
from noisecal.synth import (AcquisitionSettings, default_sntj_biases, reference_curves, forward_output,
                            generate_curve, generate_spectrum, scenario_from_dict, with_offset)

CHAIN = EffectiveAmplifier(1e9, 1.0)
V = np.linspace(-1e-3, 1e-3, 41)


def test_default_acquisition():
    acq = AcquisitionSettings.phase_insensitive()
    assert acq.n_eff == pytest.approx(1500 * 8e6 * 0.05 / 501)
    assert acq.n_eff == pytest.approx(1.2e6, rel=0.01)
    assert AcquisitionSettings.phase_sensitive().n_eff < acq.n_eff
    assert AcquisitionSettings.from_n_eff(1e6).n_eff == 1e6
    with pytest.raises(ValueError):
        AcquisitionSettings(vbw=1e7)


def test_default_biases():
    v = default_sntj_biases()
    assert v.size == 10
    assert E_CHARGE * v[-1] / (2 * K_B) == pytest.approx(0.5)
    assert v[-1] == pytest.approx(86.17e-6, rel=1e-3)


def test_noiseless_forward_model():
    c = generate_curve(CHAIN, SntjSource(0.0, 0.1), V, 6e9, bias_offset=1e-5)
    np.testing.assert_allclose(c.outputs, 1e9 * (sntj_noise(V - 1e-5, 0.1, 6e9) + 1.0))
    assert c.metadata["truth"]["g_sys"] == 1e9
    assert c.metadata["n_eff"] is None


def test_vts_forward_model():
    t = np.linspace(0.01, 1.0, 5)
    c = generate_curve(CHAIN, JohnsonSource(0.0), t, 6e9)
    assert c.setpoint_unit == "K"
    with pytest.raises(ValueError):
        forward_output(CHAIN, JohnsonSource(0.0), [-1.0, 1.0], 6e9)


def test_determinism_and_independence():
    acq = AcquisitionSettings.from_n_eff(1e4, rng_seed=3)
    a = generate_spectrum(CHAIN, SntjSource(0.0, 0.0), V, [5e9, 6e9], acq)
    b = generate_spectrum(CHAIN, SntjSource(0.0, 0.0), V, [5e9, 6e9], acq)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.outputs, y.outputs)
    ea = a[0].outputs / forward_output(CHAIN, SntjSource(0.0, 0.0), V, 5e9) - 1
    eb = a[1].outputs / forward_output(CHAIN, SntjSource(0.0, 0.0), V, 6e9) - 1
    assert not np.allclose(ea, eb)
    other = generate_spectrum(CHAIN, SntjSource(0.0, 0.0), V,
                              [5e9], AcquisitionSettings.from_n_eff(1e4, rng_seed=4))
    assert not np.array_equal(other[0].outputs, a[0].outputs)


def test_noise_scaling():
    x = np.linspace(-1e-3, 1e-3, 10000)
    clean = forward_output(CHAIN, SntjSource(0.0, 0.0), x, 6e9)
    for n_eff in (1e2, 1e4, 1e6):
        c = generate_curve(CHAIN, SntjSource(0.0, 0.0), x, 6e9, AcquisitionSettings.from_n_eff(n_eff))
        rel = c.outputs / clean - 1
        assert np.std(rel) == pytest.approx(n_eff ** -0.5, rel=0.05)
        assert abs(np.mean(rel)) < 5 * n_eff ** -0.5 / 100


def test_reference_curves():
    curves = reference_curves()
    assert [c.metadata["electron_temperature"] for c in curves] == [0.0, 0.1]
    assert all(c.frequency == 6e9 and len(c) == 201 for c in curves)
    shifted = with_offset(curves[0], 1e-6)
    assert shifted.setpoints[0] == pytest.approx(-1e-3 + 1e-6)


def base_doc(**kw):
    doc = {"schema_version": 1, "frequency_hz": 6e9,
           "chain": {"type": "effective", "gain": 1e9, "added_noise_quanta": 1.0},
           "source": {"type": "sntj", "electron_temperatures_k": [0.0, 0.1]},
           "setpoints": {"start": -1e-3, "stop": 1e-3, "points": 21},
           "acquisition": {"n_eff": 1e6}, "seed": 7}
    doc.update(kw)
    return doc


def test_scenario_generation():
    sc = scenario_from_dict(base_doc(frequency_grid={"start_hz": 3.5e9, "stop_hz": 8.5e9,
                                                     "points": 501}))
    assert sc.frequencies.size == 501
    assert sc.frequencies[0] == 3.5e9 and sc.frequencies[-1] == 8.5e9
    assert sc.acquisition.rng_seed == 7
    sets = scenario_from_dict(base_doc()).generate()
    assert len(sets) == 2 and len(sets[0][1]) == 1
    again = scenario_from_dict(base_doc()).generate()
    np.testing.assert_array_equal(sets[1][1][0].outputs, again[1][1][0].outputs)
    assert scenario_from_dict(base_doc(), seed=8).acquisition.rng_seed == 8


def test_scenario_paramp_with_compression():
    doc = base_doc(chain={"type": "paramp", "gain_db": 23.8, "excess_ss": 0.15, "excess_is": 0.15,
                          "post": {"gain": 1e7, "added_noise_quanta": 33.0},
                          "compression": {"n_1db_quanta": 2.1}},
                   source={"type": "sntj", "electron_temperature_k": 0.03})
    sc = scenario_from_dict(doc)
    assert sc.compression is not None
    (_, (curve,)), = sc.generate()
    assert curve.lambda_curve is sc.compression
    assert curve.metadata["truth"]["kind"] == "two_input_saturated"


@pytest.mark.parametrize("patch, where", [
    ({"schema_version": 2}, "schema_version"),
    ({"chain": {"type": "warp"}}, "chain.type"),
    ({"source": {"type": "laser"}}, "source.type"),
    ({"chain": {"type": "effective", "gain": "big", "added_noise_quanta": 1}}, "chain.gain"),
    ({"setpoints": {"values": [0.0, 0.0, 1.0]}}, "setpoints"),
    ({"setpoints": {"preset": "other"}}, "setpoints.preset"),
    ({"acquisition": {"preset": "other"}}, "acquisition.preset"),
    ({"frequencies_hz": []}, "frequencies_hz"),
    ({"seed": -1}, "seed"),
])
def test_scenario_errors(patch, where):
    with pytest.raises(SchemaError) as info:
        scenario_from_dict(base_doc(**patch))
    assert info.value.location.startswith(where)


def test_compression_needs_single_bin():
    doc = base_doc(chain={"type": "paramp", "gain": 100.0,
                          "post": {"gain": 1e7, "added_noise_quanta": 33.0},
                          "compression": {}})
    with pytest.raises(SchemaError):
        scenario_from_dict(doc)
