import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisecal.errors import (BoundActiveWarning, InsufficientDataError, NoiseCalError,
                             SchemaError)
from noisecal.fitting import (FitModel, NoiseCurve, fit_asymptotes, fit_curve, fit_full,
                              fit_saturation_corrected, fit_window_sweep, lag1_autocorrelation,
                              model_jacobian, model_output, read_curves_csv, write_curves_csv)
from noisecal.paramp import logistic_compression_curve
from noisecal.quanta import psd_from_quanta
from noisecal.sources import johnson_noise, sntj_noise

F = 6e9
V = np.linspace(-1e-3, 1e-3, 81)


def make_curve(model, g, n, v_offs=0.0, t_e=0.0, setpoints=V, unit="V", lam=None, f=F):
    blank = NoiseCurve(f, setpoints, np.ones_like(setpoints), unit, lambda_curve=lam)
    y = model_output(blank, model, g, n, v_offs, t_e)
    if lam is not None:
        y = y * lam(setpoints)
    return NoiseCurve(f, setpoints, y, unit, lambda_curve=lam)


@pytest.mark.parametrize("kind", ["single_input", "two_input", "ps_quadrature"])
@pytest.mark.parametrize("t_e", [0.0, 0.05])
def test_noiseless_recovery(kind, t_e):
    model = FitModel(kind=kind, t_e=t_e)
    curve = make_curve(model, 1e9, 1.3, t_e=t_e)
    res = fit_curve(curve, model)
    assert res.g_sys == pytest.approx(1e9, rel=1e-6)
    assert res.noise == pytest.approx(1.3, rel=1e-6, abs=1e-6)
    assert res.converged
    assert res.stage == "full"


def test_noiseless_recovery_saturated():
    lam = logistic_compression_curve(V, F, 0.03, n_1db=20.0, small_signal_gain=200.0)
    model = FitModel(kind="two_input_saturated", t_e=0.03, n2_over_g1=0.1)
    curve = make_curve(model, 2e9, 0.3, t_e=0.03, lam=lam)
    res = fit_curve(curve, model)
    assert res.g_sys == pytest.approx(2e9, rel=1e-6)
    assert res.noise == pytest.approx(0.3, abs=1e-6)
    assert res.n_sys == pytest.approx(0.5 + 0.3 + 0.1, abs=1e-6)
    res2 = fit_saturation_corrected(make_curve(model, 2e9, 0.3, t_e=0.03, lam=lam).subset(
        np.ones(V.size, bool)), lam, 20.0, 200.0, FitModel.jpa(0.03))
    assert res2.noise == pytest.approx(0.3, abs=1e-6)


def test_saturated_model_needs_lambda():
    model = FitModel(kind="two_input_saturated", t_e=0.0, n2_over_g1=0.1)
    with pytest.raises(NoiseCalError):
        fit_curve(NoiseCurve(F, V, np.ones_like(V)), model)
    with pytest.raises(ValueError):
        FitModel(kind="two_input_saturated")


def test_free_electron_temperature():
    model = FitModel(kind="single_input")
    curve = make_curve(model, 1e9, 1.0, t_e=0.1)
    res = fit_curve(curve, model)
    assert res.t_e == pytest.approx(0.1, rel=1e-6)
    assert "t_e" in res.stderr


def test_asymptotes_exact_on_linear_law():
    model = FitModel(kind="two_input", t_e=0.0)
    curve = make_curve(model, 5e8, 2.0, v_offs=3e-6)
    res = fit_asymptotes(curve, model)
    assert res.g_sys == pytest.approx(5e8, rel=1e-10)
    assert res.noise == pytest.approx(2.0, rel=1e-10)
    assert res.v_offs == pytest.approx(3e-6, rel=1e-9)
    assert res.stage == "asymptotes"


def test_offset_recovery():
    model = FitModel(kind="single_input", t_e=0.02)
    res = fit_curve(make_curve(model, 1e9, 1.0, v_offs=-7e-6, t_e=0.02), model)
    assert res.v_offs == pytest.approx(-7e-6, abs=1e-9)
    assert res.g_sys == pytest.approx(1e9, rel=1e-6)


def test_fixed_offset_is_respected():
    model = FitModel(kind="single_input", t_e=0.0, v_offs=0.0)
    res = fit_curve(make_curve(model, 1e9, 1.0), model)
    assert res.v_offs == 0.0
    assert "v_offs" in res.fixed


@settings(max_examples=15, deadline=None)
@given(st.floats(1e-3, 1e3))
def test_scale_equivariance(c):
    model = FitModel(kind="single_input", t_e=0.05)
    curve = make_curve(model, 1e8, 0.8, t_e=0.05)
    scaled = NoiseCurve(F, curve.setpoints, c * curve.outputs)
    a, b = fit_curve(curve, model), fit_curve(scaled, model)
    assert b.g_sys == pytest.approx(c * a.g_sys, rel=1e-10)
    assert b.noise == pytest.approx(a.noise, rel=1e-10, abs=1e-10)


def test_single_model_on_two_mode_data_doubles_gain():
    two = FitModel(kind="two_input", t_e=0.0)
    curve = make_curve(two, 1e9, 0.4)
    right = fit_curve(curve, two)
    wrong = fit_curve(curve, FitModel(kind="single_input", t_e=0.0))
    assert wrong.g_sys == pytest.approx(2 * right.g_sys, rel=1e-9)
    assert wrong.noise == pytest.approx(right.noise / 2, rel=1e-9)


def test_idler_frequency_is_used():
    model = FitModel(kind="two_input", t_e=0.0, idler_frequency=5e9)
    curve = make_curve(model, 1e9, 0.4)
    res = fit_curve(curve, model)
    assert res.noise == pytest.approx(0.4, rel=1e-9)
    same = fit_curve(curve, FitModel(kind="two_input", t_e=0.0))
    assert abs(same.noise - 0.4) > 1e-3


def test_nsys_by_kind():
    base = dict(frequency=F, g_sys=1.0, noise=0.2, v_offs=0.0, t_e=0.0, stderr={},
                residuals=np.zeros(3), setpoints=np.zeros(3), window={})
    from noisecal.fitting import FitResult
    assert FitResult(kind="single_input", **base).n_sys == 0.2
    assert FitResult(kind="two_input", **base).n_sys == pytest.approx(0.7)
    assert FitResult(kind="two_input_saturated", n2_over_g1=0.1, **base).n_sys == pytest.approx(0.8)


def test_vts_curve():
    temps = np.linspace(0.02, 1.0, 25)
    model = FitModel(kind="single_input")
    curve = make_curve(model, 3e7, 12.0, setpoints=temps, unit="K")
    assert curve.source_kind == "vts"
    res = fit_curve(curve, model)
    assert res.g_sys == pytest.approx(3e7, rel=1e-9)
    assert res.noise == pytest.approx(12.0, rel=1e-9)
    assert res.v_offs == 0.0 and res.t_e is None
    np.testing.assert_allclose(curve.outputs, 3e7 * (johnson_noise(temps, F) + 12.0))


def test_insufficient_data():
    model = FitModel(kind="single_input", t_e=0.0)
    few = make_curve(model, 1e9, 1.0, setpoints=np.linspace(-2e-5, 2e-5, 9))
    with pytest.raises(InsufficientDataError):
        fit_asymptotes(few, model)
    with pytest.raises(InsufficientDataError):
        fit_window_sweep(make_curve(model, 1e9, 1.0), model, [0.1])


def test_bound_warning():
    model = FitModel(kind="single_input", t_e=0.0)
    curve = make_curve(model, 1e9, 1.0)
    seed = fit_asymptotes(curve, model)
    from dataclasses import replace
    bad = replace(seed, g_sys=3e9)
    with pytest.warns(BoundActiveWarning):
        res = fit_full(curve, model, bad)
    assert "g_sys" in res.active_bounds


def test_jacobian_matches_differences():
    model = FitModel(kind="two_input")
    curve = NoiseCurve(F, V, np.ones_like(V))
    p = np.array([1e9, 0.7, 2e-6, 0.08])  # g_sys, noise, v_offs, t_e
    jac = model_jacobian(curve, model, *p)[:, [0, 1, 3, 2]]
    for j in range(4):
        h = 1e-6 * max(abs(p[j]), 1e-5)
        up, dn = p.copy(), p.copy()
        up[j] += h
        dn[j] -= h
        fd = (model_output(curve, model, *up) - model_output(curve, model, *dn)) / (2 * h)
        np.testing.assert_allclose(jac[:, j], fd, rtol=1e-5, atol=1e-6 * np.abs(jac[:, j]).max())


def test_window_sweep_linear_data():
    model = FitModel(kind="single_input", t_e=0.03)
    curve = make_curve(model, 1e9, 1.0, t_e=0.03)
    fits = fit_window_sweep(curve, model, [2, 4, 8, 16])
    for r in fits:
        assert r.g_sys == pytest.approx(1e9, rel=1e-8)
        assert r.noise == pytest.approx(1.0, rel=1e-8)
        assert r.window["half_width_quanta"] is not None
        assert "residual_autocorrelation" in r.diagnostics
    sizes = [r.residuals.size for r in fits]
    assert sizes == sorted(sizes)
    with pytest.raises(ValueError):
        fit_window_sweep(curve, model, [4, 2])


def test_lag1_autocorrelation():
    assert lag1_autocorrelation([1.0, 1.0, 1.0]) == 0.0
    assert lag1_autocorrelation(np.sin(np.linspace(0, 1, 50))) > 0.9
    alt = np.array([1.0, -1.0] * 20)
    assert lag1_autocorrelation(alt) < -0.9


def test_curve_validation():
    with pytest.raises(ValueError):
        NoiseCurve(F, [0.0, 0.0, 1.0], [1.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        NoiseCurve(F, [0.0, 1.0], [1.0, np.nan])
    with pytest.raises(ValueError):
        NoiseCurve(F, [-1.0, 1.0], [1.0, 1.0], "K")
    with pytest.raises(ValueError):
        NoiseCurve(-1.0, [0.0, 1.0], [1.0, 1.0])


def test_csv_round_trip(tmp_path):
    model = FitModel(kind="single_input", t_e=0.0)
    a = make_curve(model, 1e9, 1.0, f=5e9)
    b = make_curve(model, 2e9, 1.5, f=4e9)
    path = tmp_path / "c.csv"
    write_curves_csv([a, b], path)
    back = read_curves_csv(path)
    assert [c.frequency for c in back] == [5e9, 4e9]
    np.testing.assert_array_equal(back[0].outputs, a.outputs)
    np.testing.assert_array_equal(back[1].setpoints, b.setpoints)


def test_csv_power_units(tmp_path):
    path = tmp_path / "p.csv"
    y = psd_from_quanta(np.array([10.0, 20.0, 30.0]), F)
    rows = "\n".join(f"{F!r},{x!r},V,{float(v)!r},w_per_hz" for x, v in zip([-1e-4, 0.0, 1e-4], y))
    path.write_text("frequency_hz,setpoint,setpoint_unit,output,output_unit\n" + rows + "\n")
    (c,) = read_curves_csv(path)
    np.testing.assert_allclose(c.outputs, [10.0, 20.0, 30.0], rtol=1e-12)


@pytest.mark.parametrize("body, where", [
    ("6e9,abc,V,1,quanta", "line 2"),
    ("6e9,0,mV,1,quanta", "line 2"),
    ("6e9,0,V,1,quanta\n6e9,1,V,1,dBm", "line 3"),
    ("6e9,0,V,1,quanta\n6e9,1,K,1,quanta", "line 3"),
])
def test_csv_schema_errors(tmp_path, body, where):
    path = tmp_path / "bad.csv"
    path.write_text("frequency_hz,setpoint,setpoint_unit,output,output_unit\n" + body + "\n")
    with pytest.raises(SchemaError) as info:
        read_curves_csv(path)
    assert where in info.value.location


def test_csv_missing_column(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("frequency_hz,setpoint,output\n6e9,0,1\n")
    with pytest.raises(SchemaError):
        read_curves_csv(path)


def test_result_serializes():
    model = FitModel(kind="two_input", t_e=0.0)
    res = fit_curve(make_curve(model, 1e9, 0.4), model)
    d = res.to_dict()
    assert d["n_sys"] == pytest.approx(0.9)
    assert d["kind"] == "two_input"
    import json
    json.dumps(d, allow_nan=False)


def test_model_presets():
    assert FitModel.hemt().kind == "single_input"
    assert FitModel.jtwpa(0.05).two_mode
    assert FitModel.jpa(0.0).noise_guess == 0.0
    with pytest.raises(ValueError):
        FitModel(kind="bogus")


def test_sntj_law_used_in_model():
    model = FitModel(kind="single_input")
    blank = NoiseCurve(F, V, np.ones_like(V))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        y = model_output(blank, model, 2.0, 0.5, 1e-6, 0.04)
    np.testing.assert_allclose(y, 2.0 * (sntj_noise(V - 1e-6, 0.04, F) + 0.5))
