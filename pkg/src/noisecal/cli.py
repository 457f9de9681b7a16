"""``noisecal`` command line: simulate, fit, sweep, report and limits.

Exit codes: 0 success, 2 usage or schema error, 3 numerical failure.
Every command writes deterministic files (sorted JSON keys, ``repr``
floats) so identical inputs and seeds give identical bytes.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (SpectralResult, efficiency_spectrum, model_misinterpretation_report,
                       reference_plane_spectrum)
from .errors import NoiseCalError, PreconditionError, SchemaError
from .fitting import FitModel, fit_asymptotes, fit_full, fit_window_sweep, read_curves_csv
from .fitting.curves import write_curves_csv
from .paramp import load_compression_csv, save_compression_csv
from .quanta import db_to_linear
from .sources import (LIMIT_CASES, johnson_noise, sntj_noise, sntj_limit,
                      voltage_temperature_equivalent)
from .synth import scenario_from_dict

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3
MODEL_CHOICES = ("single_input", "two_input", "two_input_saturated", "ps_quadrature",
                 "hemt", "jtwpa", "jpa")


class UsageError(Exception):
    pass


def _clean(obj):
    """Recursively replace non-finite floats by None and numpy scalars by Python ones."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(_clean(doc), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise UsageError(f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc.msg}", f"{path}: line {exc.lineno}") from None


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _merged_config(args, fields):
    """Config document values, overridden by any flag that was given."""
    cfg = {}
    base = Path(".")
    if getattr(args, "config", None):
        cfg = _load_json(args.config)
        if not isinstance(cfg, dict):
            raise SchemaError("config must be a JSON object", args.config)
        base = Path(args.config).parent
    for name in fields:
        v = getattr(args, name, None)
        if v is not None:
            cfg[name] = v
    for key in ("curves", "lambda"):
        if isinstance(cfg.get(key), str) and not getattr(args, key, None):
            cfg[key] = str(base / cfg[key])
    return cfg


# -- simulate -------------------------------------------------------------------

def cmd_simulate(args):
    if not args.config:
        raise UsageError("simulate needs --config")
    scen = scenario_from_dict(_load_json(args.config), args.seed)
    out = _out_dir(args)
    files = []
    for j, (src, curves) in enumerate(scen.generate()):
        name = f"curves_{j:03d}.csv"
        write_curves_csv(curves, out / name)
        entry = {"file": name, "bins": []}
        if hasattr(src, "electron_temperature"):
            entry["electron_temperature_k"] = src.electron_temperature
        for c in curves:
            entry["bins"].append({"frequency_hz": c.frequency, **c.metadata["truth"]})
        files.append(entry)
    truth = {"schema_version": 1, "curves": files,
             "seed": None if scen.acquisition is None else scen.acquisition.rng_seed,
             "n_eff": None if scen.acquisition is None else scen.acquisition.n_eff,
             "bias_offset_v": scen.bias_offset}
    if scen.compression is not None:
        save_compression_csv(scen.compression, out / "lambda.csv")
        truth["lambda_file"] = "lambda.csv"
        truth["g1_small_signal"] = scen.compression.small_signal_gain
    write_json(out / "truth.json", truth)
    return EXIT_OK


# -- fit / sweep ----------------------------------------------------------------

FIT_FIELDS = ("curves", "model", "t_e_k", "idler_frequency_hz", "asymptote_factor", "lambda",
              "n2_quanta", "g1", "g1_db", "window", "windows", "reference_gain")


def _model_from_config(cfg):
    kind = cfg.get("model", "single_input")
    if kind not in MODEL_CHOICES:
        raise SchemaError(f"unknown model {kind!r}", "model")
    kw = {}
    if cfg.get("t_e_k") is not None:
        kw["t_e"] = float(cfg["t_e_k"])
    if cfg.get("idler_frequency_hz") is not None:
        kw["idler_frequency"] = float(cfg["idler_frequency_hz"])
    if cfg.get("asymptote_factor") is not None:
        kw["asymptote_factor"] = float(cfg["asymptote_factor"])
    try:
        if kind == "hemt":
            return FitModel.hemt(**kw)
        if kind in ("jtwpa", "jpa"):
            if "t_e" not in kw:
                raise SchemaError(f"model {kind!r} needs a fixed electron temperature", "t_e_k")
            t_e = kw.pop("t_e")
            return getattr(FitModel, kind)(t_e, **kw)
        if kind == "two_input_saturated":
            return FitModel(kind="two_input", **kw)  # upgraded once N2/G1 is known
        return FitModel(kind=kind, **kw)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError(str(exc), "model") from None


def _saturation(cfg, model):
    """Attach the compression curve and the fixed N2/G1 term when requested."""
    wants = cfg.get("model") == "two_input_saturated" or cfg.get("lambda") is not None
    if not wants:
        return model, None
    if cfg.get("lambda") is None:
        raise UsageError("saturated model needs a compression curve (--lambda)")
    if cfg.get("n2_quanta") is None or (cfg.get("g1") is None and cfg.get("g1_db") is None):
        raise UsageError("saturated model needs --n2 and --g1 or --g1-db")
    if not Path(cfg["lambda"]).exists():
        raise UsageError(f"file not found: {cfg['lambda']}")
    g1 = float(cfg["g1"]) if cfg.get("g1") is not None else db_to_linear(float(cfg["g1_db"]))
    lam = load_compression_csv(cfg["lambda"], g1)
    sat = replace(model, kind="two_input_saturated", n2_over_g1=float(cfg["n2_quanta"]) / g1)
    return sat, lam


def _load_curves(cfg):
    if not cfg.get("curves"):
        raise UsageError("no curve file given (--curves)")
    if not Path(cfg["curves"]).exists():
        raise UsageError(f"file not found: {cfg['curves']}")
    return read_curves_csv(cfg["curves"])


def _fit_one(curve, model, window):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if window is None:
            return fit_full(curve, model, fit_asymptotes(curve, model))
        return fit_window_sweep(curve, model, [window])[0]


def cmd_fit(args):
    cfg = _merged_config(args, FIT_FIELDS)
    model = _model_from_config(cfg)
    model, lam = _saturation(cfg, model)
    curves = _load_curves(cfg)
    window = cfg.get("window")
    results = []
    residual_rows = []
    failed = False
    for c in sorted(curves, key=lambda c: c.frequency):
        if lam is not None:
            c = replace(c, lambda_curve=lam)
        try:
            r = _fit_one(c, model, window)
        except NoiseCalError as exc:
            if isinstance(exc, SchemaError):
                raise
            failed = True
            results.append({"frequency_hz": c.frequency, "status": f"failed: {exc}"})
            continue
        d = r.to_dict()
        d["status"] = "ok" if r.converged else "not converged"
        failed |= not r.converged
        if cfg.get("reference_gain") is not None:
            ref = float(cfg["reference_gain"])
            d["slope_ratio"] = r.g_sys / ref
            if r.kind in ("single_input", "ps_quadrature") and abs(d["slope_ratio"] - 2) < 0.1:
                rep = model_misinterpretation_report(c, model.t_e, ref, model.idler_frequency,
                                                     model.asymptote_factor)
                d["warnings"].append(rep["warning"])
        results.append(d)
        for x, res in zip(r.setpoints, r.residuals):
            residual_rows.append((c.frequency, x, res))
    out = _out_dir(args)
    write_json(out / "fit.json", {"schema_version": 1, "model": model.kind, "results": results})
    with open(out / "residuals.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frequency_hz", "setpoint", "residual"])
        for row in residual_rows:
            w.writerow([repr(float(v)) for v in row])
    if failed:
        print("fit failed or did not converge in at least one bin; see fit.json", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_sweep(args):
    cfg = _merged_config(args, FIT_FIELDS)
    widths = cfg.get("windows")
    if not widths:
        raise UsageError("sweep needs window widths (--window W [W ...])")
    model = _model_from_config(cfg)
    model, lam = _saturation(cfg, model)
    rows = []
    for c in sorted(_load_curves(cfg), key=lambda c: c.frequency):
        if lam is not None:
            c = replace(c, lambda_curve=lam)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            try:
                res = fit_window_sweep(c, model, sorted(float(w) for w in widths))
            except ValueError as exc:
                if isinstance(exc, SchemaError):
                    raise
                raise NoiseCalError(str(exc)) from None
        for w, r in zip(sorted(widths), res):
            rows.append({"frequency_hz": c.frequency, "half_width_quanta": float(w), **r.to_dict()})
    out = _out_dir(args)
    write_json(out / "sweep.json", {"schema_version": 1, "model": model.kind, "windows": rows})
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        cols = ["frequency_hz", "half_width_quanta", "g_sys", "noise", "n_sys",
                "residual_autocorrelation"]
        w.writerow(cols)
        for r in rows:
            w.writerow([repr(float(r[k])) for k in cols])
    return EXIT_OK


# -- report ---------------------------------------------------------------------

def _spectrum_from_fit_json(path):
    doc = _load_json(path)
    if not isinstance(doc, dict) or not isinstance(doc.get("results"), list):
        raise SchemaError("expected a fit document with a 'results' list", str(path))
    res = sorted(doc["results"], key=lambda r: r.get("frequency_hz", 0.0))
    nan = math.nan

    def col(key, sub=None):
        vals = []
        for r in res:
            v = r.get(key) if sub is None else (r.get(key) or {}).get(sub)
            vals.append(nan if v is None else v)
        return vals

    try:
        return SpectralResult(doc.get("model", "single_input"), col("frequency_hz"), col("g_sys"),
                              col("noise"), col("n_sys"), col("stderr", "g_sys"),
                              col("stderr", "noise"), col("t_e"),
                              [r.get("status", "ok") for r in res])
    except (TypeError, ValueError) as exc:
        raise SchemaError(str(exc), str(path)) from None


def cmd_report(args):
    if not args.fits:
        raise UsageError("report needs at least one fit document (--fits)")
    spectra = [_spectrum_from_fit_json(p) for p in args.fits]
    out = _out_dir(args)
    for i, s in enumerate(spectra):
        s.write_json(out / f"spectrum_{i}.json")
        s.write_csv(out / f"spectrum_{i}.csv")
    if len(spectra) >= 2:
        eff = efficiency_spectrum(spectra[0], spectra[1])
        with open(out / "efficiency.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["frequency_hz", "eta", "insertion_loss_db"])
            for f, e in zip(spectra[0].frequencies, eff):
                w.writerow([repr(float(f)), repr(float(e["eta"])), repr(float(e["insertion_loss_db"]))])
        target = _spectrum_from_fit_json(args.correct) if args.correct else spectra[0]
        etas = np.array([e["eta"] for e in eff])
        if target.frequencies.shape != etas.shape:
            raise NoiseCalError("frequency grids do not match")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            corrected = reference_plane_spectrum(target, etas, args.loss_temperature)
        corrected.write_json(out / "corrected.json")
        corrected.write_csv(out / "corrected.csv")
    return EXIT_OK


# -- limits ---------------------------------------------------------------------

def cmd_limits(args):
    v, t, f = args.voltage, args.temperature, args.frequency
    doc = {"voltage_v": v, "electron_temperature_k": t, "frequency_hz": f,
           "sntj_quanta": sntj_noise(v, t, f), "johnson_quanta_at_t": johnson_noise(t, f),
           "temperature_equivalent_k": {
               c: voltage_temperature_equivalent(v, c) for c in ("eV_over_kB", "eV_over_2kB")},
           "limits": {}}
    for case in LIMIT_CASES:
        try:
            doc["limits"][case] = sntj_limit(v, t, f, case)
        except PreconditionError as exc:
            doc["limits"][case] = f"not applicable ({exc})"
    text = json.dumps(_clean(doc), indent=2, sort_keys=True, allow_nan=False)
    if args.out:
        out = _out_dir(args)
        (out / "limits.json").write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


# -- entry point ------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="noisecal", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate synthetic noise curves from a scenario")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_simulate)

    def fit_args(q, multi_window):
        q.add_argument("--config")
        q.add_argument("--curves")
        q.add_argument("--out", required=True)
        q.add_argument("--model", choices=MODEL_CHOICES)
        q.add_argument("--t-e", dest="t_e_k", type=float, help="fixed electron temperature (K)")
        q.add_argument("--idler-frequency", dest="idler_frequency_hz", type=float)
        q.add_argument("--asymptote-factor", type=float)
        q.add_argument("--lambda", dest="lambda", help="compression curve CSV")
        q.add_argument("--n2", dest="n2_quanta", type=float, help="second-stage noise (quanta)")
        g = q.add_mutually_exclusive_group()
        g.add_argument("--g1", type=float, help="small-signal paramp gain (linear)")
        g.add_argument("--g1-db", type=float, help="small-signal paramp gain (dB)")
        if multi_window:
            q.add_argument("--window", dest="windows", type=float, nargs="+",
                           help="window half-widths in input quanta")
        else:
            q.add_argument("--window", type=float, help="fit window half-width in input quanta")
            q.add_argument("--reference-gain", type=float,
                           help="independent system gain for the slope-ratio check")
        q.add_argument("--seed", type=int, help="accepted for interface symmetry; fits are deterministic")

    f = sub.add_parser("fit", help="two-step fit of every curve in a CSV")
    fit_args(f, False)
    f.set_defaults(func=cmd_fit)

    w = sub.add_parser("sweep", help="fit over windows of increasing width")
    fit_args(w, True)
    w.set_defaults(func=cmd_sweep)

    r = sub.add_parser("report", help="spectra, efficiency and reference-plane correction")
    r.add_argument("--fits", nargs="+", required=True,
                   help="fit.json files; with two, the first is the near and the second the far plane")
    r.add_argument("--correct", help="fit.json whose spectrum is moved to the far plane")
    r.add_argument("--loss-temperature", type=float, default=0.0)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_report)

    lim = sub.add_parser("limits", help="SNTJ noise and its limit forms at one operating point")
    lim.add_argument("--voltage", type=float, required=True)
    lim.add_argument("--temperature", type=float, required=True)
    lim.add_argument("--frequency", type=float, required=True)
    lim.add_argument("--out")
    lim.set_defaults(func=cmd_limits)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, SchemaError, FileNotFoundError) as exc:
        print(f"noisecal: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NoiseCalError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"noisecal: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
