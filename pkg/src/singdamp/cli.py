"""Command-line harness: one JSON config per run, CSV/JSON artifacts and a manifest.

    singdamp <command> --config run.json --out results/ [--workers 4] [--seed 7]

Commands: classify, resolvent-sweep, torus-resolvent, spectrum, evolve,
quasimode, report.  Every run writes manifest.json with the full config
(defaults filled in), the tool version, wall time and output checksums.
Re-running a finished run with the same config only verifies checksums.
Sweeps keep finished points in a .partial file and resume from it.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import sys
import time
import traceback
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .artifacts import (
    SCHEMA,
    config_hash,
    dumps,
    grid_function_rows,
    verify_outputs,
    write_csv,
    write_json,
)
from .damping import DampingSpec, PowerPiece, predict_rates, total_mass
from .discretize import State, assemble_P, circle_grid
from .evolution import (
    evolve,
    evolve_torus,
    extinction_probe,
    fit_decay,
    random_state,
    windowed_exponents,
)
from .quasimode import build_torus_quasimode, calibrate_k_bound, eta_sweep, residual_sweep, torus_frequency
from .resolvent import (
    JITTER,
    _parallel_map,
    NumericallySingular,
    check_layer_resolution,
    check_wave_resolution,
    fit_loglog,
    geometric_lambdas,
    resolvent_norm,
    resonant_lambda,
    torus_modal_norms,
)
from .spectrum import (
    check_kernel_simplicity,
    check_lower_region,
    check_pole_correspondence,
    check_upper_halfplane,
    eig_A,
    kernel_alignment,
)

MANIFEST = "manifest.json"

DEFAULTS = {
    "classify": {"spec": None},
    "resolvent-sweep": {
        "spec": None,
        "n": 2048,
        "lambda_min": 20.0,
        "lambda_max": 200.0,
        "per_decade": 24,
        "jitter": JITTER,
        "lambdas": None,
        "window": None,
        "method": "auto",
    },
    "torus-resolvent": {
        "spec": None,
        "n": 512,
        "lambda_min": 20.0,
        "lambda_max": 120.0,
        "per_decade": 24,
        "jitter": JITTER,
        "lambdas": None,
        "sampling": "resonant",
        "window": None,
        "method": "auto",
    },
    "spectrum": {
        "spec": None,
        "n": 256,
        "rtol_zero": 1e-8,
        "samples": 10,
        "viscosity": 0.0,
        "region": {"M": 1.0, "delta": 0.25, "K": None},
    },
    "evolve": {
        "spec": None,
        "n": 256,
        "T": 100.0,
        "dt": None,
        "stride": 10,
        "data": "random",
        "cutoff": 16,
        "seed": 0,
        "model": "exponential",
        "window": None,
        "fractions": [0.1, 0.25, 0.5],
        "modes": None,
        "amplitude_power": 2.5,
        "viscosity": 0.0,
    },
    "quasimode": {
        "beta": -0.5,
        "hs": [2.0**-j for j in range(3, 10)],
        "ks": [16, 24, 32, 48, 64, 96, 128, 192, 256],
        "n": 4096,
        "k_bound": None,
    },
    "report": {
        "inputs": [],
        "resolvent_slope": None,
        "time_exponent": None,
        "tolerance": 0.07,
    },
}

SWEEP_CHUNK = 8


class ConfigError(ValueError):
    """Invalid or inconsistent configuration; reported before any computation."""


def _merge(defaults: dict, given: dict) -> dict:
    out = copy.deepcopy(defaults)
    for key, val in given.items():
        if key not in defaults:
            raise ConfigError(f"unknown config key {key!r}")
        if isinstance(defaults[key], dict) and isinstance(val, dict):
            out[key] = _merge(defaults[key], val)
        else:
            out[key] = val
    return out


def load_spec(entry, base: Path) -> DampingSpec:
    """A spec is an inline {"pieces": [...]} object or a path to one."""
    if entry is None:
        raise ConfigError("config needs a damping spec")
    if isinstance(entry, dict):
        data = entry
    else:
        path = Path(entry)
        if not path.is_absolute():
            path = base / path
        if not path.is_file():
            raise ConfigError(f"spec file not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"spec file is not valid JSON: {exc}") from exc
    try:
        return DampingSpec.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid damping spec: {exc}") from exc


def _check_n(n):
    if not isinstance(n, int) or n < 16:
        raise ConfigError(f"n must be an integer >= 16, got {n!r}")


def _lambda_list(cfg) -> list:
    if cfg["lambdas"] is not None:
        lams = sorted(float(v) for v in cfg["lambdas"])
    else:
        lo, hi = float(cfg["lambda_min"]), float(cfg["lambda_max"])
        if not 0 < lo < hi:
            raise ConfigError("need 0 < lambda_min < lambda_max")
        lams = [float(v) for v in geometric_lambdas(lo, hi, int(cfg["per_decade"]), float(cfg["jitter"]))]
    if len(lams) < 5:
        raise ConfigError("a sweep needs at least 5 lambda values")
    if lams[0] <= 0:
        raise ConfigError("lambda values must be positive")
    return lams


def _default_dt(T: float, dx: float) -> float:
    # a power-of-two step count keeps T an exact multiple of dt with dt <= dx
    return T / 2 ** math.ceil(math.log2(T / dx))


def validate(command: str, cfg: dict, base: Path) -> dict:
    """Check every parameter against the module preconditions; returns resolved objects."""
    ctx = {}
    if command in ("classify", "resolvent-sweep", "torus-resolvent", "spectrum", "evolve"):
        ctx["spec"] = load_spec(cfg["spec"], base)
    if command == "classify":
        if ctx["spec"].is_empty:
            raise ConfigError("rates are undefined for an empty spec")
    elif command == "resolvent-sweep":
        _check_n(cfg["n"])
        lams = _lambda_list(cfg)
        if lams[0] < 5.0:
            raise ConfigError("resolvent sweeps need lambda >= 5")
        try:
            check_wave_resolution(circle_grid(cfg["n"]), lams[-1])
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        ctx["lams"] = lams
    elif command == "torus-resolvent":
        _check_n(cfg["n"])
        lams = _lambda_list(cfg)
        if cfg["sampling"] not in ("resonant", "given"):
            raise ConfigError(f"unknown sampling {cfg['sampling']!r}")
        try:
            check_layer_resolution(circle_grid(cfg["n"]), ctx["spec"], lams[-1])
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        ctx["lams"] = lams
    elif command == "spectrum":
        _check_n(cfg["n"])
        if cfg["n"] > 1024:
            raise ConfigError("spectrum runs are limited to n <= 1024")
    elif command == "evolve":
        _check_n(cfg["n"])
        T = float(cfg["T"])
        if not T > 0:
            raise ConfigError("T must be positive")
        grid = circle_grid(cfg["n"])
        dt = cfg["dt"] if cfg["dt"] is not None else _default_dt(T, grid.dx)
        steps = T / dt
        if not dt > 0 or abs(steps - round(steps)) > 1e-9 * steps:
            raise ConfigError(f"T={T} is not a whole number of steps of dt={dt}")
        if cfg["data"] not in ("random", "quasimode"):
            raise ConfigError(f"unknown initial data {cfg['data']!r}")
        if cfg["model"] not in ("exponential", "polynomial"):
            raise ConfigError(f"unknown decay model {cfg['model']!r}")
        if cfg["data"] == "quasimode":
            pieces = ctx["spec"].pieces
            if len(pieces) != 1 or not isinstance(pieces[0], PowerPiece) or not pieces[0].plus_one:
                raise ConfigError("quasimode data needs the single sharpness damping piece")
            if not cfg["modes"]:
                raise ConfigError("quasimode data needs a list of y-modes")
            if min(cfg["modes"]) < 1:
                raise ConfigError("quasimode y-modes must be >= 1")
        ctx["grid"] = grid
        ctx["dt"] = float(dt)
    elif command == "quasimode":
        _check_n(cfg["n"])
        if cfg["n"] % 4:
            raise ConfigError("quasimode grids need n divisible by 4")
        if not -1 < float(cfg["beta"]):
            raise ConfigError("beta must exceed -1")
        if any(not 0 < h <= 0.5 for h in cfg["hs"]) or len(cfg["hs"]) < 5:
            raise ConfigError("need at least 5 values of h in (0, 1/2]")
        if any(int(k) < 1 for k in cfg["ks"]) or len(cfg["ks"]) < 5:
            raise ConfigError("need at least 5 y-modes k >= 1")
    elif command == "report":
        if not cfg["inputs"] and (cfg["resolvent_slope"] is None or cfg["time_exponent"] is None):
            raise ConfigError("report needs input files or both resolvent_slope and time_exponent")
        for entry in cfg["inputs"]:
            path = Path(entry) if Path(entry).is_absolute() else base / entry
            if not path.is_file():
                raise ConfigError(f"report input not found: {path}")
    else:
        raise ConfigError(f"unknown command {command!r}")
    return ctx


def _fit_json(fit, spec_hash, extra=None):
    out = {"schema": SCHEMA, "spec_hash": spec_hash}
    if fit is None:
        out.update({"slope": None, "intercept": None, "rms": None, "window": None, "n": 0})
    else:
        out.update(
            {
                "slope": fit.slope,
                "intercept": fit.intercept,
                "rms": fit.fit_residual,
                "window": list(fit.window),
                "n": fit.n,
            }
        )
    out.update(extra or {})
    return out


class PartialStore:
    """Finished sweep points, one JSON line each, tagged with the config hash."""

    def __init__(self, path: Path, tag: str):
        self.path = path
        self.tag = tag
        self.done = {}
        if path.is_file():
            lines = path.read_text().splitlines()
            if lines and json.loads(lines[0]).get("config") == tag:
                for line in lines[1:]:
                    rec = json.loads(line)
                    self.done[rec["key"]] = rec["value"]
        if not self.done:
            path.write_text(json.dumps({"config": tag}) + "\n")

    def add(self, key, value):
        self.done[key] = value
        with self.path.open("a") as fh:
            fh.write(json.dumps({"key": key, "value": value}) + "\n")

    def remove(self):
        if self.path.exists():
            self.path.unlink()


def _resumable(store: PartialStore, func, items, keys, workers):
    todo = [(k, it) for k, it in zip(keys, items) if k not in store.done]
    step = max(SWEEP_CHUNK, workers)
    for start in range(0, len(todo), step):
        chunk = todo[start : start + step]
        for (key, _), val in zip(chunk, _parallel_map(func, [it for _, it in chunk], workers)):
            store.add(key, val)
    return [store.done[k] for k in keys]


def _circle_point(args):
    spec_json, n, lam, method = args
    spec = DampingSpec.from_json(spec_json)
    try:
        return resolvent_norm(assemble_P(circle_grid(n), spec, lam, lam * lam), method)
    except NumericallySingular:
        return None


def _torus_point(args):
    spec_json, n, lam, sampling, method = args
    spec = DampingSpec.from_json(spec_json)
    if sampling == "resonant":
        lam = resonant_lambda(spec, lam, n)
    res = torus_modal_norms(spec, lam, n=n, method=method)
    return [lam, res.mode, res.norm]


def run_classify(cfg, ctx, outdir, opts):
    spec = ctx["spec"]
    rates = predict_rates(spec)
    body = {
        "schema": SCHEMA,
        "spec": spec.to_dict(),
        "spec_hash": spec.spec_hash(),
        "beta": rates.beta,
        "mixed": rates.mixed,
        "decay_exponent": rates.decay_exponent,
        "resolvent_exponent": rates.resolvent_exponent,
        "normal_p": rates.normal_p,
        "normal_p_open_endpoint": True,
        "schrodinger_exponent": rates.schrodinger_exponent,
        "total_mass": total_mass(spec),
    }
    return {"classify.json": write_json(outdir / "classify.json", body)}


def run_resolvent_sweep(cfg, ctx, outdir, opts):
    spec, lams = ctx["spec"], ctx["lams"]
    store = PartialStore(outdir / "sweep.partial", opts["tag"])
    items = [(spec.to_json(), cfg["n"], lam, cfg["method"]) for lam in lams]
    keys = [repr(lam) for lam in lams]
    values = _resumable(store, _circle_point, items, keys, opts["workers"])
    rows = [(lam, val) for lam, val in zip(lams, values) if val is not None]
    singular = [lam for lam, val in zip(lams, values) if val is None]
    fit = fit_loglog(*zip(*rows), cfg["window"]) if len(rows) >= 5 else None
    out = {"sweep.csv": write_csv(outdir / "sweep.csv", ["lambda", "norm"], rows)}
    out["fit.json"] = write_json(
        outdir / "fit.json", _fit_json(fit, spec.spec_hash(), {"kind": "circle", "singular": singular})
    )
    store.remove()
    return out


def run_torus_resolvent(cfg, ctx, outdir, opts):
    spec, lams = ctx["spec"], ctx["lams"]
    store = PartialStore(outdir / "torus.partial", opts["tag"])
    items = [(spec.to_json(), cfg["n"], lam, cfg["sampling"], cfg["method"]) for lam in lams]
    keys = [repr(lam) for lam in lams]
    values = _resumable(store, _torus_point, items, keys, opts["workers"])
    # resonant sampling can map two nominal values to one peak
    unique = sorted({round(v[0], 12): v for v in values}.values(), key=lambda v: v[0])
    rows = [(lam, int(mode), norm) for lam, mode, norm in unique]
    fit = fit_loglog([r[0] for r in rows], [r[2] for r in rows], cfg["window"]) if len(rows) >= 5 else None
    rates = predict_rates(spec)
    out = {"torus.csv": write_csv(outdir / "torus.csv", ["lambda", "mode", "norm"], rows)}
    out["fit.json"] = write_json(
        outdir / "fit.json",
        _fit_json(
            fit,
            spec.spec_hash(),
            {"kind": "torus", "sampling": cfg["sampling"], "target_slope": rates.resolvent_exponent},
        ),
    )
    store.remove()
    return out


def run_spectrum(cfg, ctx, outdir, opts):
    spec = ctx["spec"]
    grid = circle_grid(cfg["n"])
    report = eig_A(grid, spec, cfg["rtol_zero"], cfg["viscosity"])
    body = {
        "schema": SCHEMA,
        "spec_hash": spec.spec_hash(),
        "n": cfg["n"],
        "spectral_abscissa": report.spectral_abscissa,
        "resolved_abscissa": report.resolved_abscissa(grid),
        "kernel_dim": report.kernel_dim,
        "kernel_alignment": kernel_alignment(report, grid),
        "symmetry_defect": report.symmetry_defect,
        "trace_defect": report.trace_defect,
        "matrix_norm": report.matrix_norm,
        "tol_zero": report.tol_zero,
    }
    half = check_upper_halfplane(report)
    body["upper_halfplane"] = {"passed": half.passed, "marginal": half.marginal, "max_real": half.max_real}
    if not spec.is_empty:
        body["correspondence_defect"] = check_pole_correspondence(report, grid, spec, cfg["samples"])
        if cfg["n"] <= 256:
            kern = check_kernel_simplicity(grid, spec, cfg["rtol_zero"])
            body["kernel_simplicity"] = {
                "kernel_dim": kern.kernel_dim,
                "generalized_kernel_dim": kern.generalized_kernel_dim,
            }
        p = predict_rates(spec).normal_p
        if math.isfinite(p) and p > 1:
            reg = cfg["region"]
            low = check_lower_region(report, p, reg["M"], reg["delta"], reg["K"])
            body["lower_region"] = {
                "p": p,
                "M": reg["M"],
                "delta": reg["delta"],
                "K_empirical": low.k_empirical,
                "K_configured": reg["K"],
                "violations": list(low.violations),
            }
    order = np.lexsort((report.eigenvalues.imag, report.eigenvalues.real))
    rows = [(mu.real, mu.imag) for mu in report.eigenvalues[order]]
    return {
        "eigenvalues.csv": write_csv(outdir / "eigenvalues.csv", ["re", "im"], rows),
        "spectrum.json": write_json(outdir / "spectrum.json", body),
    }


def _quasimode_data(spec, grid, modes, power):
    beta = spec.pieces[0].beta
    k_bound = calibrate_k_bound(beta)
    data, used = {}, []
    for k in modes:
        sol = build_torus_quasimode(int(k), beta, grid, k_bound)
        amp = sol.lam**-power
        data[int(k)] = State(amp * sol.circle_profile, -1j * sol.lam * amp * sol.circle_profile, grid)
        used.append(int(k))
    return data, used


def run_evolve(cfg, ctx, outdir, opts):
    spec, grid, dt = ctx["spec"], ctx["grid"], ctx["dt"]
    T = float(cfg["T"])
    body = {"schema": SCHEMA, "spec_hash": spec.spec_hash(), "n": grid.n, "dt": dt, "T": T, "scheme": "crank-nicolson"}
    if cfg["data"] == "random":
        state = random_state(grid, spec, opts["seed"], cfg["cutoff"])
        trace = evolve(state, spec, T, dt, cfg["stride"], viscosity=cfg["viscosity"])
        body["seed"] = opts["seed"]
    else:
        data, used = _quasimode_data(spec, grid, cfg["modes"], cfg["amplitude_power"])
        trace = evolve_torus(spec, grid, used, data, T, dt, cfg["stride"], cfg["viscosity"]).aggregate
        body["modes"] = used
    window = tuple(cfg["window"]) if cfg["window"] else None
    fit = fit_decay(trace, cfg["model"], window)
    body["fit"] = {"model": fit.model, "value": fit.value, "rms": fit.fit_residual, "window": list(fit.window)}
    if trace.times[-1] * min(cfg["fractions"]) > 0:
        try:
            body["windowed_exponents"] = {repr(f): v for f, v in windowed_exponents(trace, cfg["fractions"]).items()}
        except ValueError as exc:
            body["windowed_exponents"] = {"error": str(exc)}
    probe = extinction_probe(trace)
    body["extinction"] = {"min_ratio": probe.min_ratio, "status": probe.status}
    body["dnorm0"] = trace.dnorm0
    rows = [(t, e, math.sqrt(max(e, 0.0))) for t, e in zip(trace.times, trace.energies)]
    return {
        "trace.csv": write_csv(outdir / "trace.csv", ["t", "E", "sqrtE"], rows),
        "evolve.json": write_json(outdir / "evolve.json", body),
    }


def run_quasimode(cfg, ctx, outdir, opts):
    beta = float(cfg["beta"])
    k_bound = cfg["k_bound"] if cfg["k_bound"] is not None else calibrate_k_bound(beta)
    hs = sorted(float(h) for h in cfg["hs"])
    etas = eta_sweep(beta, hs, k_bound)
    grid = circle_grid(cfg["n"])
    ks = sorted(int(k) for k in cfg["ks"])
    sols = residual_sweep(beta, ks, grid, k_bound)
    eta_fit = fit_loglog(hs, [e.abs_eta_minus_2 for e in etas])
    res_fit = fit_loglog([s.lam for s in sols], [s.relative_residual for s in sols])
    body = {
        "schema": SCHEMA,
        "beta": beta,
        "k_bound": k_bound,
        "n": cfg["n"],
        "eta_slope": eta_fit.slope,
        "eta_rms": eta_fit.fit_residual,
        "eta_target": 2.0 / (2.0 + beta),
        "residual_slope": res_fit.slope,
        "residual_rms": res_fit.fit_residual,
        "residual_target": -1.0 / (2.0 + beta),
        "max_matching_residual": max(e.matching_residual for e in etas),
    }
    eta_rows = [(e.h, e.mu.real, e.mu.imag, e.abs_eta_minus_2) for e in etas]
    res_rows = [(k, torus_frequency(k), s.relative_residual) for k, s in zip(ks, sols)]
    return {
        "eta.csv": write_csv(outdir / "eta.csv", ["h", "re_mu", "im_mu", "abs_eta_minus_2"], eta_rows),
        "residual.csv": write_csv(outdir / "residual.csv", ["k", "lambda", "relative_residual"], res_rows),
        "profile.csv": write_csv(outdir / "profile.csv", ["x", "re", "im"], grid_function_rows(grid, sols[-1].circle_profile)),
        "quasimode.json": write_json(outdir / "quasimode.json", body),
    }


def consistency_rows(slopes, exponents, tolerance):
    """Table of (s, alpha, 1/(s+1), |alpha - 1/(s+1)|, ok) for every pairing."""
    rows = []
    for s_label, s in slopes:
        predicted = 1.0 / (s + 1.0)
        for a_label, alpha in exponents:
            gap = abs(alpha - predicted)
            rows.append((s_label, s, a_label, alpha, predicted, gap, gap < tolerance))
    return rows


def run_report(cfg, ctx, outdir, opts):
    base = opts["base"]
    slopes, exponents, merged = [], [], {}
    if cfg["resolvent_slope"] is not None:
        slopes.append(("config", float(cfg["resolvent_slope"])))
    if cfg["time_exponent"] is not None:
        exponents.append(("config", float(cfg["time_exponent"])))
    for entry in cfg["inputs"]:
        path = Path(entry) if Path(entry).is_absolute() else base / entry
        doc = json.loads(path.read_text())
        merged[str(entry)] = doc
        if doc.get("kind") == "torus" and doc.get("slope") is not None:
            slopes.append((str(entry), float(doc["slope"])))
        if "windowed_exponents" in doc:
            for frac, val in sorted(doc["windowed_exponents"].items()):
                if isinstance(val, (int, float)):
                    exponents.append((f"{entry}@{frac}", float(val)))
    rows = consistency_rows(slopes, exponents, float(cfg["tolerance"]))
    body = {
        "schema": SCHEMA,
        "tolerance": cfg["tolerance"],
        "inputs": merged,
        "consistency": [
            {
                "slope_source": r[0],
                "resolvent_slope": r[1],
                "exponent_source": r[2],
                "time_exponent": r[3],
                "predicted_exponent": r[4],
                "gap": r[5],
                "consistent": r[6],
            }
            for r in rows
        ],
    }
    header = ["slope_source", "resolvent_slope", "exponent_source", "time_exponent", "predicted_exponent", "gap", "consistent"]
    csv_rows = [(r[0], r[1], r[2], r[3], r[4], r[5], "true" if r[6] else "false") for r in rows]
    return {
        "report.csv": write_csv(outdir / "report.csv", header, csv_rows),
        "report.json": write_json(outdir / "report.json", body),
    }


RUNNERS = {
    "classify": run_classify,
    "resolvent-sweep": run_resolvent_sweep,
    "torus-resolvent": run_torus_resolvent,
    "spectrum": run_spectrum,
    "evolve": run_evolve,
    "quasimode": run_quasimode,
    "report": run_report,
}


def _error(kind: str, message: str, outdir=None, code: int = 1) -> int:
    body = {"schema": SCHEMA, "error": kind, "message": message}
    text = dumps(body)
    sys.stderr.write(text)
    if outdir is not None:
        try:
            outdir.mkdir(parents=True, exist_ok=True)
            (outdir / "error.json").write_text(text)
        except OSError:
            pass
    return code


def run(command: str, config: dict, outdir, workers: int = 1, seed=None, base: Path = Path(".")) -> int:
    """Validate, execute and record one command; returns the exit status."""
    outdir = Path(outdir)
    try:
        cfg = _merge(DEFAULTS[command] if command in DEFAULTS else {}, config)
        if command not in DEFAULTS:
            raise ConfigError(f"unknown command {command!r}")
        if seed is not None and "seed" in cfg:
            cfg["seed"] = int(seed)
        ctx = validate(command, cfg, base)
    except ConfigError as exc:
        return _error("validation", str(exc), outdir, code=2)
    tag = config_hash({"command": command, "config": cfg, "version": __version__})
    outdir.mkdir(parents=True, exist_ok=True)
    manifest_path = outdir / MANIFEST
    if manifest_path.is_file():
        old = json.loads(manifest_path.read_text())
        if old.get("status") == "complete" and old.get("config_hash") == tag:
            if verify_outputs(outdir, old.get("outputs", {})):
                print(f"{command}: outputs in {outdir} are up to date")
                return 0
    started = time.perf_counter()
    manifest = {
        "schema": SCHEMA,
        "command": command,
        "config": cfg,
        "config_hash": tag,
        "version": __version__,
        "workers": workers,
        "started": datetime.now(timezone.utc).isoformat(),
        "status": "running",
    }
    write_json(manifest_path, manifest)
    opts = {"workers": max(1, int(workers)), "seed": int(cfg.get("seed", 0) if seed is None else seed), "tag": tag, "base": base}
    try:
        outputs = RUNNERS[command](cfg, ctx, outdir, opts)
    except Exception as exc:  # noqa: BLE001 - every failure becomes an error JSON
        manifest.update({"status": "failed", "wall_time": time.perf_counter() - started})
        write_json(manifest_path, manifest)
        detail = f"{type(exc).__name__}: {exc}"
        if isinstance(exc, ValueError):
            return _error("validation", detail, outdir, code=2)
        return _error("runtime", detail + "\n" + traceback.format_exc(limit=3), outdir)
    manifest.update({"status": "complete", "outputs": outputs, "wall_time": time.perf_counter() - started})
    write_json(manifest_path, manifest)
    err = outdir / "error.json"
    if err.exists():
        err.unlink()
    print(f"{command}: wrote {', '.join(sorted(outputs))} to {outdir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="singdamp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"singdamp {__version__}")
    parser.add_argument("command", choices=sorted(RUNNERS))
    parser.add_argument("--config", help="JSON config file (defaults are used for missing keys)")
    parser.add_argument("--out", default="singdamp-out", help="output directory")
    parser.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    parser.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    outdir = Path(args.out)
    config, base = {}, Path(".")
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            return _error("validation", f"config file not found: {path}", outdir, code=2)
        try:
            config = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            return _error("validation", f"config is not valid JSON: {exc}", outdir, code=2)
        if not isinstance(config, dict):
            return _error("validation", "config must be a JSON object", outdir, code=2)
        base = path.parent
    return run(args.command, config, outdir, args.workers, args.seed, base)


if __name__ == "__main__":
    sys.exit(main())
