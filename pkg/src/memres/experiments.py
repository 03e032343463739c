"""Config-driven experiment pipeline: signal, reservoir, target, analysis.

A config is a JSON object with the blocks documented in the README::

    {"name": ..., "seeds": [...], "signal": {...}, "reservoir": {"type": ...},
     "task": {"type": ...}, "analysis": {"type": ...},
     "train_window": [100, 4000], "test_window": [4000, 5000], "k": 1e-4}

Every result file carries the config hash and the seed.  Results depend only
on the config and seed, so repeated runs write byte-identical files.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import io
import json
import math
import os
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .deep import build_lrc_to_mem, build_mem_to_lrc, simulate_deep, trajectory_count
from .errors import ConfigurationError
from .esn import EsnConfig, build_esn, simulate_esn
from .learn import (
    RIDGE_K,
    TEST_WINDOW,
    TRAIN_WINDOW,
    CapacityProbe,
    argmax_equal_time,
    fit_and_test,
    finite_size_capacity,
    linear_capacity,
    linear_fit_r2,
    quadratic_capacity,
)
from .lrc import KernelWeights, design_bank, kernel_csv_string, kernel_from_weights, simulate_exact
from .memristor import (
    DT_INTERNAL,
    MemristorParams,
    make_lattice_network,
    make_opposed_pair,
    make_single,
    simulate_network,
)
from .signals import SignalConfig, TimeGrid, delayed_target, filter_target, generate_input, product_target

SEED_ENV = "MEMRES_BASE_SEED"

RESERVOIR_TYPES = ("lrc", "memristor_single", "memristor_pair", "memristor_lattice", "esn",
                   "hybrid_mem_to_lrc", "hybrid_lrc_to_mem")
TASK_TYPES = ("delay", "product", "quadratic_filter")
ANALYSIS_TYPES = ("fit", "memory_scan", "capacity", "scaling")

_REQUIRED = object()


# -- config parsing -----------------------------------------------------------------


def _take(block: dict, key: str, path: str, kind=float, default=_REQUIRED):
    if key not in block:
        if default is _REQUIRED:
            raise ConfigurationError(f"missing required key '{path}.{key}'")
        return default
    val = block[key]
    if val is None and default is not _REQUIRED:
        return default
    try:
        if kind is int:
            if isinstance(val, bool) or int(val) != val:
                raise TypeError
            return int(val)
        if kind is float:
            if isinstance(val, bool):
                raise TypeError
            out = float(val)
            if not math.isfinite(out):
                raise TypeError
            return out
        if kind == "window":
            a, b = (float(x) for x in val)
            if not b > a:
                raise TypeError
            return (a, b)
        if kind == "list":
            return [float(x) for x in val]
        return kind(val)
    except (TypeError, ValueError):
        raise ConfigurationError(f"invalid value for '{path}.{key}': {val!r}") from None


def _check_keys(block, allowed, path):
    if not isinstance(block, dict):
        raise ConfigurationError(f"'{path}' must be a JSON object")
    extra = sorted(set(block) - set(allowed))
    if extra:
        raise ConfigurationError(f"unknown key '{path}.{extra[0]}'")


_PARAM_KEYS = ("alpha", "beta", "chi")
_LRC_KEYS = ("gamma", "delta_omega", "N", "omega_max")


def _params(block, path, default_beta=3.0) -> dict:
    return {
        "alpha": _take(block, "alpha", path, float, 3.0),
        "beta": _take(block, "beta", path, float, default_beta),
        "chi": _take(block, "chi", path, float, 0.8),
    }


def _lrc_block(block, path) -> dict:
    _check_keys(block, _LRC_KEYS, path)
    N = _take(block, "N", path, int)
    if "omega_max" in block:
        dw = _take(block, "omega_max", path) / N
        return {"gamma": _take(block, "gamma", path, float, dw),
                "delta_omega": _take(block, "delta_omega", path, float, dw),
                "N": N, "omega_max": _take(block, "omega_max", path)}
    return {"gamma": _take(block, "gamma", path), "delta_omega": _take(block, "delta_omega", path), "N": N}


def _parse_reservoir(block) -> dict:
    path = "reservoir"
    if not isinstance(block, dict):
        raise ConfigurationError("'reservoir' must be a JSON object")
    kind = block.get("type")
    if kind not in RESERVOIR_TYPES:
        raise ConfigurationError(f"invalid value for 'reservoir.type': {kind!r} (expected one of {RESERVOIR_TYPES})")
    out = {"type": kind}
    if kind == "lrc":
        _check_keys(block, ("type",) + _LRC_KEYS, path)
        out.update(_lrc_block({k: v for k, v in block.items() if k != "type"}, path))
    elif kind in ("memristor_single", "memristor_pair"):
        _check_keys(block, ("type",) + _PARAM_KEYS, path)
        out.update(_params(block, path))
    elif kind == "memristor_lattice":
        _check_keys(block, ("type", "rows", "cols", "weight_spec", "solver") + _PARAM_KEYS, path)
        out.update(_params(block, path))
        out["rows"] = _take(block, "rows", path, int)
        out["cols"] = _take(block, "cols", path, int)
        ws = block.get("weight_spec")
        if ws is not None:
            if not (isinstance(ws, list) and len(ws) == 2):
                raise ConfigurationError(f"invalid value for 'reservoir.weight_spec': {ws!r}")
            ws = [int(x) for x in ws]
        out["weight_spec"] = ws
        out["solver"] = _take(block, "solver", path, str, "auto")
    elif kind == "esn":
        keys = ("size", "fanout", "spectral_radius", "bias_scale", "input_scale", "dt", "leak")
        _check_keys(block, ("type",) + keys, path)
        d = EsnConfig()
        out.update({
            "size": _take(block, "size", path, int, d.size),
            "fanout": _take(block, "fanout", path, int, d.fanout),
            "spectral_radius": _take(block, "spectral_radius", path, float, d.spectral_radius),
            "bias_scale": _take(block, "bias_scale", path, float, d.bias_scale),
            "input_scale": _take(block, "input_scale", path, float, d.input_scale),
            "dt": _take(block, "dt", path, float, d.dt),
            "leak": _take(block, "leak", path, float, d.leak),
        })
    else:
        _check_keys(block, ("type", "lrc", "memristor"), path)
        out["lrc"] = _lrc_block(block.get("lrc", {"gamma": 0.4, "delta_omega": 0.4, "N": 10}), "reservoir.lrc")
        mem = block.get("memristor", {})
        _check_keys(mem, _PARAM_KEYS, "reservoir.memristor")
        out["memristor"] = _params(mem, "reservoir.memristor")
    return out


def _parse_task(block) -> dict:
    if not isinstance(block, dict):
        raise ConfigurationError("'task' must be a JSON object")
    kind = block.get("type")
    if kind not in TASK_TYPES:
        raise ConfigurationError(f"invalid value for 'task.type': {kind!r} (expected one of {TASK_TYPES})")
    if kind == "delay":
        _check_keys(block, ("type", "tau"), "task")
        return {"type": kind, "tau": _take(block, "tau", "task", float, 0.0)}
    if kind == "product":
        _check_keys(block, ("type", "tau1", "tau2"), "task")
        return {"type": kind, "tau1": _take(block, "tau1", "task", float, 0.0),
                "tau2": _take(block, "tau2", "task", float, 0.0)}
    _check_keys(block, ("type",), "task")
    return {"type": kind}


def _parse_analysis(block, task) -> dict:
    if not isinstance(block, dict):
        raise ConfigurationError("'analysis' must be a JSON object")
    kind = block.get("type")
    if kind not in ANALYSIS_TYPES:
        raise ConfigurationError(f"invalid value for 'analysis.type': {kind!r} (expected one of {ANALYSIS_TYPES})")
    p = "analysis"
    if kind == "fit":
        _check_keys(block, ("type", "kernel"), p)
        return {"type": kind, "kernel": bool(block.get("kernel", False))}
    if kind == "memory_scan":
        _check_keys(block, ("type", "tau_max", "spacing", "diag_spacing", "diag_max", "kernel_tau"), p)
        out = {"type": kind, "tau_max": _take(block, "tau_max", p, float, 80.0 if task["type"] == "delay" else 10.0),
               "spacing": _take(block, "spacing", p, float, 0.5),
               "diag_spacing": _take(block, "diag_spacing", p, float, 0.25),
               "diag_max": _take(block, "diag_max", p, float, 10.0),
               "kernel_tau": _take(block, "kernel_tau", p, float, None)}
        if task["type"] == "quadratic_filter":
            raise ConfigurationError("invalid value for 'task.type': memory_scan needs a delay or product task")
        return out
    if kind == "capacity":
        _check_keys(block, ("type", "epsilon", "T_values"), p)
        if task["type"] == "quadratic_filter":
            raise ConfigurationError("invalid value for 'task.type': capacity needs a delay or product task")
        tv = block.get("T_values")
        return {"type": kind, "epsilon": _take(block, "epsilon", p, float, 0.1),
                "T_values": None if tv is None else _take(block, "T_values", p, "list")}
    _check_keys(block, ("type", "parameter", "values", "epsilon", "T_values"), p)
    if task["type"] == "quadratic_filter":
        raise ConfigurationError("invalid value for 'task.type': scaling needs a delay or product task")
    vals = block.get("values")
    if not (isinstance(vals, list) and vals):
        raise ConfigurationError(f"invalid value for 'analysis.values': {vals!r}")
    tv = block.get("T_values")
    return {"type": kind, "parameter": _take(block, "parameter", p, str, "N"),
            "values": [int(v) for v in vals], "epsilon": _take(block, "epsilon", p, float, 0.1),
            "T_values": None if tv is None else _take(block, "T_values", p, "list")}


def parse_config(raw: dict) -> dict:
    """Validate a raw config and fill defaults; errors name the offending key."""
    if not isinstance(raw, dict):
        raise ConfigurationError("config must be a JSON object")
    _check_keys(raw, ("name", "seeds", "signal", "reservoir", "task", "analysis",
                      "train_window", "test_window", "k", "dt_internal", "description"), "config")
    sig = raw.get("signal", {})
    _check_keys(sig, ("t_end", "dt", "D", "a", "zero_noise"), "signal")
    signal = {"t_end": _take(sig, "t_end", "signal", float, 5000.0),
              "dt": _take(sig, "dt", "signal", float, 0.05),
              "D": _take(sig, "D", "signal", float, 1.0),
              "a": _take(sig, "a", "signal", float, 1.0),
              "zero_noise": bool(sig.get("zero_noise", False))}
    if not signal["dt"] > 0 or not signal["t_end"] > 0:
        raise ConfigurationError("invalid value for 'signal.dt' or 'signal.t_end': must be positive")
    seeds = raw.get("seeds", [0])
    if not (isinstance(seeds, list) and seeds and all(isinstance(s, int) and not isinstance(s, bool) for s in seeds)):
        raise ConfigurationError(f"invalid value for 'config.seeds': {seeds!r}")
    for key in ("reservoir", "task", "analysis"):
        if key not in raw:
            raise ConfigurationError(f"missing required key 'config.{key}'")
    task = _parse_task(raw["task"])
    cfg = {
        "name": str(raw.get("name", "experiment")),
        "seeds": list(seeds),
        "signal": signal,
        "reservoir": _parse_reservoir(raw["reservoir"]),
        "task": task,
        "analysis": _parse_analysis(raw["analysis"], task),
        "train_window": list(_take(raw, "train_window", "config", "window", TRAIN_WINDOW)),
        "test_window": list(_take(raw, "test_window", "config", "window", TEST_WINDOW)),
        "k": _take(raw, "k", "config", float, RIDGE_K),
        "dt_internal": _take(raw, "dt_internal", "config", float, DT_INTERNAL),
    }
    if not cfg["k"] > 0:
        raise ConfigurationError("invalid value for 'config.k': ridge parameter must be positive")
    if cfg["analysis"]["type"] == "scaling" and cfg["reservoir"]["type"] not in ("lrc", "hybrid_lrc_to_mem"):
        raise ConfigurationError("invalid value for 'reservoir.type': scaling varies the LRC size N")
    return cfg


def load_config(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        bundled = Path(__file__).parent / "configs" / (path.name if path.suffix else path.name + ".json")
        if not bundled.exists():
            raise
        text = bundled.read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config is not valid JSON: {exc}") from None
    return parse_config(raw)


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def apply_overrides(cfg: dict, dt=None, train_window=None, test_window=None, seeds=None) -> dict:
    cfg = copy.deepcopy(cfg)
    if dt is not None:
        cfg["signal"]["dt"] = float(dt)
    if train_window is not None:
        cfg["train_window"] = [float(x) for x in train_window]
    if test_window is not None:
        cfg["test_window"] = [float(x) for x in test_window]
    if seeds is not None:
        cfg["seeds"] = [int(s) for s in seeds]
    return parse_config(cfg)


def effective_seeds(cfg: dict):
    """Seeds after the environment override; returns ``(seeds, override)``."""
    env = os.environ.get(SEED_ENV)
    if env is None or env == "":
        return list(cfg["seeds"]), None
    try:
        base = int(env)
    except ValueError:
        raise ConfigurationError(f"invalid value for environment variable {SEED_ENV}: {env!r}") from None
    return [base + i for i in range(len(cfg["seeds"]))], base


# -- building and simulating ----------------------------------------------------------


def _lrc_bank(spec):
    return design_bank(spec["gamma"], spec["delta_omega"], spec["N"])


def _with_size(spec: dict, N: int) -> dict:
    """Copy of an LRC block resized to ``N``, keeping ``omega_max`` fixed when present."""
    out = dict(spec)
    out["N"] = int(N)
    if "omega_max" in spec:
        out["gamma"] = out["delta_omega"] = spec["omega_max"] / N
    return out


def simulate_reservoir(spec: dict, u, seed: int = 0, dt_internal: float = DT_INTERNAL):
    kind = spec["type"]
    if kind == "lrc":
        return simulate_exact(_lrc_bank(spec), u)
    if kind in ("memristor_single", "memristor_pair", "memristor_lattice"):
        p = MemristorParams(spec["alpha"], spec["beta"], spec["chi"])
        if kind == "memristor_single":
            net = make_single(p)
        elif kind == "memristor_pair":
            net = make_opposed_pair(p)
        else:
            net = make_lattice_network(spec["rows"], spec["cols"], p, spec["weight_spec"])
        return simulate_network(net, u, dt_internal, solver=spec.get("solver", "auto"))
    if kind == "esn":
        cfg = EsnConfig(spec["size"], spec["fanout"], spec["spectral_radius"], spec["bias_scale"],
                        spec["input_scale"], spec["dt"], seed, spec["leak"])
        return simulate_esn(build_esn(cfg), u)
    m = spec["memristor"]
    p = MemristorParams(m["alpha"], m["beta"], m["chi"])
    lrc = (spec["lrc"]["gamma"], spec["lrc"]["delta_omega"], spec["lrc"]["N"])
    if kind == "hybrid_mem_to_lrc":
        d = build_mem_to_lrc(make_opposed_pair(p), lrc)
    else:
        d = build_lrc_to_mem(lrc, p)
    return simulate_deep(d, u, dt_internal)


def make_signal(cfg: dict, seed: int):
    s = cfg["signal"]
    grid = TimeGrid.span(s["t_end"], s["dt"])
    return generate_input(SignalConfig(grid, s["D"], s["a"], seed, s["zero_noise"]))


def make_target(task: dict, u):
    if task["type"] == "delay":
        return delayed_target(u, task["tau"])
    if task["type"] == "product":
        return product_target(u, task["tau1"], task["tau2"])
    return filter_target(u)


# -- output helpers ----------------------------------------------------------------


def _csv(header, rows, chash, seed) -> str:
    buf = io.StringIO()
    buf.write(f"# config_hash={chash} seed={seed}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    return buf.getvalue()


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    return x


def dump_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


# -- analyses ---------------------------------------------------------------------


def _capacity(X, u, cfg, analysis, kind):
    tw = tuple(cfg["train_window"])
    eps = analysis["epsilon"]
    if kind == "delay":
        return linear_capacity(X, u, eps, train_window=tw, k=cfg["k"])
    if analysis.get("T_values"):
        return finite_size_capacity(X, u, eps, analysis["T_values"], t_start=tw[0], k=cfg["k"])
    return quadratic_capacity(X, u, eps, train_window=tw, k=cfg["k"])


def run_single(cfg: dict, seed: int) -> tuple[dict, dict]:
    """Run one seed; returns ``(result, files)`` with ``files`` mapping suffix to text."""
    chash = config_hash(cfg)
    u = make_signal(cfg, seed)
    res, an, task = cfg["reservoir"], cfg["analysis"], cfg["task"]
    tw, sw = tuple(cfg["train_window"]), tuple(cfg["test_window"])
    result = {"config_hash": chash, "seed": seed, "name": cfg["name"], "reservoir": res["type"],
              "task": task, "analysis": an["type"], "penalized_constant": True}
    files = {}

    if an["type"] == "scaling":
        rows = []
        for N in an["values"]:
            spec = copy.deepcopy(res)
            if res["type"] == "lrc":
                spec.update(_with_size(res, N))
                channels = 2 * N
            else:
                spec["lrc"] = _with_size(res["lrc"], N)
                channels = trajectory_count(N)
            X = simulate_reservoir(spec, u, seed, cfg["dt_internal"])
            rep = _capacity(X, u, cfg, an, task["type"])
            del X
            rows.append([N, channels, rep.tau_eps, rep.e_int, rep.e_fit, rep.e_tot])
        slope, intercept, r2 = linear_fit_r2([r[1] for r in rows], [r[2] for r in rows])
        result.update({"table": [dict(zip(("N", "channels", "tau_eps", "e_int", "e_fit", "e_tot"), r)) for r in rows],
                       "slope": slope, "intercept": intercept, "r2": r2, "epsilon": an["epsilon"]})
        files["scaling.csv"] = _csv(["N", "channels", "tau_eps", "e_int", "e_fit", "e_tot"], rows, chash, seed)
        return result, files

    X = simulate_reservoir(res, u, seed, cfg["dt_internal"])
    result["n_channels"] = X.n_channels

    if an["type"] == "fit":
        z = make_target(task, u)
        fit = fit_and_test(X, z, cfg["k"], tw, sw)
        result.update({"nmse": fit.nmse, "capacity": fit.capacity, "gen_nmse": fit.gen_nmse})
        files["weights.csv"] = _csv(["index", "weight"], enumerate(fit.weights), chash, seed)
        if an.get("kernel") and res["type"] == "lrc" and task["type"] == "delay":
            files["kernel.csv"] = _kernel_text(res, fit.weights, chash, seed)
    elif an["type"] == "memory_scan":
        probe = CapacityProbe(X, u, tw, cfg["k"])
        taus = np.arange(0.0, an["tau_max"] + 0.5 * an["spacing"], an["spacing"])
        if task["type"] == "delay":
            m = [probe.linear(t) for t in taus]
            files["memory.csv"] = _csv(["tau", "m"], zip(taus, m), chash, seed)
            result["m"] = {f"{t:g}": v for t, v in zip(taus, m)}
            if an.get("kernel_tau") is not None:
                fit = probe.readout.fit(delayed_target(u, an["kernel_tau"]))
                files["kernel.csv"] = _kernel_text(res, fit.weights, chash, seed)
                result["kernel_tau"] = an["kernel_tau"]
        else:
            rows = []
            for t1 in taus:
                for t2 in taus:
                    rows.append([t1, t2, probe.quadratic(t1, t2)])
            files["m2.csv"] = _csv(["tau1", "tau2", "m2"], rows, chash, seed)
            ts, vs, dtaus, dvals = argmax_equal_time(probe, an["diag_max"], an["diag_spacing"])
            result.update({"tau_star": ts, "m2_star": vs,
                           "m2_diag": {f"{t:g}": v for t, v in zip(dtaus, dvals)}})
            files["m2_diag.csv"] = _csv(["tau", "m2"], zip(dtaus, dvals), chash, seed)
    else:
        rep = _capacity(X, u, cfg, an, task["type"])
        result["capacity"] = rep.to_dict()
        if rep.evaluations.get("T"):
            result["finite_size"] = rep.evaluations
    return result, files


def _kernel_text(res, weights, chash, seed) -> str:
    bank = _lrc_bank(res)
    tau = np.arange(0.0, 80.0 + 1e-9, 0.05)
    K = kernel_from_weights(bank, KernelWeights.from_readout(weights, bank.size), tau)
    return f"# config_hash={chash} seed={seed}\n" + kernel_csv_string(tau, K)


def versions() -> dict:
    import scipy

    from . import __version__
    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__,
            "memres": __version__}


def _run_one(args):
    cfg, seed = args
    return run_single(cfg, seed)


def run_config(cfg: dict, out_dir, jobs: int = 1, config_path: str | None = None) -> dict:
    """Run all seeds of ``cfg`` and write results plus a manifest into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    seeds, override = effective_seeds(cfg)
    chash = config_hash(cfg)
    start = time.time()
    work = [(cfg, s) for s in seeds]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            outputs = list(ex.map(_run_one, work))
    else:
        outputs = [_run_one(w) for w in work]
    written = []
    results = []
    for seed, (result, files) in zip(seeds, outputs):
        stem = f"{cfg['name']}_s{seed}"
        p = out_dir / f"{stem}_result.json"
        p.write_text(dump_json(result))
        written.append(p.name)
        for suffix, text in files.items():
            q = out_dir / f"{stem}_{suffix}"
            q.write_text(text)
            written.append(q.name)
        results.append(result)
    manifest = {
        "config_hash": chash, "config": cfg, "config_path": config_path, "seeds": seeds,
        "seed_override": {"variable": SEED_ENV, "base": override} if override is not None else None,
        "versions": versions(), "argv": sys.argv, "jobs": jobs,
        "wall_time_s": time.time() - start, "started": time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(start)),
        "files": written,
    }
    (out_dir / f"{cfg['name']}_manifest.json").write_text(dump_json(manifest))
    return {"results": results, "manifest": manifest}
