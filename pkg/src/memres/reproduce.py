"""Figure and table recipes built from the bundled configs.

Each recipe runs its configs, collects headline metrics and compares them
with reference values at fixed tolerances.  ``reproduce(name)`` returns the
report dictionary and, given an output directory, writes it as JSON next
to the per-run result files.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .experiments import apply_overrides, dump_json, effective_seeds, load_config, run_config, run_single

# reference values and tolerances used by the comparison reports
REFERENCE = {
    "fig2": {"m20_min": 0.995, "m_le50_min": 0.99, "tau_001": (55.5, 3.0)},
    "fig3": {"r2_min": 0.95},
    "fig4": {"lrc": 0.390, "single": 0.558, "pair": 0.960, "lattice": 0.995, "tol": 0.05},
    "fig6": {"r2_min": 0.9},
    "table1": {"hybrid_max": 0.03, "naive_factor": 5.0, "esn_range": (0.015, 0.03)},
}

FIG4_ORDER = ("lrc", "single", "pair", "lattice")


def _check(name, value, ok, target) -> dict:
    return {"name": name, "value": value, "target": target, "pass": bool(ok)}


def _run(name, out, jobs, seeds=None):
    cfg = load_config(name)
    if seeds is not None:
        cfg = apply_overrides(cfg, seeds=seeds)
    target = Path(out) if out is not None else None
    if target is None:
        return [run_single(cfg, s)[0] for s in effective_seeds(cfg)[0]]
    return run_config(cfg, target, jobs, config_path=name)["results"]


def fig2(out=None, jobs=1, seeds=None) -> dict:
    ref = REFERENCE["fig2"]
    scan = _run("fig2_lrc", out, jobs, seeds)[0]
    cap = _run("fig2_capacity", out, jobs, seeds)[0]
    m = {float(k): v for k, v in scan["m"].items()}
    m20 = m[20.0]
    m_le50 = min(v for t, v in m.items() if t <= 50.0)
    tau = cap["capacity"]["tau_eps"]
    checks = [
        _check("m(20)", m20, m20 >= ref["m20_min"], f">= {ref['m20_min']}"),
        _check("min m(tau<=50)", m_le50, m_le50 > ref["m_le50_min"], f"> {ref['m_le50_min']}"),
        _check("tau at m=0.99", tau, abs(tau - ref["tau_001"][0]) <= ref["tau_001"][1],
               f"{ref['tau_001'][0]} +/- {ref['tau_001'][1]}"),
    ]
    return {"metrics": {"m20": m20, "m0": m[0.0], "min_m_le50": m_le50, "tau_0.01": tau}, "checks": checks}


def fig3(out=None, jobs=1, seeds=None) -> dict:
    res = _run("fig3", out, jobs, seeds)[0]
    ok = res["r2"] >= REFERENCE["fig3"]["r2_min"] and res["slope"] > 0
    return {"metrics": {"table": res["table"], "slope": res["slope"], "r2": res["r2"]},
            "checks": [_check("linear fit R^2 (positive slope)", res["r2"], ok, ">= 0.95, slope > 0")]}


def fig4(out=None, jobs=1, seeds=None) -> dict:
    ref = REFERENCE["fig4"]
    per = {k: _run(f"fig4_{k}", out, jobs, seeds) for k in FIG4_ORDER}
    seeds_run = [r["seed"] for r in per["lrc"]]
    metrics = {k: {"seeds": seeds_run, "m2_star": [r["m2_star"] for r in v], "tau_star": [r["tau_star"] for r in v]}
               for k, v in per.items()}
    checks = []
    for k in FIG4_ORDER:
        vals = metrics[k]["m2_star"]
        ok = all(abs(v - ref[k]) <= ref["tol"] for v in vals)
        checks.append(_check(f"m2(tau*) {k}", vals, ok, f"{ref[k]} +/- {ref['tol']} on every seed"))
    ordered = [all(a < b for a, b in zip(vals, vals[1:]))
               for vals in zip(*(metrics[k]["m2_star"] for k in FIG4_ORDER))]
    checks.append(_check("ordering lrc < single < pair < lattice", ordered, all(ordered), "every seed"))
    return {"metrics": metrics, "checks": checks}


def fig5(out=None, jobs=1, seeds=None) -> dict:
    hyb = {k: _run(f"fig5_{k}", out, jobs, seeds)[0] for k in ("mem_to_lrc", "lrc_to_mem")}
    pair = _run("fig4_pair", out, jobs, seeds if seeds is not None else [hyb["lrc_to_mem"]["seed"]])[0]
    metrics = {k: {"tau_star": v["tau_star"], "m2_star": v["m2_star"]} for k, v in hyb.items()}
    metrics["pair"] = {"tau_star": pair["tau_star"], "m2_star": pair["m2_star"]}
    d_h = {float(t): v for t, v in hyb["lrc_to_mem"]["m2_diag"].items()}
    d_p = {float(t): v for t, v in pair["m2_diag"].items()}
    taus = [t for t in d_h if 1.0 <= t <= 3.0]
    gap = min(d_h[t] - d_p[t] for t in taus)
    checks = [_check("lrc_to_mem beats pair on m2(tau,tau), tau in [1,3]", gap, gap > 0, "> 0 everywhere")]
    return {"metrics": metrics, "checks": checks}


def fig6(out=None, jobs=1, seeds=None) -> dict:
    res = _run("fig6", out, jobs, seeds)[0]
    ok = res["r2"] >= REFERENCE["fig6"]["r2_min"]
    return {"metrics": {"table": res["table"], "slope": res["slope"], "r2": res["r2"]},
            "checks": [_check("linear fit R^2", res["r2"], ok, ">= 0.9")]}


def table1(out=None, jobs=1, seeds=None) -> dict:
    ref = REFERENCE["table1"]
    rows = {k: _run(f"table1_{k}", out, jobs, seeds) for k in ("naive", "esn", "hybrid")}
    metrics = {k: {"seeds": [r["seed"] for r in v], "nmse": [r["nmse"] for r in v],
                   "gen_nmse": [r["gen_nmse"] for r in v]} for k, v in rows.items()}
    for k in metrics:
        metrics[k]["mean_nmse"] = float(np.mean(metrics[k]["nmse"]))
        metrics[k]["mean_gen_nmse"] = float(np.mean(metrics[k]["gen_nmse"]))
    h, e, n = (metrics[k]["nmse"] for k in ("hybrid", "esn", "naive"))
    hg = metrics["hybrid"]["gen_nmse"]
    lo, hi = ref["esn_range"]
    checks = [
        _check("hybrid nmse", h, all(x <= ref["hybrid_max"] for x in h), f"<= {ref['hybrid_max']}"),
        _check("hybrid gen nmse", hg, all(x <= ref["hybrid_max"] for x in hg), f"<= {ref['hybrid_max']}"),
        _check("naive / hybrid nmse", [a / b for a, b in zip(n, h)],
               all(a >= ref["naive_factor"] * b for a, b in zip(n, h)), f">= {ref['naive_factor']}"),
        _check("esn nmse", e, all(lo <= x <= hi for x in e), f"in [{lo}, {hi}]"),
        _check("ordering hybrid <= esn < naive", None,
               all(a <= b < c for a, b, c in zip(h, e, n)), "every seed"),
    ]
    return {"metrics": metrics, "checks": checks}


FIGURES = {"fig2": fig2, "fig3": fig3, "fig4": fig4, "fig5": fig5, "fig6": fig6, "table1": table1}


def reproduce(name: str, out=None, jobs: int = 1, seeds=None) -> dict:
    if name not in FIGURES:
        raise KeyError(f"unknown figure {name!r}; choose from {sorted(FIGURES)}")
    report = {"figure": name, **FIGURES[name](out, jobs, seeds)}
    report["all_pass"] = all(c["pass"] for c in report["checks"])
    if out is not None:
        Path(out).mkdir(parents=True, exist_ok=True)
        (Path(out) / f"{name}_report.json").write_text(dump_json(report))
    return report
