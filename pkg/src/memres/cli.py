"""Command-line entry point.

Exit codes: 0 success, 1 reproduction checks failed, 2 bad arguments or
config, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import sys
from pathlib import Path

from .errors import ConfigurationError, NumericalError, UndefinedCapacityError
from .experiments import (
    apply_overrides,
    dump_json,
    load_config,
    parse_config,
    run_config,
)
from .reproduce import FIGURES, reproduce
from .signals import SignalConfig, TimeGrid, generate_input

log = logging.getLogger("memres")

EXIT_CHECKS, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 1, 2, 3, 4


def _window(text):
    try:
        a, b = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'start,end', got {text!r}") from None
    if not b > a:
        raise argparse.ArgumentTypeError(f"window end must exceed start, got {text!r}")
    return (a, b)


def _common(p, out_default="results"):
    p.add_argument("--seed", type=int, action="append", help="seed to run (repeatable); replaces the config's list")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for independent seeds")
    p.add_argument("--out", default=out_default, help="output directory")
    p.add_argument("--dt", type=float, help="signal sampling step")
    p.add_argument("--train-window", type=_window, metavar="A,B")
    p.add_argument("--test-window", type=_window, metavar="A,B")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="memres", description="Electronic reservoir simulations and capacity measurements.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("config", help="path to a JSON config, or the name of a bundled one")
    _common(p)

    p = sub.add_parser("reproduce", help="run a bundled figure recipe and compare with reference values")
    p.add_argument("figure", choices=sorted(FIGURES))
    p.add_argument("--seeds", type=int, help="number of seeds, counted up from --seed (default 0)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="results")

    p = sub.add_parser("gen-signal", help="write a smoothed-noise input trajectory")
    p.add_argument("--t-end", type=float, default=5000.0)
    p.add_argument("--dt", type=float, default=0.05)
    p.add_argument("--D", type=float, default=1.0)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output file; .csv for text, anything else for binary")

    p = sub.add_parser("capacity", help="total linear or quadratic capacity of a config's reservoir")
    p.add_argument("config")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--kind", choices=("linear", "quadratic"), default="linear")
    _common(p)

    p = sub.add_parser("kernel", help="learned linear kernel of an LRC readout for one delay")
    p.add_argument("config")
    p.add_argument("--tau", type=float, default=20.0)
    _common(p)
    return ap


def _load(args):
    cfg = load_config(args.config)
    return apply_overrides(cfg, dt=args.dt, train_window=args.train_window,
                           test_window=args.test_window, seeds=args.seed)


def _retarget(cfg, task, analysis, suffix):
    raw = copy.deepcopy(cfg)
    raw["task"] = task
    raw["analysis"] = analysis
    raw["name"] = f"{cfg['name']}_{suffix}"
    return parse_config(raw)


def _summary(results):
    keep = ("seed", "config_hash", "nmse", "gen_nmse", "capacity", "tau_star", "m2_star", "slope", "r2")
    return [{k: r[k] for k in keep if k in r} for r in results]


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "gen-signal":
            u = generate_input(SignalConfig(TimeGrid.span(args.t_end, args.dt), args.D, args.a, args.seed))
            u.save(args.out)
            print(json.dumps({"out": str(args.out), "n_steps": u.grid.n_steps, "seed": args.seed}))
            return 0
        if args.command == "reproduce":
            seeds = None if args.seeds is None else [args.seed + i for i in range(args.seeds)]
            report = reproduce(args.figure, Path(args.out), args.jobs, seeds)
            for c in report["checks"]:
                print(f"{'PASS' if c['pass'] else 'FAIL'}  {c['name']}: {c['value']} (target {c['target']})")
            return 0 if report["all_pass"] else EXIT_CHECKS
        cfg = _load(args)
        if args.command == "capacity":
            task = {"type": "delay"} if args.kind == "linear" else {"type": "product"}
            cfg = _retarget(cfg, task, {"type": "capacity", "epsilon": args.epsilon}, f"{args.kind}_capacity")
        elif args.command == "kernel":
            if cfg["reservoir"]["type"] != "lrc":
                raise ConfigurationError("invalid value for 'reservoir.type': kernel needs an lrc reservoir")
            cfg = _retarget(cfg, {"type": "delay", "tau": args.tau}, {"type": "fit", "kernel": True}, "kernel")
        out = run_config(cfg, Path(args.out), args.jobs, config_path=str(args.config))
        sys.stdout.write(dump_json(_summary(out["results"])))
        return 0
    except (ConfigurationError, json.JSONDecodeError) as exc:
        print(f"memres: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, UndefinedCapacityError) as exc:
        print(f"memres: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"memres: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        # parameter checks in the model constructors (e.g. an overdamped bank)
        print(f"memres: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
