"""Command-line entry point: simulate one run, validate the discretization,
or sweep a (nu, delta) battery.

Exit codes: 0 success/completed, 2 detected blowup (the physics ended the
run; sweep scripting needs this distinct from operational failure), 1 error.
All artifacts land under --out with a fixed layout: run.csv, upsilon.csv,
hyperboloid.csv, record.json, checkpoints/; wall-clock metadata stays in a
side file so the science outputs are byte-reproducible.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time

import numpy as np

from pulsekg.blowup import UpsilonMonitor, riccati_solve
from pulsekg.config import ConfigFileError, load_config
from pulsekg.hyperboloid import HyperboloidTracker, write_hyperboloid_csv
from pulsekg.integrator import Frame, Termination, run
from pulsekg.sweep import (
    SweepError,
    bisect_critical,
    monotone_warnings,
    persist,
    phase_csv,
    run_point,
    run_sweep,
)
from pulsekg.validate import run_battery

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_BLOWUP = 2


def _write_meta(out_dir: str, kind: str) -> None:
    with open(os.path.join(out_dir, "meta.json"), "w") as fh:
        json.dump({"kind": kind, "wall_time_unix": time.time()}, fh, indent=2)
        fh.write("\n")


def cmd_simulate(args) -> int:
    try:
        loaded = load_config(args.config, resolution_scale=args.resolution_scale,
                             frame_override=args.frame,
                             no_hyperboloid=args.no_hyperboloid,
                             checkpoint_every=args.checkpoint_every)
    except ConfigFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR

    if loaded.run_config is None:
        print("error: config does not define a runnable [run] setup", file=sys.stderr)
        return EXIT_ERROR
    os.makedirs(args.out, exist_ok=True)
    cfg = loaded.run_config
    if cfg.checkpoint_every:
        cfg.checkpoint_dir = os.path.join(args.out, "checkpoints")

    consumers = []
    monitor = None
    tracker = None
    if loaded.diagnostics.upsilon:
        monitor = UpsilonMonitor()
        consumers.append(monitor)
    if loaded.diagnostics.hyperboloid and cfg.frame is Frame.SCALED:
        d = loaded.diagnostics
        n_s = max(2, int(round((d.s_end - d.s_start) / d.ds)) + 1)
        s_values = [d.s_start + i * d.ds for i in range(n_s)]
        tracker = HyperboloidTracker(s_values, cfg.pulse.delta,
                                     ladder_order=d.ladder_order)
        consumers.append(tracker)

    record = run(cfg, consumers=tuple(consumers))

    with open(os.path.join(args.out, "run.csv"), "w") as fh:
        record.diagnostics_csv(fh)
    if monitor is not None and monitor.series is not None:
        ric = None
        if monitor.series.values and monitor.series.values[0] > 0:
            ric = riccati_solve(monitor.series.values[0], cfg.pulse.delta)
        with open(os.path.join(args.out, "upsilon.csv"), "w") as fh:
            monitor.series.csv(fh, riccati=ric)
    if tracker is not None:
        with open(os.path.join(args.out, "hyperboloid.csv"), "w") as fh:
            write_hyperboloid_csv(fh, tracker.rows())
    with open(os.path.join(args.out, "record.json"), "w") as fh:
        json.dump(record.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_meta(args.out, "simulate")

    if record.termination is Termination.BLOWUP:
        print(f"blowup detected at t = {record.termination_time:.6g} "
              f"({record.blowup_cause.value})")
        return EXIT_BLOWUP
    if record.termination is Termination.NUMERICAL_FAILURE:
        print(f"numerical failure at t = {record.termination_time:.6g}",
              file=sys.stderr)
        return EXIT_ERROR
    print(f"completed to t = {record.termination_time:.6g} "
          f"({record.steps_taken} steps)")
    return EXIT_OK


def cmd_validate(args) -> int:
    results = run_battery(quick=args.quick, sabotage=args.self_test_fail)
    all_ok = True
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        print(f"[{status}] {res.name}: {res.detail}")
        all_ok &= res.passed
    return EXIT_OK if all_ok else EXIT_ERROR


def cmd_sweep(args) -> int:
    try:
        loaded = load_config(args.config, resolution_scale=args.resolution_scale)
    except ConfigFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    plan = loaded.sweep_plan
    if plan is None:
        print("error: config has no [sweep] section", file=sys.stderr)
        return EXIT_ERROR

    os.makedirs(args.out, exist_ok=True)
    cache: dict = {}
    outcomes = []
    try:
        if plan.nu_values:
            outcomes = run_sweep(plan)
            for o in outcomes:
                cache[(round(o.nu, 12), o.delta)] = o
        bracket = None
        if plan.bisect_bracket is not None:
            bracket, visited = bisect_critical(plan, cache=cache)
            outcomes.extend(o for o in visited if o not in outcomes)
    except SweepError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR

    persist(outcomes, plan, os.path.join(args.out, "sweep.json"), bracket=bracket)
    with open(os.path.join(args.out, "phase.csv"), "w") as fh:
        phase_csv(outcomes, fh)
    _write_meta(args.out, "sweep")

    for o in sorted(outcomes, key=lambda o: (o.delta, o.nu)):
        extra = ""
        if o.t_detect is not None:
            extra = f" t_detect={o.t_detect:.4g}"
        if o.exponent is not None:
            extra += f" exponent={o.exponent:.3f}"
        print(f"nu={o.nu:+.4g} delta={o.delta:.3g}: {o.classification}{extra}")
    if bracket is not None:
        print(f"critical bracket: [{bracket[0]:.6g}, {bracket[1]:.6g}]")
    for w in monotone_warnings(outcomes):
        print(f"warning: {w}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pulsekg",
                                description="short-pulse cubic Klein-Gordon workbench")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one simulation from a TOML config")
    sim.add_argument("config")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--resolution-scale", type=float, default=1.0,
                     help="divide the grid spacing by this factor")
    sim.add_argument("--frame", choices=["original", "scaled"], default=None)
    sim.add_argument("--no-hyperboloid", action="store_true")
    sim.add_argument("--checkpoint-every", type=int, default=None, metavar="N")
    sim.set_defaults(fn=cmd_simulate)

    val = sub.add_parser("validate", help="run the built-in validation battery")
    val.add_argument("--quick", action="store_true", help="subset finishing < 60 s")
    val.add_argument("--self-test-fail", action="store_true",
                     help="sabotage a stencil weight; the battery must then fail")
    val.set_defaults(fn=cmd_validate)

    sw = sub.add_parser("sweep", help="run a (nu, delta) classification sweep")
    sw.add_argument("config")
    sw.add_argument("--out", required=True)
    sw.add_argument("--resolution-scale", type=float, default=1.0)
    sw.set_defaults(fn=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except KeyboardInterrupt:
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
