"""Parameter sweeps over (nu, delta): classify runs, bisect the critical power.

Each point gets up to two simulations, each regime on its natural clock:

  1. a blowup probe in the original frame on the tiny box [-1.5 d, 1.5 d]^3,
     marched to three times the canonical comparison blowup time; detection
     there settles the point as BLOWUP;
  2. otherwise a rescaled-frame run to tau = 12 on a unit-support domain;
     DECAY requires completion, a fitted sup|u| exponent at or below the decay
     threshold, and the final sup|u| under a tenth of its initial value.

Anything else is UNDECIDED, a first-class outcome: near the critical power
the discrete system at fixed resolution is genuinely ambiguous.  Bisection
keeps its bracket endpoints on opposite outcomes and shrinks undecided
midpoints toward the decay side (conservative for the blowup claim).
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from typing import Callable

import numpy as np

from pulsekg.blowup import UpsilonMonitor, blowup_time_bound
from pulsekg.grid import GridSpec
from pulsekg.hyperboloid import decay_fit
from pulsekg.integrator import Frame, RunConfig, RunRecord, Termination, run
from pulsekg.nonlinearity import CubicTensor, preset_blowup, scale_tensor
from pulsekg.profiles import PulseParams

SCHEMA_VERSION = 1


class SweepError(ValueError):
    """Bad plan: identical endpoint classes, empty grids, schema mismatch."""


@dataclass
class DecayCriteria:
    fit_window: tuple[float, float] = (4.0, 12.0)
    max_exponent: float = -0.75
    sup_drop: float = 0.1


@dataclass
class SweepPlan:
    nu_values: list[float] = field(default_factory=list)
    delta_values: list[float] = field(default_factory=lambda: [0.25])
    tensor: CubicTensor = field(default_factory=preset_blowup)
    data_family: str = "pulse"
    # blowup probe geometry (original frame)
    probe_points_per_delta: int = 48
    probe_cfl: float = 0.05
    probe_horizon: float = 3.0          # in units of the canonical t*(delta)
    # decay run geometry (rescaled frame)
    decay_radius: float = 12.0
    decay_spacing: float = 1.0 / 6.0
    decay_tau_end: float = 12.0
    decay_cfl: float = 0.25
    decay: DecayCriteria = field(default_factory=DecayCriteria)
    # bisection
    bisect_bracket: tuple[float, float] | None = None
    bisect_tol: float = 0.125
    bisect_budget: int = 16
    parallel: int = 1

    def worker_count(self) -> int:
        cap = os.environ.get("PULSEKG_THREADS")
        width = max(1, int(self.parallel))
        if cap:
            width = min(width, max(1, int(cap)))
        return width


@dataclass
class Outcome:
    nu: float
    delta: float
    classification: str                 # "blowup" | "decay" | "undecided"
    t_detect: float | None = None       # original-frame time for probe hits,
    exponent: float | None = None       # rescaled tau for decay-phase blowups
    metrics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "nu": self.nu,
            "delta": self.delta,
            "class": self.classification,
            "t_detect": self.t_detect,
            "exponent": self.exponent,
            "metrics": self.metrics,
        }


def classify_run(record: RunRecord, fit, initial_sup: float, final_sup: float,
                 criteria: DecayCriteria) -> str:
    """BLOWUP on a blowup termination; DECAY on completion with a steep enough
    fitted exponent and a collapsed sup norm; UNDECIDED otherwise."""
    if record.termination is Termination.BLOWUP:
        return "blowup"
    if record.termination is not Termination.COMPLETED:
        return "undecided"
    if fit is None or initial_sup <= 0.0:
        return "undecided"  # degenerate (e.g. zero data): nothing to fit
    if fit.exponent <= criteria.max_exponent and \
            final_sup <= criteria.sup_drop * initial_sup:
        return "decay"
    return "undecided"


def probe_config(nu: float, delta: float, plan: SweepPlan) -> RunConfig:
    h = delta / plan.probe_points_per_delta
    grid = GridSpec.centered(1.5 * delta, h)
    horizon = plan.probe_horizon * blowup_time_bound(delta)
    horizon = min(horizon, 0.5 * delta - 5.0 * h)  # stay causally padded
    return RunConfig(
        frame=Frame.ORIGINAL, grid=grid, pulse=PulseParams(delta, nu),
        tensor=plan.tensor, cfl=plan.probe_cfl, t_end=horizon,
        output_every=1, upsilon_enabled=False, data_family=plan.data_family,
    )


def decay_config(nu: float, delta: float, plan: SweepPlan) -> RunConfig:
    grid = GridSpec.centered(plan.decay_radius, plan.decay_spacing)
    return RunConfig(
        frame=Frame.SCALED, grid=grid, pulse=PulseParams(delta, nu),
        tensor=scale_tensor(plan.tensor, delta), cfl=plan.decay_cfl,
        t_end=plan.decay_tau_end, output_every=4, upsilon_enabled=False,
        data_family=plan.data_family,
    )


def run_point(nu: float, delta: float, plan: SweepPlan) -> Outcome:
    """Blowup probe first; if it completes, the rescaled decay run decides."""
    monitor = UpsilonMonitor()
    probe = run(probe_config(nu, delta, plan), consumers=(monitor,))
    series = monitor.series
    metrics = {
        "upsilon0": series.values[0] if len(series) else None,
        "max_upsilon": max(series.values) if len(series) else None,
    }
    if probe.termination is Termination.BLOWUP:
        return Outcome(nu, delta, "blowup", t_detect=probe.termination_time,
                       metrics=metrics)

    record = run(decay_config(nu, delta, plan))
    sup = [(r.t, r.sup_u) for r in record.rows]
    initial_sup = sup[0][1]
    final_sup = sup[-1][1]
    metrics["initial_sup_u"] = initial_sup
    metrics["final_sup_u"] = final_sup
    fit = None
    if record.termination is Termination.COMPLETED and initial_sup > 0.0:
        t = np.array([p[0] for p in sup])
        vals = np.array([p[1] for p in sup])
        window = plan.decay.fit_window
        usable = (t >= window[0]) & (t <= window[1]) & (vals > 0.0)
        if np.count_nonzero(usable) >= 10:
            fit = decay_fit(t[usable], vals[usable], window=window,
                            delta=delta, clock="scaled")
            metrics["exponent"] = fit.exponent
            metrics["fit_residual"] = fit.residual
    cls = classify_run(record, fit, initial_sup, final_sup, plan.decay)
    t_detect = record.termination_time if cls == "blowup" else None
    return Outcome(nu, delta, cls, t_detect=t_detect,
                   exponent=fit.exponent if fit else None, metrics=metrics)


def run_sweep(plan: SweepPlan,
              point_runner: Callable[[float, float, SweepPlan], Outcome] | None = None
              ) -> list[Outcome]:
    """All (nu, delta) pairs, in parallel up to the plan's width, merged in
    deterministic (delta, nu) order."""
    runner = point_runner or run_point
    points = [(nu, d) for d in plan.delta_values for nu in plan.nu_values]
    width = plan.worker_count()
    if width > 1 and len(points) > 1:
        with ThreadPoolExecutor(max_workers=width) as pool:
            outs = list(pool.map(lambda p: runner(p[0], p[1], plan), points))
    else:
        outs = [runner(nu, d, plan) for nu, d in points]
    outs.sort(key=lambda o: (o.delta, o.nu))
    return outs


def monotone_warnings(outcomes: list[Outcome]) -> list[str]:
    """Report decay outcomes sitting below a blowup outcome in nu (never
    silently accepted; the dichotomy predicts a monotone table)."""
    warnings = []
    by_delta: dict[float, list[Outcome]] = {}
    for o in outcomes:
        by_delta.setdefault(o.delta, []).append(o)
    for d, outs in by_delta.items():
        outs = sorted(outs, key=lambda o: o.nu)
        max_blowup_nu = None
        for o in outs:
            if o.classification == "blowup":
                max_blowup_nu = o.nu
        for o in outs:
            if o.classification == "decay" and max_blowup_nu is not None \
                    and o.nu < max_blowup_nu:
                warnings.append(
                    f"delta={d}: decay at nu={o.nu} below blowup at nu={max_blowup_nu}"
                )
    return warnings


def bisect_critical(plan: SweepPlan,
                    point_runner: Callable[[float, float, SweepPlan], Outcome] | None = None,
                    cache: dict | None = None
                    ) -> tuple[tuple[float, float], list[Outcome]]:
    """Shrink the nu bracket until it is narrower than the tolerance.

    Endpoints must classify to opposite outcomes (blowup below, decay above).
    Undecided midpoints move the lower endpoint: the surviving interval leans
    toward the decay side, which never discards the critical point.
    """
    if plan.bisect_bracket is None:
        raise SweepError("plan has no bisection bracket")
    runner = point_runner or run_point
    cache = {} if cache is None else cache
    delta = plan.delta_values[0]
    visited: list[Outcome] = []

    def classify(nu: float) -> str:
        key = (round(nu, 12), delta)
        if key not in cache:
            cache[key] = runner(nu, delta, plan)
            visited.append(cache[key])
        return cache[key].classification

    lo, hi = plan.bisect_bracket
    if hi - lo <= plan.bisect_tol:
        return (lo, hi), visited
    budget = plan.bisect_budget
    if budget <= 0:
        return (lo, hi), visited
    c_lo, c_hi = classify(lo), classify(hi)
    budget -= 2
    if c_lo == c_hi:
        raise SweepError(
            f"bracket endpoints classify identically ({c_lo}); nothing to bisect")
    if c_lo != "blowup":
        lo, hi = hi, lo  # orient: blowup side first

    while abs(hi - lo) > plan.bisect_tol and budget > 0:
        mid = 0.5 * (lo + hi)
        c_mid = classify(mid)
        budget -= 1
        if c_mid == "decay":
            hi = mid
        else:  # blowup, or undecided shrinking toward the decay side
            lo = mid
    bracket = (min(lo, hi), max(lo, hi))
    return bracket, visited


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def plan_summary(plan: SweepPlan) -> dict:
    return {
        "nu_values": list(plan.nu_values),
        "delta_values": list(plan.delta_values),
        "tensor": [[j, k, l, v] for (j, k, l), v in plan.tensor.entries],
        "probe_points_per_delta": plan.probe_points_per_delta,
        "probe_cfl": plan.probe_cfl,
        "probe_horizon": plan.probe_horizon,
        "decay_radius": plan.decay_radius,
        "decay_spacing": plan.decay_spacing,
        "decay_tau_end": plan.decay_tau_end,
        "decay_cfl": plan.decay_cfl,
        "decay_criteria": asdict(plan.decay),
        "bisect_bracket": list(plan.bisect_bracket) if plan.bisect_bracket else None,
        "bisect_tol": plan.bisect_tol,
        "bisect_budget": plan.bisect_budget,
        "parallel": plan.parallel,
    }


def persist(outcomes: list[Outcome], plan: SweepPlan, path,
            bracket: tuple[float, float] | None = None) -> None:
    doc = {
        "version": SCHEMA_VERSION,
        "plan": plan_summary(plan),
        "outcomes": [o.to_dict() for o in sorted(outcomes, key=lambda o: (o.delta, o.nu))],
    }
    if bracket is not None:
        doc["bracket"] = list(bracket)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load(path) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    version = doc.get("version")
    if version != SCHEMA_VERSION:
        raise SweepError(f"sweep schema version {version} != {SCHEMA_VERSION}")
    return doc


def phase_csv(outcomes: list[Outcome], fh) -> None:
    """nu,delta,class,metric rows: detection time for blowups, exponent for decay."""
    fh.write("nu,delta,class,metric\n")
    for o in sorted(outcomes, key=lambda o: (o.delta, o.nu)):
        if o.classification == "blowup":
            metric = o.t_detect
        elif o.classification == "decay":
            metric = o.exponent
        else:
            metric = None
        m = f"{metric:.10g}" if metric is not None else "nan"
        fh.write(f"{o.nu:.10g},{o.delta:.10g},{o.classification},{m}\n")
