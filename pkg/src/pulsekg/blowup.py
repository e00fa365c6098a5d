"""The blowup functional, its growth identity, and the closed-form comparison ODE.

Along a run we track

    Upsilon(t) = h^3 sum v * du/dx1          (full grid; the solution is
    rate(t)    = h^3 sum (v * du/dx1)^2       compactly supported, so boundary
                                              terms vanish identically)

For the preset nonlinearity F = (du/dt)^2 du/dx1 these satisfy the exact
identity d Upsilon/dt = rate, and the comparison argument bounds Upsilon from
below by the solution of

    y' = y^2 / (t + delta)^3,   y(0) = y0 > 0,

whose closed form  y(t) = [1/y0 - (1/2)(delta^-2 - (t+delta)^-2)]^-1  blows up
at t* = (delta^-2 - 2/y0)^(-1/2) - delta when the bracket can vanish.  Seeding
y0 = 18 delta^2 gives t*/delta = 3/(2 sqrt 2) - 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from pulsekg.grid import StateSlice, diff_array


def upsilon_arrays(u: np.ndarray, v: np.ndarray, h: float) -> float:
    """h^3 sum of v * du/dx1."""
    return float(h ** 3 * np.sum(v * diff_array(u, 0, h, 1)))


def upsilon(state: StateSlice) -> float:
    """Blowup functional of a slice; requires finite fields."""
    if not (state.u.check_finite() and state.v.check_finite()):
        raise FloatingPointError(f"non-finite state at t={state.t}")
    return upsilon_arrays(state.u.values, state.v.values, state.grid.spacing)


def upsilon_rate_arrays(u: np.ndarray, v: np.ndarray, h: float) -> float:
    w = v * diff_array(u, 0, h, 1)
    return float(h ** 3 * np.sum(w * w))


def upsilon_rate(state: StateSlice) -> float:
    """h^3 sum of (v * du/dx1)^2; the exact d Upsilon/dt for the preset tensor."""
    if not (state.u.check_finite() and state.v.check_finite()):
        raise FloatingPointError(f"non-finite state at t={state.t}")
    return upsilon_rate_arrays(state.u.values, state.v.values, state.grid.spacing)


@dataclass
class UpsilonSeries:
    """Trajectory of the blowup functional along one run."""

    delta: float
    times: list[float] = field(default_factory=list)
    values: list[float] = field(default_factory=list)
    rates: list[float] = field(default_factory=list)

    def append(self, t: float, value: float, rate: float) -> None:
        self.times.append(float(t))
        self.values.append(float(value))
        self.rates.append(float(rate))

    def __len__(self) -> int:
        return len(self.times)

    def csv(self, fh, riccati: "RiccatiSolution | None" = None) -> None:
        fh.write("t,upsilon,rate,riccati_y,ratio\n")
        t0 = self.times[0] if self.times else 0.0
        for t, ups, rate in zip(self.times, self.values, self.rates):
            y = riccati.y(t - t0) if riccati is not None else float("nan")
            ratio = ups / y if (y is not None and np.isfinite(y) and y != 0.0) else float("nan")
            ystr = f"{y:.12g}" if y is not None and np.isfinite(y) else "inf"
            fh.write(f"{t:.12g},{ups:.12g},{rate:.12g},{ystr},{ratio:.12g}\n")


@dataclass
class RiccatiSolution:
    """Closed-form comparison trajectory and its blowup time."""

    y0: float
    delta: float
    t_star: float  # +inf when the trajectory stays finite

    def y(self, t) -> np.ndarray | float:
        """y(t) = [1/y0 - (1/2)(delta^-2 - (t+delta)^-2)]^-1 on [0, t*)."""
        t = np.asarray(t, dtype=np.float64)
        bracket = 1.0 / self.y0 - 0.5 * (self.delta ** -2 - (t + self.delta) ** -2)
        with np.errstate(divide="ignore"):
            out = np.where(bracket > 0.0, 1.0 / np.where(bracket > 0, bracket, 1.0), np.inf)
        return float(out) if out.ndim == 0 else out


def riccati_solve(y0: float, delta: float) -> RiccatiSolution:
    """Solve y' = y^2/(t+delta)^3, y(0) = y0 > 0, in closed form."""
    if not y0 > 0:
        raise ValueError(f"comparison seed must be positive, got {y0}")
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    inv = delta ** -2 - 2.0 / y0
    t_star = inv ** -0.5 - delta if inv > 0.0 else math.inf
    return RiccatiSolution(y0=y0, delta=delta, t_star=t_star)


def blowup_time_bound(delta: float) -> float:
    """t* for the canonical seed y0 = 18 delta^2: (3/(2 sqrt 2) - 1) delta."""
    return riccati_solve(18.0 * delta * delta, delta).t_star


@dataclass
class ComparisonReport:
    """Outcome of checking a measured series against the two comparison bounds."""

    n_samples: int
    inequality_ok: bool                 # Upsilon^2 <= (t+delta)^3 rate (1+tol) everywhere
    inequality_first_violation: int | None
    inequality_max_excess: float        # max of Upsilon^2 / ((t+delta)^3 rate) - 1
    riccati_ok: bool                    # Upsilon >= 0.95 y for all finite-y samples
    riccati_first_violation: int | None
    riccati_min_ratio: float            # min of Upsilon / y over finite-y samples
    passed: bool


def comparison_check(series: UpsilonSeries, tol: float = 0.05,
                     riccati_margin: float = 0.95) -> ComparisonReport:
    """Verify the growth inequality and the closed-form lower bound pointwise.

    Checks Upsilon_i^2 <= (t_i + delta)^3 rate_i (1 + tol) at every sample and
    Upsilon_i >= riccati_margin * y(t_i) for the comparison solution seeded at
    the measured Upsilon(0), reporting the first violation of each.
    """
    if len(series) == 0:
        raise ValueError("empty series")
    d = series.delta
    t0 = series.times[0]
    ineq_first = None
    max_excess = -math.inf
    for i, (t, ups, rate) in enumerate(zip(series.times, series.values, series.rates)):
        bound = (t - t0 + d) ** 3 * rate
        excess = (ups * ups) / bound - 1.0 if bound > 0.0 else (
            0.0 if ups == 0.0 else math.inf)
        max_excess = max(max_excess, excess)
        if excess > tol and ineq_first is None:
            ineq_first = i

    ric = riccati_solve(series.values[0], d) if series.values[0] > 0 else None
    ric_first = None
    min_ratio = math.inf
    if ric is not None:
        for i, (t, ups) in enumerate(zip(series.times, series.values)):
            y = ric.y(t - t0)
            if not np.isfinite(y):
                break
            ratio = ups / y
            min_ratio = min(min_ratio, ratio)
            if ratio < riccati_margin and ric_first is None:
                ric_first = i

    report = ComparisonReport(
        n_samples=len(series),
        inequality_ok=ineq_first is None,
        inequality_first_violation=ineq_first,
        inequality_max_excess=max_excess,
        riccati_ok=ric_first is None,
        riccati_first_violation=ric_first,
        riccati_min_ratio=min_ratio,
        passed=ineq_first is None and ric_first is None,
    )
    return report


class UpsilonMonitor:
    """Slice consumer recording the blowup functional along a run."""

    def __init__(self, every: int = 1):
        self.every = max(1, int(every))
        self.series: UpsilonSeries | None = None
        self._h = None
        self._count = 0

    def start(self, config, state) -> None:
        self.series = UpsilonSeries(delta=config.pulse.delta)
        self._h = config.grid.spacing
        self._count = 0

    def consume(self, state, dv=None) -> None:
        if self._count % self.every == 0:
            u, v = state.u.values, state.v.values
            if np.isfinite(u).all() and np.isfinite(v).all():
                self.series.append(
                    state.t,
                    upsilon_arrays(u, v, self._h),
                    upsilon_rate_arrays(u, v, self._h),
                )
        self._count += 1

    def finish(self, record) -> None:
        pass
