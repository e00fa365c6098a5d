"""Hyperboloid sampling, weighted energies, derivative ladders, and decay fits.

Inside the cone K = {t >= 2, t >= |x| + 1} the level sets t^2 - |x|^2 = s^2
(s >= sqrt(3)) carry the weighted energy

  E(s, w) = h^3 sum over masked x of
            [ w_t^2 + |grad w|^2 + 2 sum_a (x_a/t) w_t w_a + d^2 w^2 ]

evaluated at t(x) = sqrt(s^2 + |x|^2), which coincides pointwise with the
manifestly nonnegative form

            [ (s/t w_t)^2 + sum_a ((x_a/t) w_t + w_a)^2 + d^2 w^2 ].

Fields are sampled on the hyperboloid by 4-point cubic Lagrange interpolation
in time from a ring of recent slices; the interpolant's time derivative
supplies w_t, and per-slice spatial stencils supply w_a.  The derivative
ladder applies boosts L_a and partials to the solution before sampling,
truncated at combined order two.

Decay fitting is a least-squares line in log-log axes against the dispersive
clock z(t): z = t/delta + 2 for original-frame series (so the reference decay
is z^(-3/2)), and z = t for rescaled-frame series, whose time variable is
already that clock.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from pulsekg.grid import GridSpec, StateSlice, diff_array, laplacian_array
from pulsekg.nonlinearity import CubicTensor, eval_cubic_arrays

S_FLOOR = math.sqrt(3.0)


class SpanError(RuntimeError):
    """Requested time lies outside the buffer's interpolable span."""


# ---------------------------------------------------------------------------
# slice ring + per-slice derived-field cache
# ---------------------------------------------------------------------------


class _Entry:
    __slots__ = ("t", "u", "v", "cache")

    def __init__(self, t: float, u: np.ndarray, v: np.ndarray):
        self.t = t
        self.u = u
        self.v = v
        self.cache: dict = {}


class FieldProvider:
    """Computes named per-slice fields (derivatives, boosts, the nonlinearity).

    Member fields are labelled by (I, J): J lists boost axes (1-based, applied
    to u first, in decreasing index order so J=(1,2) means L1 L2 u), I lists
    partials (0 = time) applied afterwards.  Time derivatives are eliminated
    through v and the equation's acceleration lap(u) - m^2 u + F.
    """

    def __init__(self, grid: GridSpec, tensor: CubicTensor | None = None,
                 mass: float = 0.0, forcing=None):
        self.grid = grid
        self.h = grid.spacing
        self.tensor = tensor
        self.mass = mass
        self.forcing = forcing

    def get(self, entry: _Entry, name) -> np.ndarray:
        if name in entry.cache:
            return entry.cache[name]
        arr = self._compute(entry, name)
        entry.cache[name] = arr
        return arr

    def _compute(self, entry: _Entry, name) -> np.ndarray:
        h, g = self.h, self.grid
        if name == "u":
            return entry.u
        if name == "v":
            return entry.v
        if name == "accel":
            acc = laplacian_array(entry.u, h)
            if self.mass:
                acc -= (self.mass * self.mass) * entry.u
            if self.tensor is not None and self.tensor.entries:
                grads = [None, None, None]
                for a in self.tensor.needed_gradient_axes():
                    grads[a] = self.get(entry, ("grad", "u", a))
                acc += eval_cubic_arrays(self.tensor, entry.u, entry.v, tuple(grads))
            if self.forcing is not None:
                acc += self.forcing(entry.t, g)
            return acc
        if name == "F":
            if self.tensor is None or not self.tensor.entries:
                return np.zeros_like(entry.u)
            grads = [None, None, None]
            for a in self.tensor.needed_gradient_axes():
                grads[a] = self.get(entry, ("grad", "u", a))
            return eval_cubic_arrays(self.tensor, entry.u, entry.v, tuple(grads))
        kind = name[0]
        if kind == "grad":
            _, base, a = name
            return diff_array(self.get(entry, base), a, h, 1)
        if kind == "member":
            _, I, J = name
            return self._member(entry, I, J)
        raise KeyError(f"unknown per-slice field {name!r}")

    def _member(self, entry: _Entry, I: tuple[int, ...], J: tuple[int, ...]) -> np.ndarray:
        """Evaluate the ladder member (partial^I boost^J u) on one slice."""
        h, g = self.h, self.grid
        u, v = entry.u, entry.v

        def x(a1):  # broadcastable coordinate for 1-based axis
            return g.coord_broadcast(a1 - 1)

        def D(base, a1):
            return self.get(entry, ("grad", base, a1 - 1))

        def DD(a1, b1):
            lo, hi = min(a1, b1), max(a1, b1)
            key = ("grad2", lo, hi)
            if key not in entry.cache:
                entry.cache[key] = diff_array(D("u", hi), lo - 1, h, 1)
            return entry.cache[key]

        t = entry.t
        if len(I) + len(J) == 0:
            return u
        if len(I) == 1 and not J:
            (al,) = I
            return v if al == 0 else D("u", al)
        if len(J) == 1 and not I:
            (a,) = J
            return x(a) * v + t * D("u", a)
        if len(I) == 2 and not J:
            al, be = I  # sorted, al <= be
            if al == 0 and be == 0:
                return self.get(entry, "accel")
            if al == 0:
                return D("v", be)
            return DD(al, be)
        if len(I) == 1 and len(J) == 1:
            (al,), (a,) = I, J
            if al == 0:
                return x(a) * self.get(entry, "accel") + D("u", a) + t * D("v", a)
            out = x(a) * D("v", al) + t * DD(al, a)
            if al == a:
                out = out + v
            return out
        if len(J) == 2 and not I:
            a, b = J  # canonical: L_a applied after L_b
            acc = self.get(entry, "accel")
            out = x(a) * (x(b) * acc + D("u", b) + t * D("v", b)) \
                + t * (x(b) * D("v", a) + t * DD(a, b))
            if a == b:
                out = out + t * v
            return out
        raise ValueError(f"ladder member (I={I}, J={J}) beyond supported order 2")


class SliceBuffer:
    """Ring of the last B slices with uniform dt, for cubic time interpolation."""

    def __init__(self, capacity: int = 8, provider: FieldProvider | None = None):
        if capacity < 4:
            raise ValueError("need at least 4 slices for cubic interpolation")
        self.capacity = capacity
        self.provider = provider
        self.entries: deque[_Entry] = deque(maxlen=capacity)
        self.dt: float | None = None

    def push(self, state: StateSlice) -> None:
        self.push_arrays(state.t, state.u.values, state.v.values)

    def push_arrays(self, t: float, u: np.ndarray, v: np.ndarray) -> None:
        if self.entries:
            step = t - self.entries[-1].t
            if self.dt is None:
                if step <= 0:
                    raise ValueError("buffer times must increase")
                self.dt = step
            elif abs(step - self.dt) > 1e-9 * max(1.0, abs(self.dt)):
                raise ValueError(f"non-uniform slice spacing: {step} vs {self.dt}")
        if self.provider is None:
            raise ValueError("buffer needs a FieldProvider before pushing")
        self.entries.append(_Entry(t, u, v))

    @property
    def times(self) -> np.ndarray:
        return np.array([e.t for e in self.entries])

    def span(self) -> tuple[float, float]:
        """Interval where 4-point interpolation is centered (one dt inside each end)."""
        if len(self.entries) < 4:
            raise SpanError("buffer holds fewer than 4 slices")
        return self.entries[1].t, self.entries[-2].t

    def window_values(self, names: Sequence, base: int) -> list[list[np.ndarray]]:
        """Per-name list of the 4 slice arrays (base-1 .. base+2)."""
        return [[self.provider.get(self.entries[base + k], nm) for k in (-1, 0, 1, 2)]
                for nm in names]


def _lagrange_weights(xi: np.ndarray) -> tuple[np.ndarray, ...]:
    """Cubic Lagrange weights on nodes {-1, 0, 1, 2} at offset xi from node 0."""
    w_m1 = -xi * (xi - 1.0) * (xi - 2.0) / 6.0
    w_0 = (xi * xi - 1.0) * (xi - 2.0) / 2.0
    w_p1 = -xi * (xi + 1.0) * (xi - 2.0) / 2.0
    w_p2 = xi * (xi * xi - 1.0) / 6.0
    return w_m1, w_0, w_p1, w_p2


def _lagrange_dweights(xi: np.ndarray, dt: float) -> tuple[np.ndarray, ...]:
    d_m1 = -(3.0 * xi * xi - 6.0 * xi + 2.0) / 6.0
    d_0 = (3.0 * xi * xi - 4.0 * xi - 1.0) / 2.0
    d_p1 = -(3.0 * xi * xi - 2.0 * xi - 2.0) / 2.0
    d_p2 = (3.0 * xi * xi - 1.0) / 6.0
    return tuple(w / dt for w in (d_m1, d_0, d_p1, d_p2))


# ---------------------------------------------------------------------------
# hyperboloid geometry
# ---------------------------------------------------------------------------


@dataclass
class HyperboloidGeometry:
    """Masked grid points of one hyperboloid, sorted by their sample time."""

    s: float
    idx: tuple[np.ndarray, np.ndarray, np.ndarray]  # grid indices, t-sorted
    t_of_x: np.ndarray                               # sqrt(s^2 + |x|^2), sorted
    coords: tuple[np.ndarray, np.ndarray, np.ndarray]

    @property
    def npoints(self) -> int:
        return self.t_of_x.size


def hyperboloid_geometry(grid: GridSpec, s: float) -> HyperboloidGeometry:
    """Grid points of the cone-restricted hyperboloid: |x| <= (s^2-1)/2 and
    t(x) >= 2 (the latter only bites for s < 2)."""
    if s < S_FLOOR - 1e-12:
        raise ValueError(f"hyperboloids live at s >= sqrt(3), got {s}")
    r2 = grid.radius_sq()
    mask = r2 <= ((s * s - 1.0) / 2.0) ** 2
    if s < 2.0:
        mask &= r2 >= (4.0 - s * s)
    ii = np.nonzero(mask)
    t_of_x = np.sqrt(s * s + r2[ii])
    order = np.argsort(t_of_x, kind="stable")
    ii = tuple(i[order] for i in ii)
    t_of_x = t_of_x[order]
    coords = tuple(grid.axis_coords(a)[ii[a]] for a in range(3))
    return HyperboloidGeometry(s=s, idx=ii, t_of_x=t_of_x, coords=coords)


@dataclass
class HyperboloidSample:
    """Fields interpolated onto one hyperboloid, plus both energy forms."""

    s: float
    delta: float
    grid: GridSpec
    geometry: HyperboloidGeometry
    u: np.ndarray
    v: np.ndarray
    grad: tuple[np.ndarray, np.ndarray, np.ndarray]
    E_flat: float = 0.0
    E_hyper: float = 0.0


def _interp_window(buffer: SliceBuffer, names: Sequence, pts_idx, t_targets: np.ndarray,
                   want_ddt: Sequence[bool] | None = None):
    """Interpolate the named per-slice fields at per-point times t_targets.

    Groups points by their 4-slice window.  Returns, per name, the values
    (and the time derivative where requested).
    """
    times = buffer.times
    n = len(times)
    if n < 4:
        raise SpanError("buffer holds fewer than 4 slices")
    dt = buffer.dt
    if np.any(t_targets < times[0] - 1e-9) or np.any(t_targets > times[-1] + 1e-9):
        raise SpanError("sample time outside the buffered range")
    base = np.clip(np.searchsorted(times, t_targets, side="right") - 1, 1, n - 3)
    want_ddt = want_ddt or [False] * len(names)
    out_vals = [np.empty(t_targets.shape) for _ in names]
    out_ddt = [np.empty(t_targets.shape) if w else None for w in want_ddt]

    for b in np.unique(base):
        sel = base == b
        xi = (t_targets[sel] - times[b]) / dt
        wts = _lagrange_weights(xi)
        dwts = _lagrange_dweights(xi, dt) if any(want_ddt) else None
        sub_idx = tuple(i[sel] for i in pts_idx)
        window = buffer.window_values(names, int(b))
        for q, slices4 in enumerate(window):
            samples = [arr[sub_idx] for arr in slices4]
            out_vals[q][sel] = sum(w * smp for w, smp in zip(wts, samples))
            if want_ddt[q]:
                out_ddt[q][sel] = sum(w * smp for w, smp in zip(dwts, samples))
    return out_vals, out_ddt


def sample_hyperboloid(buffer: SliceBuffer, s: float, delta: float) -> HyperboloidSample:
    """Interpolate u, v, grad u onto the hyperboloid and attach both energies.

    Every masked point's t(x) must lie within the buffered range; otherwise a
    SpanError tells the caller to defer until the buffer advances.
    """
    grid = buffer.provider.grid
    geo = hyperboloid_geometry(grid, s)
    names = ["u", "v", ("grad", "u", 0), ("grad", "u", 1), ("grad", "u", 2)]
    vals, _ = _interp_window(buffer, names, geo.idx, geo.t_of_x)
    sample = HyperboloidSample(
        s=s, delta=delta, grid=grid, geometry=geo,
        u=vals[0], v=vals[1], grad=(vals[2], vals[3], vals[4]),
    )
    sample.E_flat = energy_flat_form(sample, delta)
    sample.E_hyper = energy_hyper_form(sample, delta)
    return sample


def energy_flat_form(sample: HyperboloidSample, delta: float) -> float:
    """h^3 sum of w_t^2 + |grad w|^2 + 2 (x_a/t) w_t w_a + d^2 w^2 on the mask."""
    geo = sample.geometry
    t = geo.t_of_x
    acc = sample.v ** 2 + (delta * sample.u) ** 2
    for a in range(3):
        acc += sample.grad[a] ** 2
        acc += 2.0 * (geo.coords[a] / t) * sample.v * sample.grad[a]
    return float(sample.grid.spacing ** 3 * np.sum(acc))


def energy_hyper_form(sample: HyperboloidSample, delta: float) -> float:
    """Equivalent nonnegative form: (s/t w_t)^2 + sum ((x_a/t) w_t + w_a)^2 + d^2 w^2."""
    geo = sample.geometry
    t = geo.t_of_x
    acc = (sample.s / t * sample.v) ** 2 + (delta * sample.u) ** 2
    for a in range(3):
        acc += ((geo.coords[a] / t) * sample.v + sample.grad[a]) ** 2
    return float(sample.grid.spacing ** 3 * np.sum(acc))


# ---------------------------------------------------------------------------
# derivative ladder
# ---------------------------------------------------------------------------


def ladder_members(max_order: int = 2) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    """(I, J) multi-indices with |I| + |J| <= max_order, lexicographic order."""
    if max_order > 2:
        raise ValueError("ladder is truncated at combined order 2")
    members = []
    partial_sets = {0: [()], 1: [(al,) for al in range(4)],
                    2: [(a, b) for a in range(4) for b in range(a, 4)]}
    boost_sets = {0: [()], 1: [(a,) for a in (1, 2, 3)],
                  2: [(a, b) for a in (1, 2, 3) for b in range(a, 4) if b >= a and b <= 3]}
    for order in range(max_order + 1):
        for ni in range(order + 1):
            nj = order - ni
            if nj > 2 or ni > 2:
                continue
            for I in partial_sets[ni]:
                for J in boost_sets[nj]:
                    members.append((I, J))
    return members


def member_label(I: tuple[int, ...], J: tuple[int, ...]) -> str:
    parts = [f"d{al}" if al else "dt" for al in I] + [f"L{a}" for a in J]
    return ".".join(parts) if parts else "u"


@dataclass
class LadderResult:
    s: float
    entries: list[tuple[str, float]]    # (label, E^(1/2)) in enumeration order
    M: list[float]                      # cumulative sums by combined order

    def sum_up_to(self, order: int) -> float:
        return self.M[order]


def _member_energy(buffer: SliceBuffer, geo: HyperboloidGeometry, delta: float,
                   I: tuple[int, ...], J: tuple[int, ...]) -> float:
    """E(s, member) with the member's w_t from the interpolant derivative."""
    grid = buffer.provider.grid
    wname = ("member", I, J)
    names = [wname] + [("grad", wname, a) for a in range(3)]
    vals, ddts = _interp_window(buffer, names, geo.idx, geo.t_of_x,
                                want_ddt=[True, False, False, False])
    w, wt = vals[0], ddts[0]
    gx, gy, gz = vals[1], vals[2], vals[3]
    t = geo.t_of_x
    acc = (geo.s / t * wt) ** 2 + (delta * w) ** 2
    for a, gw in enumerate((gx, gy, gz)):
        acc += ((geo.coords[a] / t) * wt + gw) ** 2
    return float(grid.spacing ** 3 * np.sum(acc))


def energy_ladder(buffer: SliceBuffer, s: float, delta: float,
                  max_order: int = 2) -> LadderResult:
    """E^(1/2) for every member with |I|+|J| <= max_order, plus the partial sums."""
    geo = hyperboloid_geometry(buffer.provider.grid, s)
    entries = []
    sums = [0.0] * (max_order + 1)
    for I, J in ladder_members(max_order):
        e_half = math.sqrt(max(_member_energy(buffer, geo, delta, I, J), 0.0))
        entries.append((member_label(I, J), e_half))
        for k in range(len(I) + len(J), max_order + 1):
            sums[k] += e_half
    return LadderResult(s=s, entries=entries, M=sums)


# ---------------------------------------------------------------------------
# inequality diagnostics
# ---------------------------------------------------------------------------


def sobolev_embedding_check(buffer: SliceBuffer, s: float) -> float:
    """sup over the mask of t^(3/2) |u| divided by the L^2 norms of boost
    derivatives up to order two; a boundedness diagnostic across s."""
    grid = buffer.provider.grid
    geo = hyperboloid_geometry(grid, s)
    if geo.npoints == 0:
        return 0.0
    members = [(I, J) for I, J in ladder_members(2) if not I]
    names = [("member", I, J) for I, J in members]
    vals, _ = _interp_window(buffer, names, geo.idx, geo.t_of_x)
    h3 = grid.spacing ** 3
    denom = sum(math.sqrt(max(float(np.sum(v * v)) * h3, 0.0)) for v in vals)
    numer = float(np.max(geo.t_of_x ** 1.5 * np.abs(vals[0])))
    if denom == 0.0:
        if numer == 0.0:
            return 0.0
        raise ZeroDivisionError("zero boost norms with a nonzero field")
    return numer / denom


def pointwise_decay_check(buffer: SliceBuffer, s: float, delta: float,
                          order: int = 0) -> tuple[float, float]:
    """LHS/RHS ratios of the two pointwise decay bounds.

    ratio_tight: sup over members w, |I|+|J| <= order, of
                 sup_mask [ sum_al (s/t)|d_al w| + delta |w| ]  over  s^(-3/2) M2
    ratio_cone:  same with weight (t/s) and s^(-1) M2.
    Both stay bounded across s on a healthy run; homogeneous of degree 0 in u.
    """
    if order > 1:
        raise ValueError("kept within the ladder's reach: order <= 1")
    grid = buffer.provider.grid
    geo = hyperboloid_geometry(grid, s)
    if geo.npoints == 0:
        return 0.0, 0.0
    ladder = energy_ladder(buffer, s, delta, max_order=2)
    rhs = ladder.M[2]
    t = geo.t_of_x
    sup_tight = 0.0
    sup_cone = 0.0
    for I, J in ladder_members(order):
        wname = ("member", I, J)
        names = [wname] + [("grad", wname, a) for a in range(3)]
        vals, ddts = _interp_window(buffer, names, geo.idx, geo.t_of_x,
                                    want_ddt=[True, False, False, False])
        w, wt = vals[0], ddts[0]
        abs_sum = np.abs(wt)
        for a in range(3):
            abs_sum = abs_sum + np.abs(vals[1 + a])
        sup_tight = max(sup_tight, float(np.max((s / t) * abs_sum + delta * np.abs(w))))
        sup_cone = max(sup_cone, float(np.max((t / s) * abs_sum)))
    if rhs == 0.0:
        if sup_tight == 0.0 and sup_cone == 0.0:
            return 0.0, 0.0
        raise ZeroDivisionError("zero ladder with a nonzero field")
    return sup_tight / (s ** -1.5 * rhs), sup_cone / (s ** -1.0 * rhs)


def flux_identity_check(s_values: Sequence[float], energies: Sequence[float],
                        fluxes: Sequence[float]) -> tuple[float, np.ndarray]:
    """Compare dE/ds (central differences) against the sampled flux integral.

    Needs at least 5 uniformly spaced s samples.  The defect at each interior
    s is |dE/ds - flux| normalized by max(max|flux|, max(E)/s-range) so that a
    flux-free (linear) run reports the energy's relative s-slope.  Returns
    (max interior defect, per-s defect array with NaN ends).
    """
    s = np.asarray(s_values, dtype=float)
    E = np.asarray(energies, dtype=float)
    F = np.asarray(fluxes, dtype=float)
    if s.size < 5:
        raise ValueError("need at least 5 consecutive s samples")
    ds = np.diff(s)
    if np.max(np.abs(ds - ds[0])) > 1e-9 * max(abs(ds[0]), 1e-30):
        raise ValueError("s samples must be uniformly spaced")
    dEds = np.full_like(E, np.nan)
    dEds[1:-1] = (E[2:] - E[:-2]) / (2.0 * ds[0])
    scale = max(float(np.max(np.abs(F))), float(np.max(E)) / (s[-1] - s[0]), 1e-300)
    defect = np.abs(dEds - F) / scale
    return float(np.nanmax(defect[1:-1])), defect


# ---------------------------------------------------------------------------
# decay-rate fitting
# ---------------------------------------------------------------------------


@dataclass
class DecayFit:
    window: tuple[float, float]
    exponent: float
    amplitude: float
    residual: float
    n_samples: int

    def to_json(self) -> str:
        return json.dumps({
            "window": list(self.window),
            "exponent": self.exponent,
            "amplitude": self.amplitude,
            "residual": self.residual,
            "sample_count": self.n_samples,
        }, indent=2, sort_keys=True)


def decay_fit(times: Sequence[float], values: Sequence[float],
              window: tuple[float, float], delta: float,
              clock: str = "original") -> DecayFit:
    """Least-squares power-law fit value ~ A * z^p on the dispersive clock.

    clock='original' fits against z = t/delta + 2; clock='scaled' uses z = t
    directly (the rescaled frame's time already is that clock).
    """
    t = np.asarray(times, dtype=float)
    val = np.asarray(values, dtype=float)
    sel = (t >= window[0]) & (t <= window[1])
    t, val = t[sel], val[sel]
    if t.size < 10:
        raise ValueError(f"need at least 10 samples in the window, got {t.size}")
    if np.any(val <= 0.0):
        raise ValueError("power-law fit needs positive values in the window")
    if clock == "original":
        z = t / delta + 2.0
    elif clock == "scaled":
        z = t
    else:
        raise ValueError(f"unknown clock {clock!r}")
    lz = np.log(z)
    lv = np.log(val)
    p, logA = np.polyfit(lz, lv, 1)
    resid = lv - (p * lz + logA)
    return DecayFit(
        window=(float(window[0]), float(window[1])),
        exponent=float(p),
        amplitude=float(np.exp(logA)),
        residual=float(np.sqrt(np.mean(resid ** 2))),
        n_samples=int(t.size),
    )


# ---------------------------------------------------------------------------
# streaming tracker: fills hyperboloids incrementally as a run advances
# ---------------------------------------------------------------------------


@dataclass
class HyperboloidRow:
    s: float
    E_flat: float
    E_hyper: float
    M: list[float]
    flux: float
    complete: bool


class _Accumulator:
    """Running sums for one hyperboloid; points finalize in time order."""

    def __init__(self, geo: HyperboloidGeometry, delta: float, ladder_order: int,
                 with_flux: bool):
        self.geo = geo
        self.delta = delta
        self.ladder_order = ladder_order
        self.with_flux = with_flux
        self.pointer = 0
        self.skipped = 0
        self.E_flat = 0.0
        self.E_hyper = 0.0
        self.flux = 0.0
        self.members = ladder_members(ladder_order) if ladder_order >= 0 else []
        self.member_E = [0.0] * len(self.members)

    @property
    def complete(self) -> bool:
        return self.pointer >= self.geo.npoints and self.skipped == 0


class HyperboloidTracker:
    """Slice consumer that accumulates E(s), the flux integral, and optional
    ladder energies for a set of s values while a run marches forward."""

    def __init__(self, s_values: Iterable[float], delta: float,
                 ladder_order: int = -1, with_flux: bool = True, ring: int = 8):
        self.s_values = [float(s) for s in s_values]
        self.delta = delta
        self.ladder_order = ladder_order
        self.with_flux = with_flux
        self.ring = max(8, ring)
        self.buffer: SliceBuffer | None = None
        self.accs: list[_Accumulator] = []
        self._count = 0

    # SliceConsumer interface -------------------------------------------------
    def start(self, config, state) -> None:
        provider = FieldProvider(config.grid, tensor=config.tensor, mass=config.mass,
                                 forcing=config.forcing)
        self.buffer = SliceBuffer(self.ring, provider)
        self.accs = [
            _Accumulator(hyperboloid_geometry(config.grid, s), self.delta,
                         self.ladder_order, self.with_flux)
            for s in self.s_values
        ]

    def consume(self, state, dv=None) -> None:
        self.buffer.push(state)
        self._count += 1
        n = len(self.buffer.entries)
        if n < 4:
            return
        times = self.buffer.times
        if self._count == 4:
            lo, hi = times[-4], times[-2]   # first window reaches back to the start
        else:
            lo, hi = times[-3], times[-2]
        self._process(lo, hi, closed_right=False)

    def finish(self, record) -> None:
        if self.buffer is None or len(self.buffer.entries) < 4:
            return
        times = self.buffer.times
        self._process(times[-2], times[-1], closed_right=True)

    # internals ----------------------------------------------------------------
    def _process(self, lo: float, hi: float, closed_right: bool) -> None:
        base = len(self.buffer.entries) - 3  # window slices: base-1 .. base+2
        for acc in self.accs:
            if acc.complete:
                continue
            t_all = acc.geo.t_of_x
            start = acc.pointer
            stop = np.searchsorted(t_all, hi, side="right" if closed_right else "left")
            if stop <= start:
                continue
            if t_all[start] < lo - 1e-9:
                # gap: run began after this hyperboloid's earliest time
                acc.skipped += int(stop) - start
                acc.pointer = int(stop)
                continue
            sl = slice(start, stop)
            self._accumulate(acc, sl, base)
            acc.pointer = int(stop)

    def _accumulate(self, acc: _Accumulator, sl: slice, base: int) -> None:
        buf = self.buffer
        geo = acc.geo
        idx = tuple(i[sl] for i in geo.idx)
        tgt = geo.t_of_x[sl]
        names = ["u", "v", ("grad", "u", 0), ("grad", "u", 1), ("grad", "u", 2)]
        want = [False, True, False, False, False]
        if acc.with_flux:
            names.append("F")
            want.append(False)
        times = buf.times
        xi = (tgt - times[base]) / buf.dt
        wts = _lagrange_weights(xi)
        dwts = _lagrange_dweights(xi, buf.dt)
        window = buf.window_values(names, base)
        vals = []
        ddts = []
        for q, slices4 in enumerate(window):
            samples = [arr[idx] for arr in slices4]
            vals.append(sum(w * smp for w, smp in zip(wts, samples)))
            ddts.append(sum(w * smp for w, smp in zip(dwts, samples)) if want[q] else None)

        u_h, v_h = vals[0], vals[1]
        g_h = vals[2:5]
        t = tgt
        h3 = buf.provider.grid.spacing ** 3
        d = acc.delta
        flat = v_h ** 2 + (d * u_h) ** 2
        hyp = (geo.s / t * v_h) ** 2 + (d * u_h) ** 2
        for a in range(3):
            xa_t = geo.coords[a][sl] / t
            flat += g_h[a] ** 2 + 2.0 * xa_t * v_h * g_h[a]
            hyp += (xa_t * v_h + g_h[a]) ** 2
        acc.E_flat += float(h3 * np.sum(flat))
        acc.E_hyper += float(h3 * np.sum(hyp))
        if acc.with_flux:
            F_h = vals[5]
            acc.flux += float(h3 * np.sum(2.0 * (geo.s / t) * v_h * F_h))

        for mi, (I, J) in enumerate(acc.members):
            wname = ("member", I, J)
            mnames = [wname] + [("grad", wname, a) for a in range(3)]
            mwindow = buf.window_values(mnames, base)
            msamples = [[arr[idx] for arr in slices4] for slices4 in mwindow]
            w_val = sum(w * smp for w, smp in zip(wts, msamples[0]))
            w_dt = sum(w * smp for w, smp in zip(dwts, msamples[0]))
            e = (geo.s / t * w_dt) ** 2 + (d * w_val) ** 2
            for a in range(3):
                gw = sum(w * smp for w, smp in zip(wts, msamples[1 + a]))
                e += ((geo.coords[a][sl] / t) * w_dt + gw) ** 2
            acc.member_E[mi] += float(h3 * np.sum(e))

    # results --------------------------------------------------------------------
    def rows(self) -> list[HyperboloidRow]:
        out = []
        for s, acc in zip(self.s_values, self.accs):
            if acc.ladder_order >= 0:
                sums = [0.0] * (acc.ladder_order + 1)
                for (I, J), E in zip(acc.members, acc.member_E):
                    for k in range(len(I) + len(J), acc.ladder_order + 1):
                        sums[k] += math.sqrt(max(E, 0.0))
                M = sums
            else:
                M = [math.sqrt(max(acc.E_flat, 0.0))]
            out.append(HyperboloidRow(
                s=s, E_flat=acc.E_flat, E_hyper=acc.E_hyper, M=M,
                flux=acc.flux, complete=acc.complete,
            ))
        return out


def write_hyperboloid_csv(fh, rows: list[HyperboloidRow]) -> None:
    """CSV columns s,E_flat,E_hyper,M0,M1,M2,flux,defect (defect from the flux
    identity across completed rows; NaN where undefined)."""
    done = [r for r in rows if r.complete]
    defects = {}
    if len(done) >= 5:
        _, per_s = flux_identity_check([r.s for r in done],
                                       [r.E_flat for r in done],
                                       [r.flux for r in done])
        defects = {r.s: d for r, d in zip(done, per_s)}
    fh.write("s,E_flat,E_hyper,M0,M1,M2,flux,defect\n")
    for r in rows:
        M = list(r.M) + [float("nan")] * (3 - len(r.M))
        d = defects.get(r.s, float("nan"))
        fh.write(f"{r.s:.12g},{r.E_flat:.12g},{r.E_hyper:.12g},"
                 f"{M[0]:.12g},{M[1]:.12g},{M[2]:.12g},{r.flux:.12g},{d:.12g}\n")
