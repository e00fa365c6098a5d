"""Mollified pulse profiles, short-pulse data assembly, and discrete Sobolev norms.

The blowup construction uses three compactly supported profiles on (-1, 1)
obtained by convolving piecewise-linear seeds with a width-1/16 mollifier:

    fbar = 1 on [-13/16, -3/16]          ->  f,  with f = 1 on [-3/4, -1/4]
    hbar = 1 on [-13/16, 13/16]          ->  h,  with h = 1 on [-3/4,  3/4]
    gbar = (theta+1) on [-13/16, 9/16]   ->  g,  with g' = 1 on [-3/4, -1/4]

The mollifier here is the unit-mass bump 16*alpha(16*theta) with
alpha(t) = C exp(-1/(1-t^2)); a unit 1-D mass is what makes the plateau
values above come out exactly 1.  Derivative tables are built from the
distributional derivative of the seed (indicator part by quadrature, jump
parts as point masses hitting the mollifier directly), never by finite
differencing a quadrature output.

The data pair itself is

    u0(x) = d^(nu+1) * 4 g(x1/d) h(x2/d) h(x3/d)
    u1(x) = d^nu     * 4 f(x1/d) h(x2/d) h(x3/d)

for pulse width d in (0, 1) and amplitude power nu.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from pulsekg.grid import GridError, GridSpec, ScalarField, gradient_component

MOLLIFIER_WIDTH = 1.0 / 16.0
_QUAD_PANELS = 2 ** 12       # composite Simpson panel count for normalization
_TABLE_NODES = 4096
_TABLE_SPAN = (-1.25, 1.25)


def _simpson_weights(n_panels: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of composite Simpson on [a, b] with n_panels panels."""
    if n_panels % 2:
        n_panels += 1
    x = np.linspace(a, b, n_panels + 1)
    w = np.ones(n_panels + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    w *= (b - a) / n_panels / 3.0
    return x, w


def _bump_raw(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    ti = t[inside]
    out[inside] = np.exp(-1.0 / (1.0 - ti * ti))
    return out


@lru_cache(maxsize=1)
def _bump_normalizer() -> float:
    x, w = _simpson_weights(_QUAD_PANELS, -1.0, 1.0)
    return 1.0 / float(np.sum(w * _bump_raw(x)))


def mollifier(theta) -> np.ndarray | float:
    """Unit-mass C-infinity bump supported on (-1, 1)."""
    scalar = np.isscalar(theta)
    out = _bump_normalizer() * _bump_raw(np.atleast_1d(np.asarray(theta, dtype=np.float64)))
    return float(out[0]) if scalar else out


def _scaled_mollifier(t: np.ndarray, width: float) -> np.ndarray:
    """(1/width) * alpha(t/width): unit mass, support (-width, width)."""
    return mollifier(np.asarray(t) / width) / width


@dataclass(frozen=True)
class PiecewiseSeed:
    """Seed profile: sum of linear pieces (c0 + c1*theta) on [a, b], zero outside."""

    name: str
    pieces: tuple[tuple[float, float, float, float], ...]  # (a, b, c0, c1)

    def jumps(self) -> list[tuple[float, float]]:
        """Distributional-derivative point masses (location, weight)."""
        out = []
        for a, b, c0, c1 in self.pieces:
            out.append((a, c0 + c1 * a))      # jump up entering the piece
            out.append((b, -(c0 + c1 * b)))   # jump down leaving it
        return [(loc, w) for loc, w in out if w != 0.0]


SEED_F = PiecewiseSeed("f", ((-13.0 / 16.0, -3.0 / 16.0, 1.0, 0.0),))
SEED_H = PiecewiseSeed("h", ((-13.0 / 16.0, 13.0 / 16.0, 1.0, 0.0),))
SEED_G = PiecewiseSeed("g", ((-13.0 / 16.0, 9.0 / 16.0, 1.0, 1.0),))


@dataclass
class ProfileTable:
    """Uniform tabulation of a mollified profile and its distributional derivative."""

    nodes: np.ndarray
    values: np.ndarray
    derivative_values: np.ndarray
    name: str = ""
    support: tuple[float, float] = (-1.0, 1.0)

    @property
    def spacing(self) -> float:
        return float(self.nodes[1] - self.nodes[0])

    def _interp(self, data: np.ndarray, theta) -> np.ndarray:
        """Cubic 4-point Lagrange interpolation on the uniform table.

        Exactly zero outside the convolution's support interval (cubic
        interpolation would otherwise leak tiny nonzero values past the edge).
        """
        th = np.asarray(theta, dtype=np.float64)
        lo = self.nodes[0]
        dn = self.spacing
        pos = np.clip((th - lo) / dn, 1.0, len(self.nodes) - 3.000001)
        i1 = np.floor(pos).astype(np.int64)
        xi = pos - i1
        # Lagrange weights on stencil {-1, 0, 1, 2} around i1
        w_m1 = -xi * (xi - 1.0) * (xi - 2.0) / 6.0
        w_0 = (xi * xi - 1.0) * (xi - 2.0) / 2.0
        w_p1 = -xi * (xi + 1.0) * (xi - 2.0) / 2.0
        w_p2 = xi * (xi * xi - 1.0) / 6.0
        out = (w_m1 * data[i1 - 1] + w_0 * data[i1] + w_p1 * data[i1 + 1]
               + w_p2 * data[i1 + 2])
        out = np.where((th <= self.support[0]) | (th >= self.support[1]), 0.0, out)
        return out

    def __call__(self, theta) -> np.ndarray:
        return self._interp(self.values, theta)

    def derivative(self, theta) -> np.ndarray:
        return self._interp(self.derivative_values, theta)


def mollify(seed: PiecewiseSeed, width: float = MOLLIFIER_WIDTH,
            nodes: int = _TABLE_NODES) -> ProfileTable:
    """Convolve a piecewise seed with the scaled mollifier, tabulating values
    and the convolution of the seed's distributional derivative."""
    theta = np.linspace(_TABLE_SPAN[0], _TABLE_SPAN[1], nodes)
    values = np.zeros(nodes)
    deriv = np.zeros(nodes)
    # quadrature nodes on [0, 1], mapped into each smooth overlap segment
    s_unit, w_unit = _simpson_weights(512, 0.0, 1.0)

    for a, b, c0, c1 in seed.pieces:
        lo = np.maximum(a, theta - width)
        hi = np.minimum(b, theta + width)
        span = hi - lo
        live = span > 0
        if not np.any(live):
            continue
        y = lo[live, None] + span[live, None] * s_unit[None, :]
        w = span[live, None] * w_unit[None, :]
        kern = _scaled_mollifier(theta[live, None] - y, width)
        values[live] += np.sum(w * (c0 + c1 * y) * kern, axis=1)
        deriv[live] += np.sum(w * c1 * kern, axis=1)

    for loc, jump_w in seed.jumps():
        deriv += jump_w * _scaled_mollifier(theta - loc, width)

    support = (min(p[0] for p in seed.pieces) - width,
               max(p[1] for p in seed.pieces) + width)
    return ProfileTable(theta, values, deriv, seed.name, support)


@lru_cache(maxsize=4)
def blowup_profiles(width: float = MOLLIFIER_WIDTH) -> dict[str, ProfileTable]:
    """The three profile tables used by the blowup data (built once, cached)."""
    return {s.name: mollify(s, width) for s in (SEED_F, SEED_G, SEED_H)}


def export_profiles_csv(path, width: float = MOLLIFIER_WIDTH) -> None:
    """Write theta, f, g, gprime, h columns for plotting/regression fixtures."""
    tabs = blowup_profiles(width)
    f, g, h = tabs["f"], tabs["g"], tabs["h"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["theta", "f", "g", "gprime", "h"])
        for i, th in enumerate(f.nodes):
            writer.writerow([f"{th:.12g}", f"{f.values[i]:.12g}", f"{g.values[i]:.12g}",
                             f"{g.derivative_values[i]:.12g}", f"{h.values[i]:.12g}"])


@dataclass(frozen=True)
class PulseParams:
    """Pulse width delta in (0, 1) and amplitude power nu."""

    delta: float
    nu: float

    def __post_init__(self):
        if not (0.0 < self.delta < 1.0):
            raise ValueError(f"pulse width must lie in (0, 1), got {self.delta}")
        if not math.isfinite(self.nu):
            raise ValueError(f"nu must be finite, got {self.nu}")


@dataclass
class DataPair:
    """Initial data (u at t=0, du/dt at t=0) after pulse scaling."""

    u0: ScalarField
    u1: ScalarField


def _check_grid_covers(grid: GridSpec, radius: float) -> None:
    for a in range(3):
        lo = grid.origin[a]
        hi = grid.origin[a] + (grid.dims[a] - 1) * grid.spacing
        if lo > -radius or hi < radius:
            raise GridError(
                f"grid axis {a} spans [{lo:.4g}, {hi:.4g}] but the data need "
                f"[-{radius:.4g}, {radius:.4g}]"
            )


def assemble_blowup_data(grid: GridSpec, params: PulseParams) -> DataPair:
    """Sample the product pulse data on the grid.

    u0 = 4 d^(nu+1) g(x1/d) h(x2/d) h(x3/d),  u1 = 4 d^nu f(x1/d) h(x2/d) h(x3/d).
    Profile lookups go through cubic interpolation of the cached tables.
    """
    _check_grid_covers(grid, params.delta)
    tabs = blowup_profiles()
    xs = [grid.axis_coords(a) / params.delta for a in range(3)]
    g1 = tabs["g"](xs[0])
    f1 = tabs["f"](xs[0])
    h2 = tabs["h"](xs[1])
    h3 = tabs["h"](xs[2])
    amp0 = 4.0 * params.delta ** (params.nu + 1.0)
    amp1 = 4.0 * params.delta ** params.nu
    u0 = amp0 * g1[:, None, None] * h2[None, :, None] * h3[None, None, :]
    u1 = amp1 * f1[:, None, None] * h2[None, :, None] * h3[None, None, :]
    return DataPair(ScalarField(grid, u0), ScalarField(grid, u1))


@dataclass
class UpsilonInitial:
    """Discrete value of the blowup functional at t = 0, with its exact factorization."""

    value: float
    unit_value: float          # same sum at delta=1, nu=-1 on the unit-scaled grid
    scale_factor: float        # delta^(2 nu + 3)
    under_resolved: bool

    @property
    def factorization_ratio(self) -> float:
        return self.value / (self.scale_factor * self.unit_value)


def _upsilon_sum(grid: GridSpec, pair: DataPair) -> float:
    d1u0 = gradient_component(pair.u0, 0)
    return float(grid.spacing ** 3 * np.sum(pair.u1.values * d1u0.values))


def upsilon_initial(grid: GridSpec, params: PulseParams) -> UpsilonInitial:
    """h^3 sum of u1 * d(u0)/dx1, plus the closed-form scaling cross-check.

    The unit-scale comparison value is computed at (delta=1 limit, nu=-1) on
    the grid rescaled by 1/delta; the discrete sums then factorize exactly as
    value = delta^(2 nu + 3) * unit_value, to round-off.
    """
    pair = assemble_blowup_data(grid, params)
    value = _upsilon_sum(grid, pair)

    unit_grid = GridSpec(
        origin=tuple(c / params.delta for c in grid.origin),
        spacing=grid.spacing / params.delta,
        dims=grid.dims,
    )
    tabs = blowup_profiles()
    xs = [unit_grid.axis_coords(a) for a in range(3)]
    u0u = 4.0 * tabs["g"](xs[0])[:, None, None] * tabs["h"](xs[1])[None, :, None] \
        * tabs["h"](xs[2])[None, None, :]
    u1u = 4.0 * tabs["f"](xs[0])[:, None, None] * tabs["h"](xs[1])[None, :, None] \
        * tabs["h"](xs[2])[None, None, :]
    unit_pair = DataPair(ScalarField(unit_grid, u0u), ScalarField(unit_grid, u1u))
    unit_value = _upsilon_sum(unit_grid, unit_pair)

    return UpsilonInitial(
        value=value,
        unit_value=unit_value,
        scale_factor=params.delta ** (2.0 * params.nu + 3.0),
        under_resolved=grid.spacing > params.delta / 32.0,
    )


def upsilon_unit_oracle(n_panels: int = 2048) -> float:
    """Independent Simpson quadrature of the unit-scale blowup functional.

    Separates into 1-D integrals: 16 * (int f g') * (int h^2)^2, evaluated on
    the profile tables with composite Simpson.  Used to cross-check the grid
    sums; stays independent of any h^3 summation path.
    """
    tabs = blowup_profiles()
    x, w = _simpson_weights(n_panels, -1.0, 1.0)
    a_fg = float(np.sum(w * tabs["f"](x) * tabs["g"].derivative(x)))
    b_h2 = float(np.sum(w * tabs["h"](x) ** 2))
    return 16.0 * a_fg * b_h2 ** 2


def radial_bump(r2: np.ndarray, radius: float = 0.9) -> np.ndarray:
    """C-infinity bump of the squared radius, peak 1, support |x| < radius."""
    q = np.asarray(r2, dtype=np.float64) / (radius * radius)
    out = np.zeros_like(q)
    inside = q < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - q[inside]))
    return out


@lru_cache(maxsize=1)
def _decay_amplitude(order_u0: int = 3, order_u1: int = 2) -> float:
    """Normalizer for the smooth decay pair: ||u0||_H3 + ||u1||_H2 = 1 at unit
    scale, measured once on a fixed reference grid."""
    ref = GridSpec(origin=(-1.0, -1.0, -1.0), spacing=1.0 / 32.0, dims=(65, 65, 65))
    r2 = ref.radius_sq()
    bump = radial_bump(r2)
    y1 = ref.coord_broadcast(0)
    u0 = ScalarField(ref, np.broadcast_to(y1 * bump, ref.shape).copy())
    u1 = ScalarField(ref, bump)
    return 1.0 / (sobolev_norm(u0, order_u0) + sobolev_norm(u1, order_u1))


def assemble_decay_data(grid: GridSpec, params: PulseParams) -> DataPair:
    """Smooth short-pulse pair for dispersive-regime studies.

    Unit-scale shapes u0(y) = A y1 B(|y|), u1(y) = A B(|y|) with B a radial
    bump supported in the unit ball and A fixed so the combined Sobolev size
    of the pair is one (the global-existence hypothesis, truncated at the
    package's diagnostic order).  They overlap so that the blowup functional
    starts positive: int u1 d1(u0) = A^2/2 int B^2 > 0.  Pulse scaling as for
    the blowup pair: (d^(nu+1) u0(x/d), d^nu u1(x/d)).
    """
    _check_grid_covers(grid, params.delta)
    amp = _decay_amplitude()
    r2 = grid.radius_sq() / (params.delta * params.delta)
    bump = radial_bump(r2)
    y1 = grid.coord_broadcast(0) / params.delta
    u0 = params.delta ** (params.nu + 1.0) * amp * y1 * bump
    u1 = params.delta ** params.nu * amp * bump
    return DataPair(ScalarField(grid, np.broadcast_to(u0, grid.shape).copy()),
                    ScalarField(grid, u1))


_EDGE2_FIRST = np.array([-1.5, 2.0, -0.5])  # 2nd-order one-sided d/dx at the wall


def _diff2nd(values: np.ndarray, axis: int, h: float) -> np.ndarray:
    """2nd-order centered first difference (one-sided at the walls)."""
    out = np.empty_like(values)
    v = np.moveaxis(values, axis, 0)
    o = np.moveaxis(out, axis, 0)
    o[1:-1] = (v[2:] - v[:-2]) / (2.0 * h)
    o[0] = (_EDGE2_FIRST[0] * v[0] + _EDGE2_FIRST[1] * v[1] + _EDGE2_FIRST[2] * v[2]) / h
    o[-1] = -(_EDGE2_FIRST[0] * v[-1] + _EDGE2_FIRST[1] * v[-2] + _EDGE2_FIRST[2] * v[-3]) / h
    return out


def sobolev_norm(f: ScalarField, order: int) -> float:
    """Discrete H^order norm via mixed 2nd-order central differences.

    sqrt( h^3 * sum over beta with |beta| <= order of sum (D^beta f)^2 ).
    """
    if order not in range(6):
        raise ValueError(f"order must be in 0..5, got {order}")
    h = f.grid.spacing
    total = np.sum(f.values ** 2)
    # level[k] maps sorted multi-index -> array of D^beta f with |beta| = k
    level = {(): f.values}
    for _ in range(order):
        nxt = {}
        for beta, arr in level.items():
            start = beta[-1] if beta else 0
            for a in range(start, 3):
                nxt[beta + (a,)] = _diff2nd(arr, a, h)
        level = nxt
        for arr in level.values():
            total += np.sum(arr ** 2)
    return float(np.sqrt(h ** 3 * total))
