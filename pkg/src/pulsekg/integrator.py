"""Method-of-lines evolution of u_tt = lap(u) - m^2 u + F(u, du).

Two frames share the one right-hand side:

  ORIGINAL: unit mass m = 1, coefficients g, data (d^(nu+1) u0(x/d), d^nu u1(x/d))
            starting at t = 0; blowup studies live here on a box of half-width
            1.5 d, where the detection horizon fits inside the causal diamond.
  SCALED:   mass m = d, coefficients scaled by d^(2 - n_j - n_k - n_l), data
            with unit-size support starting at t = 2; decay studies live here.

Time stepping is classical RK4 with dt = cfl * h.  The boundary condition is
homogeneous Dirichlet on a domain sized so that, at propagation speed one,
nothing reaches the walls before t_end (plus a 4-cell stencil halo); the
boundary is then causally irrelevant and the one-sided stencils are a safety
net, not the accuracy path.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from pulsekg.grid import (
    GridError,
    GridSpec,
    ScalarField,
    StateSlice,
    diff_array,
    laplacian_array,
)
from pulsekg.nonlinearity import CubicTensor, ZERO_TENSOR, eval_cubic_arrays
from pulsekg.profiles import PulseParams, assemble_blowup_data, assemble_decay_data


class Frame(enum.Enum):
    ORIGINAL = "original"
    SCALED = "scaled"


class Termination(enum.Enum):
    COMPLETED = "completed"
    BLOWUP = "blowup"
    NUMERICAL_FAILURE = "numerical_failure"


class BlowupCause(enum.Enum):
    THRESHOLD = "threshold"
    NONFINITE = "nonfinite"


class ConfigError(ValueError):
    """Raised when a run configuration violates its invariants."""


@dataclass
class BlowupEvent:
    t: float
    cause: BlowupCause


@dataclass
class RunConfig:
    frame: Frame
    grid: GridSpec
    pulse: PulseParams
    tensor: CubicTensor = ZERO_TENSOR      # already scaled when frame=SCALED
    cfl: float = 0.25
    t_start: float | None = None           # default: 0 (original) / 2 (scaled)
    t_end: float = 1.0
    output_every: int = 1
    blowup_threshold: float | None = None  # default: 1e6 * (sup|u|+sup|v|+1) at start
    mass: float | None = None              # default: 1 (original) / delta (scaled)
    data_family: str = "pulse"              # "pulse" (the blowup pair) or "smooth"
    initial_data: Callable[[GridSpec], tuple[np.ndarray, np.ndarray]] | None = None
    forcing: Callable[[float, GridSpec], np.ndarray] | None = None  # validation only
    upsilon_enabled: bool = True
    checkpoint_every: int = 0
    checkpoint_dir: str | None = None
    enforce_domain_invariant: bool = True
    boundary_closure: str = "odd"   # evolution stencil ghosts; see grid.diff_array

    def __post_init__(self):
        if self.t_start is None:
            self.t_start = 0.0 if self.frame is Frame.ORIGINAL else 2.0
        if self.mass is None:
            self.mass = 1.0 if self.frame is Frame.ORIGINAL else self.pulse.delta
        expected_m = 1.0 if self.frame is Frame.ORIGINAL else self.pulse.delta
        if abs(self.mass - expected_m) > 1e-12:
            raise ConfigError(
                f"{self.frame.value} frame requires mass {expected_m}, got {self.mass}"
            )
        if not (0.0 < self.cfl <= 0.5):
            raise ConfigError(f"cfl must lie in (0, 0.5], got {self.cfl}")
        if self.t_end <= self.t_start:
            raise ConfigError("t_end must exceed t_start")
        if self.output_every < 1:
            raise ConfigError("output_every must be >= 1")
        if self.enforce_domain_invariant:
            self._check_domain()

    def _check_domain(self):
        """Half-width >= data support radius + run duration + 4h (speed-1 cone)."""
        support = self.pulse.delta if self.frame is Frame.ORIGINAL else 1.0
        if self.initial_data is not None:
            return  # caller-supplied data: support unknown, caller's responsibility
        need = support + (self.t_end - self.t_start) + 4.0 * self.grid.spacing
        for a in range(3):
            lo = self.grid.origin[a]
            hi = lo + (self.grid.dims[a] - 1) * self.grid.spacing
            if min(-lo, hi) + 1e-12 < need:
                raise ConfigError(
                    f"domain half-width {min(-lo, hi):.4g} on axis {a} is below the "
                    f"causal requirement {need:.4g} (support + duration + 4h)"
                )

    @property
    def dt(self) -> float:
        return self.cfl * self.grid.spacing


@dataclass
class DiagnosticsRow:
    step: int
    t: float
    sup_u: float
    sup_v: float
    energy_flat: float
    upsilon: float


@dataclass
class RunRecord:
    config: RunConfig
    rows: list[DiagnosticsRow] = field(default_factory=list)
    termination: Termination = Termination.COMPLETED
    termination_time: float = 0.0
    blowup_cause: BlowupCause | None = None
    steps_taken: int = 0

    def diagnostics_csv(self, fh) -> None:
        fh.write("step,t,sup_u,sup_v,energy_flat,upsilon\n")
        for r in self.rows:
            fh.write(f"{r.step},{r.t:.12g},{r.sup_u:.12g},{r.sup_v:.12g},"
                     f"{r.energy_flat:.12g},{r.upsilon:.12g}\n")

    def to_dict(self) -> dict:
        c = self.config
        return {
            "frame": c.frame.value,
            "delta": c.pulse.delta,
            "nu": c.pulse.nu,
            "spacing": c.grid.spacing,
            "dims": list(c.grid.dims),
            "origin": list(c.grid.origin),
            "cfl": c.cfl,
            "t_start": c.t_start,
            "t_end": c.t_end,
            "mass": c.mass,
            "tensor": [[j, k, l, v] for (j, k, l), v in c.tensor.entries],
            "termination": self.termination.value,
            "termination_time": self.termination_time,
            "blowup_cause": self.blowup_cause.value if self.blowup_cause else None,
            "steps_taken": self.steps_taken,
        }


def initial_state(config: RunConfig) -> StateSlice:
    """Assemble the starting slice for a run.

    In the SCALED frame both components carry the factor d^(nu+1): the pulse
    data transform through (tau, z) = (t/d + 2, x/d), which multiplies the
    time derivative by d.
    """
    g = config.grid
    if config.initial_data is not None:
        u0, v0 = config.initial_data(g)
        return StateSlice(config.t_start, ScalarField(g, np.array(u0, dtype=np.float64)),
                          ScalarField(g, np.array(v0, dtype=np.float64)))
    if config.data_family == "pulse":
        assemble = assemble_blowup_data
    elif config.data_family == "smooth":
        assemble = assemble_decay_data
    else:
        raise ConfigError(f"unknown data family {config.data_family!r}")
    if config.frame is Frame.ORIGINAL:
        pair = assemble(g, config.pulse)
        return StateSlice(config.t_start, pair.u0, pair.u1)
    d = config.pulse.delta
    # sample at unit scale: reuse the assembler with delta=d on the grid x = z*d
    sub_grid = GridSpec(tuple(c * d for c in g.origin), g.spacing * d, g.dims)
    pair = assemble(sub_grid, config.pulse)
    u0 = ScalarField(g, pair.u0.values)
    v0 = ScalarField(g, d * pair.u1.values)    # d/dtau = d * d/dt
    return StateSlice(config.t_start, u0, v0)


def _rhs_arrays(u: np.ndarray, v: np.ndarray, t: float, config: RunConfig
                ) -> tuple[np.ndarray, np.ndarray]:
    """du = v; dv = lap(u) - m^2 u + F(u, v, grad u) (+ validation forcing).

    Boundary closure is odd reflection (homogeneous Dirichlet): symmetric,
    hence stable, and indistinguishable from zero padding for the causally
    padded compact fields of a legitimate run.
    """
    h = config.grid.spacing
    closure = config.boundary_closure
    with np.errstate(over="ignore", invalid="ignore"):
        dv = laplacian_array(u, h, closure=closure)
        m2 = config.mass * config.mass
        if m2 != 0.0:
            dv -= m2 * u
        tensor = config.tensor
        if tensor.entries and not tensor.is_zero:
            grad: list[np.ndarray | None] = [None, None, None]
            for a in tensor.needed_gradient_axes():
                grad[a] = diff_array(u, a, h, 1, closure=closure)
            dv += eval_cubic_arrays(tensor, u, v, tuple(grad))
        if config.forcing is not None:
            dv += config.forcing(t, config.grid)
    return v, dv


def rhs(state: StateSlice, config: RunConfig) -> tuple[ScalarField, ScalarField]:
    """Public right-hand side on a slice; errors on non-finite input."""
    if not (state.u.check_finite() and state.v.check_finite()):
        raise FloatingPointError(f"non-finite state at t={state.t}")
    du, dv = _rhs_arrays(state.u.values, state.v.values, state.t, config)
    g = state.grid
    return ScalarField(g, du.copy()), ScalarField(g, dv)


class _Workspace:
    """Preallocated stage and scratch arrays for the step loop."""

    def __init__(self, shape):
        self.shape = shape
        (self.u2, self.v2, self.u3, self.v3, self.u4, self.v4,
         self.a1, self.a2, self.a3, self.a4,
         self.t1, self.t2, self.t3) = (np.empty(shape) for _ in range(13))


def _accel_into(out: np.ndarray, u: np.ndarray, v: np.ndarray, t: float,
                config: RunConfig, ws: _Workspace) -> None:
    """out = lap(u) - m^2 u + F + forcing, reusing the workspace scratch."""
    h = config.grid.spacing
    closure = config.boundary_closure
    from pulsekg.grid import _apply_odd_ghosts, _apply_edges, _D2_CENTRAL, _D2_EDGE, \
        _D1_CENTRAL, _D1_EDGE
    from scipy import ndimage

    for axis in range(3):
        target = out if axis == 0 else ws.t1
        ndimage.correlate1d(u, _D2_CENTRAL / (h * h), axis=axis, mode="constant",
                            output=target)
        if closure == "onesided":
            _apply_edges(target, u, axis, _D2_EDGE, h * h)
        elif closure == "odd":
            _apply_odd_ghosts(target, u, axis, 2, h)
        if axis != 0:
            out += target
    m2 = config.mass * config.mass
    if m2 != 0.0:
        np.multiply(u, m2, out=ws.t1)
        out -= ws.t1
    tensor = config.tensor
    if tensor.entries and not tensor.is_zero:
        grads: list[np.ndarray | None] = [None, None, None]
        scratch = [ws.t2, ws.t3]
        for i, a in enumerate(tensor.needed_gradient_axes()):
            if i < 2:
                ndimage.correlate1d(u, _D1_CENTRAL / h, axis=a, mode="constant",
                                    output=scratch[i])
                if closure == "onesided":
                    _apply_edges(scratch[i], u, a, _D1_EDGE, h)
                elif closure == "odd":
                    _apply_odd_ghosts(scratch[i], u, a, 1, h)
                grads[a] = scratch[i]
            else:
                grads[a] = diff_array(u, a, h, 1, closure=closure)
        for (j, k, l), val in tensor.entries:
            if val == 0.0:
                continue
            slots = {(-1): u, 0: v}
            arr_j = slots.get(j, grads[j - 1] if j >= 1 else None)
            arr_k = slots.get(k, grads[k - 1] if k >= 1 else None)
            arr_l = slots.get(l, grads[l - 1] if l >= 1 else None)
            np.multiply(arr_j, arr_k, out=ws.t1)
            ws.t1 *= arr_l
            if val != 1.0:
                ws.t1 *= val
            out += ws.t1
    if config.forcing is not None:
        out += config.forcing(t, config.grid)


def _stage(dst: np.ndarray, base: np.ndarray, coeff: float, rate: np.ndarray) -> None:
    np.multiply(rate, coeff, out=dst)
    dst += base


def _rk4_arrays(u: np.ndarray, v: np.ndarray, t: float, dt: float, config: RunConfig,
                ws: _Workspace | None = None) -> tuple[np.ndarray, np.ndarray]:
    # du/dt = v at every stage, so the u-update reuses the stage v fields.
    if ws is None or ws.shape != u.shape:
        ws = _Workspace(u.shape)
    half = 0.5 * dt
    with np.errstate(over="ignore", invalid="ignore"):
        _accel_into(ws.a1, u, v, t, config, ws)
        _stage(ws.u2, u, half, v)
        _stage(ws.v2, v, half, ws.a1)
        _accel_into(ws.a2, ws.u2, ws.v2, t + half, config, ws)
        _stage(ws.u3, u, half, ws.v2)
        _stage(ws.v3, v, half, ws.a2)
        _accel_into(ws.a3, ws.u3, ws.v3, t + half, config, ws)
        _stage(ws.u4, u, dt, ws.v3)
        _stage(ws.v4, v, dt, ws.a3)
        _accel_into(ws.a4, ws.u4, ws.v4, t + dt, config, ws)
        # un = u + dt/6 (v + 2 v2 + 2 v3 + v4); vn likewise from the rates
        sum_u = ws.u2
        np.multiply(ws.v2, 2.0, out=sum_u)
        sum_u += v
        np.multiply(ws.v3, 2.0, out=ws.t1)
        sum_u += ws.t1
        sum_u += ws.v4
        un = u + (dt / 6.0) * sum_u
        sum_v = ws.u3
        np.multiply(ws.a2, 2.0, out=sum_v)
        sum_v += ws.a1
        np.multiply(ws.a3, 2.0, out=ws.t1)
        sum_v += ws.t1
        sum_v += ws.a4
        vn = v + (dt / 6.0) * sum_v
    return un, vn


def rk4_step(state: StateSlice, dt: float, config: RunConfig) -> StateSlice:
    """One classical Runge-Kutta step; raises on NaN/Inf production."""
    un, vn = _rk4_arrays(state.u.values, state.v.values, state.t, dt, config)
    if not (np.isfinite(un).all() and np.isfinite(vn).all()):
        raise FloatingPointError(f"non-finite values produced at t={state.t + dt}")
    return StateSlice(state.t + dt, ScalarField(state.grid, un), ScalarField(state.grid, vn))


def detect_blowup(state: StateSlice, threshold: float) -> BlowupEvent | None:
    """Fire when sup|u| + sup|v| crosses the threshold or anything is non-finite."""
    su = float(np.max(np.abs(state.u.values)))
    sv = float(np.max(np.abs(state.v.values)))
    if not (np.isfinite(su) and np.isfinite(sv)):
        return BlowupEvent(state.t, BlowupCause.NONFINITE)
    if su + sv > threshold:
        return BlowupEvent(state.t, BlowupCause.THRESHOLD)
    return None


def flat_energy(u: np.ndarray, v: np.ndarray, h: float, mass: float) -> float:
    """h^3 sum of v^2 + |grad u|^2 + m^2 u^2 (the conserved form when F = 0)."""
    total = np.sum(v * v) + (mass * mass) * np.sum(u * u)
    for a in range(3):
        d = diff_array(u, a, h, 1)
        total += np.sum(d * d)
    return float(h ** 3 * total)


class SliceConsumer:
    """Interface for diagnostic subscribers fed by run()."""

    def start(self, config: RunConfig, state: StateSlice) -> None:  # pragma: no cover
        pass

    def consume(self, state: StateSlice, dv: np.ndarray | None = None) -> None:
        raise NotImplementedError

    def finish(self, record: RunRecord) -> None:  # pragma: no cover
        pass


def run(config: RunConfig, consumers: Sequence[SliceConsumer] = (),
        start_state: StateSlice | None = None) -> RunRecord:
    """Integrate from the assembled data to t_end or termination.

    Emits a diagnostics row every output_every steps (and always for the
    first and last state), publishes every slice to the consumers, and
    classifies the ending as COMPLETED, BLOWUP, or NUMERICAL_FAILURE.
    A start_state (e.g. a loaded checkpoint) replaces the assembled data.
    """
    state = start_state if start_state is not None else initial_state(config)
    if start_state is not None and abs(start_state.t - config.t_start) > 1e-12:
        raise ConfigError("start_state time does not match config.t_start")
    record = RunRecord(config=config)
    h = config.grid.spacing
    dt = config.dt

    threshold = config.blowup_threshold
    if threshold is None:
        s0 = float(np.max(np.abs(state.u.values)) + np.max(np.abs(state.v.values)))
        threshold = 1.0e6 * (s0 + 1.0)

    n_steps = int(round((config.t_end - config.t_start) / dt))
    upsilon_fn = None
    if config.upsilon_enabled:
        from pulsekg.blowup import upsilon_arrays
        upsilon_fn = upsilon_arrays

    def emit(step: int, st: StateSlice, su: float, sv: float):
        finite = np.isfinite(su) and np.isfinite(sv)
        with np.errstate(over="ignore", invalid="ignore"):
            ups = upsilon_fn(st.u.values, st.v.values, h) if (upsilon_fn and finite) else 0.0
            en = flat_energy(st.u.values, st.v.values, h, config.mass) if finite else float("nan")
        record.rows.append(DiagnosticsRow(
            step=step, t=st.t, sup_u=su, sup_v=sv, energy_flat=en, upsilon=ups,
        ))

    def sups(st: StateSlice) -> tuple[float, float]:
        with np.errstate(invalid="ignore"):
            return (float(np.max(np.abs(st.u.values))), float(np.max(np.abs(st.v.values))))

    for c in consumers:
        c.start(config, state)
        c.consume(state)
    emit(0, state, *sups(state))
    if config.checkpoint_every and config.checkpoint_dir:
        _write_run_checkpoint(state, config, 0)

    ws = _Workspace(config.grid.shape)
    step = 0
    while step < n_steps:
        un, vn = _rk4_arrays(state.u.values, state.v.values, state.t, dt, config, ws)
        su, sv = (float(np.max(np.abs(un))), float(np.max(np.abs(vn))))
        finite = bool(np.isfinite(su) and np.isfinite(sv))
        state = StateSlice(state.t + dt,
                           ScalarField(config.grid, un, blowup_witness=not finite),
                           ScalarField(config.grid, vn, blowup_witness=not finite))
        step += 1

        event: BlowupEvent | None = None
        if not finite:
            event = BlowupEvent(state.t, BlowupCause.NONFINITE)
        elif su + sv > threshold:
            event = BlowupEvent(state.t, BlowupCause.THRESHOLD)

        if finite:
            for c in consumers:
                c.consume(state)
        if step % config.output_every == 0 or step == n_steps or event:
            emit(step, state, su, sv)
        if config.checkpoint_every and config.checkpoint_dir and finite and \
                step % config.checkpoint_every == 0:
            _write_run_checkpoint(state, config, step)
        if event:
            if event.cause is BlowupCause.NONFINITE and config.tensor.is_zero \
                    and config.forcing is None:
                # a linear run cannot blow up: non-finite values mean the
                # discretization itself failed (CFL violation or bad data)
                record.termination = Termination.NUMERICAL_FAILURE
            else:
                record.termination = Termination.BLOWUP
                record.blowup_cause = event.cause
            record.termination_time = event.t
            record.steps_taken = step
            for c in consumers:
                c.finish(record)
            return record

    record.termination = Termination.COMPLETED
    record.termination_time = state.t
    record.steps_taken = step
    for c in consumers:
        c.finish(record)
    return record


# ----------------------------------------------------------------------------
# checkpoint format: magic "PKG1", little-endian
#   u32 version | u32 dims[3] | f64 h | f64 origin[3] | f64 t |
#   u8 frame (0 original, 1 scaled) | f64 m | f64 cfl |
#   f64 u[N] x-fastest | f64 v[N] x-fastest
# ----------------------------------------------------------------------------

CHECKPOINT_MAGIC = b"PKG1"
CHECKPOINT_VERSION = 1
_HEADER = struct.Struct("<I3Id3ddBdd")


class CheckpointError(IOError):
    """Corrupt, truncated, or version-mismatched checkpoint file."""


@dataclass(frozen=True)
class CheckpointHeader:
    dims: tuple[int, int, int]
    spacing: float
    origin: tuple[float, float, float]
    t: float
    frame: Frame
    mass: float
    cfl: float

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.origin, self.spacing, self.dims)


def checkpoint_save(path, state: StateSlice, config: RunConfig) -> None:
    g = state.grid
    frame_code = 0 if config.frame is Frame.ORIGINAL else 1
    header = _HEADER.pack(
        CHECKPOINT_VERSION, *g.dims, g.spacing, *g.origin, state.t,
        frame_code, config.mass, config.cfl,
    )
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(header)
        # x-fastest order: axis 0 varies quickest in the flat stream
        fh.write(np.ascontiguousarray(state.u.values.ravel(order="F")).astype("<f8").tobytes())
        fh.write(np.ascontiguousarray(state.v.values.ravel(order="F")).astype("<f8").tobytes())


def checkpoint_load(path) -> tuple[StateSlice, CheckpointHeader]:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise CheckpointError(f"bad magic {magic!r}; not a checkpoint file")
        raw = fh.read(_HEADER.size)
        if len(raw) != _HEADER.size:
            raise CheckpointError("truncated checkpoint header")
        fields = _HEADER.unpack(raw)
        version = fields[0]
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(f"checkpoint version {version} != {CHECKPOINT_VERSION}")
        dims = tuple(fields[1:4])
        spacing = fields[4]
        origin = tuple(fields[5:8])
        t = fields[8]
        frame = Frame.ORIGINAL if fields[9] == 0 else Frame.SCALED
        mass, cfl = fields[10], fields[11]
        n = dims[0] * dims[1] * dims[2]
        payload = fh.read(2 * n * 8)
        if len(payload) != 2 * n * 8:
            raise CheckpointError(
                f"truncated checkpoint payload: got {len(payload)} of {2 * n * 8} bytes"
            )
    flat = np.frombuffer(payload, dtype="<f8")
    grid = GridSpec(origin, spacing, dims)
    u = flat[:n].reshape(dims, order="F").copy()
    v = flat[n:].reshape(dims, order="F").copy()
    header = CheckpointHeader(dims, spacing, origin, t, frame, mass, cfl)
    return StateSlice(t, ScalarField(grid, u), ScalarField(grid, v)), header


def resume_config(config: RunConfig, header: CheckpointHeader, t_resume: float) -> RunConfig:
    """Config for continuing a checkpointed run to the original t_end."""
    if header.grid != config.grid:
        raise CheckpointError("checkpoint grid does not match the run configuration")
    return replace(config, t_start=t_resume, enforce_domain_invariant=False)


def _write_run_checkpoint(state: StateSlice, config: RunConfig, step: int) -> None:
    import os

    os.makedirs(config.checkpoint_dir, exist_ok=True)
    checkpoint_save(os.path.join(config.checkpoint_dir, f"step{step:08d}.pkg1"),
                    state, config)
