"""Built-in validation battery: discrete identities, convergence order,
conservation, and the profile plateaus, each as a named pass/fail check."""

from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable

import numpy as np

from pulsekg import grid as grid_mod
from pulsekg.grid import GridSpec, ScalarField, commutator_residual, field_from_function
from pulsekg.hyperboloid import FieldProvider, SliceBuffer, sample_hyperboloid
from pulsekg.integrator import Frame, RunConfig, Termination, run
from pulsekg.profiles import PulseParams, blowup_profiles


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


@contextmanager
def sabotaged_stencil():
    """Perturb one interior stencil weight; used by the harness self-test."""
    original = grid_mod._D1_CENTRAL.copy()
    grid_mod._D1_CENTRAL[0] += 1e-3
    try:
        yield
    finally:
        grid_mod._D1_CENTRAL[:] = original


def check_profile_plateaus() -> CheckResult:
    tabs = blowup_profiles()
    th_f = np.linspace(-0.75, -0.25, 401)
    th_h = np.linspace(-0.75, 0.75, 601)
    worst = max(
        float(np.max(np.abs(tabs["f"](th_f) - 1.0))),
        float(np.max(np.abs(tabs["h"](th_h) - 1.0))),
        float(np.max(np.abs(tabs["g"].derivative(th_f) - 1.0))),
    )
    return CheckResult("profile-plateaus", worst <= 1e-8, f"max deviation {worst:.2e}")


def check_commutators() -> CheckResult:
    g = GridSpec(origin=(-0.8, -0.8, -0.8), spacing=0.1, dims=(17, 9, 9))
    rt, rs = commutator_residual(1, lambda t, x, y, z: t * x,
                                 lambda t, x, y, z: x + 0 * t, g, t=1.3)
    poly_ok = rt < 1e-12 and rs < 1e-12

    def res_at(h):
        n = int(round(1.6 / h)) + 1
        gg = GridSpec(origin=(-0.8, -0.8, -0.8), spacing=h, dims=(n, 9, 9))
        return commutator_residual(1, lambda t, x, y, z: np.sin(x) * np.cos(t) + 0 * y,
                                   lambda t, x, y, z: -np.sin(x) * np.sin(t) + 0 * y,
                                   gg, t=0.9)

    r1, r2 = res_at(0.1), res_at(0.05)
    ratios = (r1[0] / r2[0], r1[1] / r2[1])
    ratio_ok = all(r >= 12.0 for r in ratios)
    return CheckResult(
        "commutator-residuals", poly_ok and ratio_ok,
        f"poly ({rt:.1e}, {rs:.1e}); halving gains ({ratios[0]:.1f}, {ratios[1]:.1f})")


def manufactured_error(n: int, t_end: float = math.pi / 4.0) -> float:
    """Max-norm error of the forced run whose exact solution is
    sin(x) sin(y) sin(z) cos(t) on [0, pi]^3."""
    h = math.pi / (n - 1)
    grid = GridSpec(origin=(0.0, 0.0, 0.0), spacing=h, dims=(n, n, n))
    omega = 1.0

    def exact(t, g):
        sx = np.sin(g.axis_coords(0))[:, None, None]
        sy = np.sin(g.axis_coords(1))[None, :, None]
        sz = np.sin(g.axis_coords(2))[None, None, :]
        return sx * sy * sz * math.cos(omega * t)

    def forcing(t, g):
        # u_tt - lap u + m^2 u with m = 1: (3 + 1 - omega^2) * exact
        return (3.0 + 1.0 - omega * omega) * exact(t, g)

    def data(g):
        return exact(0.0, g), np.zeros(g.shape)

    cfg = RunConfig(frame=Frame.ORIGINAL, grid=grid, pulse=PulseParams(0.25, 0.0),
                    cfl=0.25, t_end=t_end, initial_data=data, forcing=forcing,
                    output_every=10 ** 9, upsilon_enabled=False)
    final = {}

    class Grab:
        def start(self, c, s):
            final["s"] = s

        def consume(self, s, dv=None):
            final["s"] = s

        def finish(self, r):
            pass

    rec = run(cfg, consumers=(Grab(),))
    if rec.termination is not Termination.COMPLETED:
        return float("inf")
    st = final["s"]
    return float(np.max(np.abs(st.u.values - exact(st.t, grid))))


def check_convergence(levels=(17, 33), lo=11.0, hi=21.0) -> CheckResult:
    errs = [manufactured_error(n) for n in levels]
    ratios = [errs[i] / errs[i + 1] for i in range(len(errs) - 1)]
    ok = all(lo <= r <= hi for r in ratios)
    return CheckResult("convergence-order", ok,
                       "halving gains " + ", ".join(f"{r:.1f}" for r in ratios))


def check_energy_conservation(steps: int = 300) -> CheckResult:
    g = GridSpec.centered(1.5, 1.5 / 24)
    w = 0.45

    def data(grid):
        return np.zeros(grid.shape), np.exp(-grid.radius_sq() / w**2)

    cfg = RunConfig(frame=Frame.ORIGINAL, grid=g, pulse=PulseParams(0.25, 0.0),
                    cfl=0.002, t_end=steps * 0.002 * g.spacing, initial_data=data,
                    output_every=max(1, steps // 10), upsilon_enabled=False)
    rec = run(cfg)
    e = np.array([r.energy_flat for r in rec.rows])
    drift = float(np.max(np.abs(e - e[0])) / e[0])
    return CheckResult("energy-conservation", drift < 1e-4, f"relative drift {drift:.2e}")


def check_energy_form_identity(trials: int = 20) -> CheckResult:
    g = GridSpec.centered(3.5, 0.25)
    rng = np.random.default_rng(123)
    times = np.arange(2.0, 4.2, 0.25)
    provider = FieldProvider(g)
    worst = 0.0
    x, y, z = (g.coord_broadcast(a) for a in range(3))
    for _ in range(trials):
        kx, ky, kz = rng.uniform(-1.2, 1.2, size=3)
        om = rng.uniform(0.3, 1.5)
        buf = SliceBuffer(capacity=len(times), provider=provider)
        for t in times:
            phase = kx * x + ky * y + kz * z + om * t
            buf.push_arrays(float(t), np.sin(phase).copy() + 0 * x,
                            om * np.cos(phase).copy() + 0 * x)
        sample = sample_hyperboloid(buf, 2.3, delta=0.4)
        worst = max(worst, abs(sample.E_flat - sample.E_hyper) / max(sample.E_flat, 1e-30))
    return CheckResult("energy-form-identity", worst <= 1e-10, f"max rel gap {worst:.2e}")


FULL_BATTERY: tuple[tuple[str, Callable[[], CheckResult]], ...] = (
    ("profile-plateaus", check_profile_plateaus),
    ("commutator-residuals", check_commutators),
    ("energy-form-identity", check_energy_form_identity),
    ("energy-conservation", check_energy_conservation),
    ("convergence-order", check_convergence),
)

QUICK_BATTERY = FULL_BATTERY[:3]


def run_battery(quick: bool = False, sabotage: bool = False) -> list[CheckResult]:
    checks = QUICK_BATTERY if quick else FULL_BATTERY
    results = []
    if sabotage:
        with sabotaged_stencil():
            for _, check in checks:
                results.append(check())
        return results
    for _, check in checks:
        results.append(check())
    return results
