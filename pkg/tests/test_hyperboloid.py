"""Hyperboloid sampling, both energy forms, ladders, decay fits."""

import math

import numpy as np
import pytest

from pulsekg.grid import GridSpec, field_from_function
from pulsekg.hyperboloid import (
    DecayFit,
    FieldProvider,
    HyperboloidTracker,
    SliceBuffer,
    SpanError,
    decay_fit,
    energy_flat_form,
    energy_hyper_form,
    energy_ladder,
    flux_identity_check,
    hyperboloid_geometry,
    ladder_members,
    pointwise_decay_check,
    sample_hyperboloid,
    sobolev_embedding_check,
)
from pulsekg.nonlinearity import CubicTensor


def make_buffer(grid, fn_u, fn_v, times, mass=0.0, tensor=None):
    """Buffer filled from analytic space-time functions."""
    provider = FieldProvider(grid, tensor=tensor, mass=mass)
    buf = SliceBuffer(capacity=max(8, len(times)), provider=provider)
    x = grid.coord_broadcast(0)
    y = grid.coord_broadcast(1)
    z = grid.coord_broadcast(2)
    for t in times:
        u = np.broadcast_to(fn_u(t, x, y, z), grid.shape).astype(float).copy()
        v = np.broadcast_to(fn_v(t, x, y, z), grid.shape).astype(float).copy()
        buf.push_arrays(float(t), u, v)
    return buf


def wide_grid(h=0.25, half=4.0):
    return GridSpec.centered(half, h)


def test_geometry_mask_structure():
    g = wide_grid()
    s = 2.5
    geo = hyperboloid_geometry(g, s)
    r = np.sqrt(np.array([geo.coords[0], geo.coords[1], geo.coords[2]])**2
                ).sum(axis=0) ** 0.5  # not used; sanity via t_of_x below
    assert np.all(geo.t_of_x >= s - 1e-12)
    assert np.all(geo.t_of_x >= 2.0 - 1e-12)
    rad = np.sqrt(geo.t_of_x**2 - s**2)
    assert np.all(rad <= (s * s - 1.0) / 2.0 + 1e-12)
    # masks nest with s: larger s covers points with larger t
    geo2 = hyperboloid_geometry(g, 3.0)
    assert geo2.t_of_x.min() >= geo.t_of_x.min()


def test_geometry_annulus_below_two():
    g = wide_grid(h=0.125, half=2.0)
    s = 1.85
    geo = hyperboloid_geometry(g, s)
    assert np.all(geo.t_of_x >= 2.0 - 1e-12)   # inner cut from t >= 2
    with pytest.raises(ValueError):
        hyperboloid_geometry(g, 1.0)


def test_sample_static_field():
    g = wide_grid()
    times = np.arange(2.0, 4.6, 0.25)
    buf = make_buffer(g, lambda t, x, y, z: np.exp(-(x**2 + y**2 + z**2)),
                      lambda t, x, y, z: 0 * x, times)
    s = 2.2
    sample = sample_hyperboloid(buf, s, delta=0.25)
    geo = sample.geometry
    expect = np.exp(-(geo.coords[0]**2 + geo.coords[1]**2 + geo.coords[2]**2))
    assert np.max(np.abs(sample.u - expect)) < 1e-12


def test_sample_linear_time_field():
    g = wide_grid()
    times = np.arange(2.0, 4.6, 0.25)
    buf = make_buffer(g, lambda t, x, y, z: t + 0 * x,
                      lambda t, x, y, z: 1.0 + 0 * x, times)
    sample = sample_hyperboloid(buf, 2.3, delta=0.25)
    assert np.max(np.abs(sample.u - sample.geometry.t_of_x)) < 1e-12


def test_sample_level_set_function():
    g = wide_grid()
    times = np.arange(2.0, 4.6, 0.25)
    buf = make_buffer(g, lambda t, x, y, z: t**2 - (x**2 + y**2 + z**2),
                      lambda t, x, y, z: 2.0 * t + 0 * x, times)
    s = 2.4
    sample = sample_hyperboloid(buf, s, delta=0.25)
    assert np.max(np.abs(sample.u - s * s)) < 1e-10


def test_span_violation():
    g = wide_grid()
    times = np.arange(2.0, 2.9, 0.25)  # covers t in [2, 2.75]
    buf = make_buffer(g, lambda t, x, y, z: 0 * x, lambda t, x, y, z: 0 * x, times)
    with pytest.raises(SpanError):
        sample_hyperboloid(buf, 3.5, delta=0.25)  # needs t beyond 2.75


def test_energy_forms_zero_field():
    g = wide_grid()
    times = np.arange(2.0, 4.6, 0.25)
    buf = make_buffer(g, lambda t, x, y, z: 0 * x, lambda t, x, y, z: 0 * x, times)
    sample = sample_hyperboloid(buf, 2.2, delta=0.25)
    assert sample.E_flat == 0.0
    assert sample.E_hyper == 0.0


def test_energy_forms_level_set_closed_form():
    # u = t^2 - |x|^2: integrand is 4 s^2 + d^2 s^4 at every masked point
    g = wide_grid(h=0.2)
    times = np.arange(2.0, 4.8, 0.2)
    buf = make_buffer(g, lambda t, x, y, z: t**2 - (x**2 + y**2 + z**2),
                      lambda t, x, y, z: 2.0 * t + 0 * x, times)
    s, d = 2.4, 0.3
    sample = sample_hyperboloid(buf, s, d)
    volume = g.spacing**3 * sample.geometry.npoints
    expect = (4.0 * s**2 + d**2 * s**4) * volume
    assert abs(sample.E_flat - expect) < 1e-6 * expect
    assert abs(sample.E_hyper - expect) < 1e-6 * expect


def test_energy_form_identity_random_fields():
    # the two integrands agree pointwise; 20 random smooth fields
    g = wide_grid(h=0.25, half=3.5)
    rng = np.random.default_rng(42)
    times = np.arange(2.0, 4.2, 0.25)
    for trial in range(20):
        kx, ky, kz = rng.uniform(-1.2, 1.2, size=3)
        om = rng.uniform(0.3, 1.5)
        amp = rng.uniform(0.1, 2.0)

        def fu(t, x, y, z):
            return amp * np.sin(kx * x + ky * y + kz * z + om * t)

        def fv(t, x, y, z):
            return amp * om * np.cos(kx * x + ky * y + kz * z + om * t)

        buf = make_buffer(g, fu, fv, times)
        sample = sample_hyperboloid(buf, 2.3, delta=0.4)
        scale = max(sample.E_flat, 1e-30)
        assert abs(sample.E_flat - sample.E_hyper) / scale < 1e-10


def test_ladder_zero_field_and_count():
    g = wide_grid()
    times = np.arange(2.0, 4.6, 0.25)
    buf = make_buffer(g, lambda t, x, y, z: 0 * x, lambda t, x, y, z: 0 * x, times)
    ladder = energy_ladder(buf, 2.2, delta=0.25, max_order=2)
    assert len(ladder.entries) == 36  # 1 + 7 + 28 members through order 2
    assert all(e == 0.0 for _, e in ladder.entries)
    assert ladder.M == [0.0, 0.0, 0.0]


def test_ladder_order_zero_matches_energy():
    g = wide_grid()
    times = np.arange(2.0, 4.6, 0.25)
    buf = make_buffer(g, lambda t, x, y, z: np.exp(-(x**2 + y**2 + z**2)) * np.cos(t),
                      lambda t, x, y, z: -np.exp(-(x**2 + y**2 + z**2)) * np.sin(t),
                      times)
    s, d = 2.3, 0.25
    ladder = energy_ladder(buf, s, d, max_order=0)
    sample = sample_hyperboloid(buf, s, d)
    # ladder members take w_t from the interpolant derivative rather than the
    # buffered v slices, so agreement is O(dt^3), not round-off
    assert abs(ladder.M[0] - math.sqrt(sample.E_hyper)) < 1e-5 * ladder.M[0]


def test_ladder_members_enumeration():
    members = ladder_members(2)
    assert (tuple(), tuple()) in members
    assert ((0,), tuple()) in members
    assert (tuple(), (1,)) in members
    assert ((0, 1), tuple()) in members
    assert ((0,), (2,)) in members
    assert (tuple(), (2, 3)) in members
    assert len(members) == 36


def test_sobolev_embedding_scaling_invariance():
    g = wide_grid(h=0.25, half=3.5)
    times = np.arange(2.0, 4.2, 0.25)

    def mk(c):
        return make_buffer(
            g, lambda t, x, y, z: c * np.exp(-(x**2 + y**2 + z**2)) * (1 + 0.1 * t),
            lambda t, x, y, z: c * 0.1 * np.exp(-(x**2 + y**2 + z**2)), times)

    r1 = sobolev_embedding_check(mk(1.0), 2.3)
    r2 = sobolev_embedding_check(mk(-17.0), 2.3)
    assert r1 > 0
    assert abs(r1 - r2) < 1e-10 * r1


def test_sobolev_embedding_zero_field():
    g = wide_grid()
    times = np.arange(2.0, 4.6, 0.25)
    buf = make_buffer(g, lambda t, x, y, z: 0 * x, lambda t, x, y, z: 0 * x, times)
    assert sobolev_embedding_check(buf, 2.2) == 0.0


def test_pointwise_decay_homogeneity():
    g = wide_grid(h=0.25, half=3.5)
    times = np.arange(2.0, 4.2, 0.25)

    def mk(c):
        return make_buffer(
            g, lambda t, x, y, z: c * np.exp(-(x**2 + y**2 + z**2)) * np.cos(0.4 * t),
            lambda t, x, y, z: -0.4 * c * np.exp(-(x**2 + y**2 + z**2)) * np.sin(0.4 * t),
            times)

    a1, b1 = pointwise_decay_check(mk(1.0), 2.3, delta=0.25, order=0)
    a2, b2 = pointwise_decay_check(mk(3.7), 2.3, delta=0.25, order=0)
    assert abs(a1 - a2) < 1e-9 * a1
    assert abs(b1 - b2) < 1e-9 * b1


def test_flux_identity_synthetic():
    s = np.linspace(2.0, 3.0, 11)
    E = 1.0 + 0.5 * (s - 2.0) ** 2
    dE = 1.0 * (s - 2.0)
    worst, defects = flux_identity_check(s, E, dE)
    assert worst < 1e-12  # central difference is exact on quadratics
    with pytest.raises(ValueError):
        flux_identity_check(s[:4], E[:4], dE[:4])


def test_flux_identity_zero_flux_linear_energy():
    s = np.linspace(2.0, 3.0, 11)
    E = np.full_like(s, 5.0)
    worst, _ = flux_identity_check(s, E, np.zeros_like(s))
    assert worst == 0.0


def test_decay_fit_recovers_exact_power():
    d = 0.25
    t = np.linspace(1.0, 10.0, 40)
    vals = 7.0 * (t / d + 2.0) ** -1.5
    fit = decay_fit(t, vals, window=(1.0, 10.0), delta=d, clock="original")
    assert abs(fit.exponent + 1.5) < 1e-10
    assert abs(fit.amplitude - 7.0) < 1e-8
    assert fit.residual < 1e-12


def test_decay_fit_constant_series():
    t = np.linspace(1.0, 5.0, 20)
    fit = decay_fit(t, np.full_like(t, 3.3), window=(1.0, 5.0), delta=0.25)
    assert abs(fit.exponent) < 1e-12


def test_decay_fit_rejects_bad_input():
    t = np.linspace(1.0, 5.0, 20)
    with pytest.raises(ValueError):
        decay_fit(t[:5], np.ones(5), window=(1.0, 5.0), delta=0.25)
    vals = np.ones_like(t)
    vals[3] = -1.0
    with pytest.raises(ValueError):
        decay_fit(t, vals, window=(1.0, 5.0), delta=0.25)


def test_tracker_matches_dense_sampling():
    # streaming accumulation must agree with the one-shot dense sample
    g = wide_grid(h=0.25, half=3.5)
    d = 0.3
    dt = 0.125
    times = np.arange(2.0, 4.8 + dt / 2, dt)

    def fu(t, x, y, z):
        return np.exp(-(x**2 + y**2 + z**2)) * np.cos(0.7 * t)

    def fv(t, x, y, z):
        return -0.7 * np.exp(-(x**2 + y**2 + z**2)) * np.sin(0.7 * t)

    s_values = [2.0, 2.2]

    class FakeConfig:
        grid = g
        tensor = CubicTensor(())
        mass = 0.0
        forcing = None

        class pulse:
            delta = d

    tracker = HyperboloidTracker(s_values, d, ladder_order=-1, with_flux=True)
    tracker.start(FakeConfig, None)
    x = g.coord_broadcast(0)
    y = g.coord_broadcast(1)
    z = g.coord_broadcast(2)

    class Slice:
        def __init__(self, t):
            self.t = t
            self.u = type("F", (), {"values": np.asarray(fu(t, x, y, z))})
            self.v = type("F", (), {"values": np.asarray(fv(t, x, y, z))})

    for t in times:
        tracker.consume(Slice(float(t)))
    tracker.finish(None)

    buf = make_buffer(g, fu, fv, times)
    for row, s in zip(tracker.rows(), s_values):
        assert row.complete
        dense = sample_hyperboloid(buf, s, d)
        assert abs(row.E_flat - dense.E_flat) < 1e-9 * max(dense.E_flat, 1e-30)
        assert abs(row.E_hyper - dense.E_hyper) < 1e-9 * max(dense.E_hyper, 1e-30)
        assert row.flux == 0.0  # zero tensor
