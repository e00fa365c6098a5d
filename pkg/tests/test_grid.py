"""Discrete operator checks: polynomial exactness, refinement ratios, identities."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pulsekg.grid import (
    GridError,
    GridSpec,
    ScalarField,
    StateSlice,
    commutator_residual,
    field_from_function,
    gradient,
    laplacian,
    lorentz_apply,
    rotation_apply,
    underbar_apply,
    underbar_perp,
)


def small_grid(h=0.1, n=17, lo=-0.8):
    return GridSpec(origin=(lo, lo, lo), spacing=h, dims=(n, n, n))


def test_gridspec_validation():
    with pytest.raises(GridError):
        GridSpec(origin=(0, 0, 0), spacing=-0.1, dims=(9, 9, 9))
    with pytest.raises(GridError):
        GridSpec(origin=(0, 0, 0), spacing=0.1, dims=(8, 9, 9))
    g = small_grid()
    assert g.extent == (1.6, 1.6, 1.6)


def test_field_shape_mismatch():
    g = small_grid()
    with pytest.raises(GridError):
        ScalarField(g, np.zeros((3, 3, 3)))


def test_gradient_linear_field_exact():
    g = small_grid()
    f = field_from_function(g, lambda x, y, z: x)
    gx, gy, gz = gradient(f)
    assert np.max(np.abs(gx.values - 1.0)) < 1e-12
    assert np.max(np.abs(gy.values)) < 1e-12
    assert np.max(np.abs(gz.values)) < 1e-12


def test_gradient_zero_field():
    g = small_grid()
    f = field_from_function(g, lambda x, y, z: 0.0 * x)
    for comp in gradient(f):
        assert np.all(comp.values == 0.0)


def test_gradient_quartic_exact_interior():
    # one-sided rows are exact to degree 4 as well
    g = small_grid()
    f = field_from_function(g, lambda x, y, z: x**4 + y**3 * z)
    gx, gy, gz = gradient(f)
    ex = field_from_function(g, lambda x, y, z: 4 * x**3)
    scale = np.max(np.abs(ex.values)) + 1.0
    assert np.max(np.abs(gx.values - ex.values)) / scale < 1e-12


def test_gradient_refinement_ratio_sine():
    # oracle: the analytic derivative cos(x); interior error must shrink ~16x
    errs = []
    for h in (0.1, 0.05):
        n = int(round(1.6 / h)) + 1
        g = GridSpec(origin=(-0.8, -0.8, -0.8), spacing=h, dims=(n, 9, 9))
        f = field_from_function(g, lambda x, y, z: np.sin(x) + 0.0 * y)
        gx = gradient(f)[0]
        exact = field_from_function(g, lambda x, y, z: np.cos(x) + 0.0 * y)
        interior = (slice(2, -2),) * 3
        errs.append(np.max(np.abs(gx.values[interior] - exact.values[interior])))
    ratio = errs[0] / errs[1]
    assert 14.0 <= ratio <= 18.0


def test_laplacian_quadratics_exact():
    g = small_grid()
    f1 = field_from_function(g, lambda x, y, z: x**2)
    assert np.max(np.abs(laplacian(f1).values - 2.0)) < 1e-11
    f2 = field_from_function(g, lambda x, y, z: x**2 + y**2 + z**2)
    assert np.max(np.abs(laplacian(f2).values - 6.0)) < 1e-11


def test_laplacian_gaussian_refinement():
    # oracle: analytic laplacian of exp(-r^2); interior error shrinks ~16x
    def u(x, y, z):
        return np.exp(-(x**2 + y**2 + z**2))

    def lap_u(x, y, z):
        r2 = x**2 + y**2 + z**2
        return (4.0 * r2 - 6.0) * np.exp(-r2)

    errs = []
    for h in (0.1, 0.05):
        n = int(round(3.2 / h)) + 1
        g = GridSpec(origin=(-1.6, -1.6, -1.6), spacing=h, dims=(n, n, n))
        lap = laplacian(field_from_function(g, u))
        exact = field_from_function(g, lap_u)
        interior = (slice(2, -2),) * 3
        errs.append(np.max(np.abs(lap.values[interior] - exact.values[interior])))
    ratio = errs[0] / errs[1]
    assert 13.0 <= ratio <= 19.0


@settings(max_examples=25, deadline=None)
@given(
    a=st.floats(-3, 3, allow_nan=False),
    b=st.floats(-3, 3, allow_nan=False),
)
def test_operator_linearity(a, b):
    g = small_grid(h=0.2, n=9)
    rng = np.random.default_rng(7)
    f1 = ScalarField(g, rng.standard_normal(g.shape))
    f2 = ScalarField(g, rng.standard_normal(g.shape))
    combo = ScalarField(g, a * f1.values + b * f2.values)
    lhs = laplacian(combo).values
    rhs = a * laplacian(f1).values + b * laplacian(f2).values
    assert np.allclose(lhs, rhs, rtol=0, atol=1e-9 * (1 + abs(a) + abs(b)))


def test_rotation_annihilates_radial():
    g = small_grid()
    f = field_from_function(g, lambda x, y, z: np.exp(-(x**2 + y**2 + z**2)))
    w = rotation_apply(1, 2, f)
    interior = (slice(2, -2),) * 3
    # stencil-order small, not round-off: radial symmetry is analytic only
    assert np.max(np.abs(w.values[interior])) < 5e-5


def test_rotation_polynomials():
    g = small_grid()
    f_sym = field_from_function(g, lambda x, y, z: x**2 + y**2)
    assert np.max(np.abs(rotation_apply(1, 2, f_sym).values)) < 1e-12
    f_x = field_from_function(g, lambda x, y, z: x + 0 * y)
    expect = field_from_function(g, lambda x, y, z: -y + 0 * x)
    assert np.max(np.abs(rotation_apply(1, 2, f_x).values - expect.values)) < 1e-12
    f_xy = field_from_function(g, lambda x, y, z: x * y)
    expect2 = field_from_function(g, lambda x, y, z: x**2 - y**2)
    assert np.max(np.abs(rotation_apply(1, 2, f_xy).values - expect2.values)) < 1e-12


def test_lorentz_polynomial_identities():
    g = small_grid()
    t = 1.7
    # u = t (constant on the slice), v = 1: L1 u = x1
    u = field_from_function(g, lambda x, y, z: t + 0 * x)
    v = field_from_function(g, lambda x, y, z: 1.0 + 0 * x)
    out = lorentz_apply(1, StateSlice(t, u, v))
    expect = field_from_function(g, lambda x, y, z: x + 0 * y)
    assert np.max(np.abs(out.values - expect.values)) < 1e-12
    # u = x1, v = 0: L1 u = t
    u2 = field_from_function(g, lambda x, y, z: x + 0 * y)
    v2 = field_from_function(g, lambda x, y, z: 0 * x)
    out2 = lorentz_apply(1, StateSlice(t, u2, v2))
    assert np.max(np.abs(out2.values - t)) < 1e-12
    # u = t*x1, v = x1: L1 u = x1^2 + t^2
    u3 = field_from_function(g, lambda x, y, z: t * x)
    v3 = field_from_function(g, lambda x, y, z: x + 0 * y)
    out3 = lorentz_apply(1, StateSlice(t, u3, v3))
    expect3 = field_from_function(g, lambda x, y, z: x**2 + t**2)
    assert np.max(np.abs(out3.values - expect3.values)) < 1e-12


def test_underbar_identities():
    g = small_grid()
    t = 2.0
    zero = field_from_function(g, lambda x, y, z: 0 * x)
    const = field_from_function(g, lambda x, y, z: 3.0 + 0 * x)
    st_ = StateSlice(t, const, zero)
    assert np.max(np.abs(underbar_apply(1, st_).values)) < 1e-12
    assert np.max(np.abs(underbar_perp(st_).values)) < 1e-12
    # u = t^2 - |x|^2 with v = 2t: tangential derivatives vanish
    u = field_from_function(g, lambda x, y, z: t**2 - (x**2 + y**2 + z**2))
    v = field_from_function(g, lambda x, y, z: 2 * t + 0 * x)
    sl = StateSlice(t, u, v)
    for a in (1, 2, 3):
        assert np.max(np.abs(underbar_apply(a, sl).values)) < 1e-11


def test_underbar_perp_point_value():
    g = GridSpec(origin=(-1.0, -1.0, -1.0), spacing=0.125, dims=(17, 17, 17))
    u = field_from_function(g, lambda x, y, z: x + 0 * y)
    v = field_from_function(g, lambda x, y, z: 0 * x)
    out = underbar_perp(StateSlice(2.0, u, v))
    # at x = (1, 0, 0): (x1/t) * du/dx1 = 1/2
    i = (16, 8, 8)
    assert abs(out.values[i] - 0.5) < 1e-12


def test_underbar_requires_positive_time():
    g = small_grid()
    zero = field_from_function(g, lambda x, y, z: 0 * x)
    with pytest.raises(GridError):
        underbar_apply(1, StateSlice(0.0, zero, zero))


def test_commutator_polynomial_exact():
    g = small_grid()
    res_t, res_s = commutator_residual(
        1, lambda t, x, y, z: t * x, lambda t, x, y, z: x + 0 * t, g, t=1.3)
    assert res_t < 1e-12
    assert res_s < 1e-12


def test_commutator_zero_field():
    g = small_grid()
    res_t, res_s = commutator_residual(
        1, lambda t, x, y, z: 0 * x, lambda t, x, y, z: 0 * x, g, t=1.0)
    assert res_t == 0.0
    assert res_s == 0.0


def test_commutator_refinement_ratio():
    # oracle: residuals are pure stencil error, so halving h gains ~2^4
    def test_fn(t, x, y, z):
        return np.sin(x) * np.cos(t) + 0 * y

    def dtest(t, x, y, z):
        return -np.sin(x) * np.sin(t) + 0 * y

    res = []
    for h in (0.1, 0.05):
        n = int(round(1.6 / h)) + 1
        g = GridSpec(origin=(-0.8, -0.8, -0.8), spacing=h, dims=(n, 9, 9))
        res.append(commutator_residual(1, test_fn, dtest, g, t=0.9))
    for k in range(2):
        ratio = res[0][k] / res[1][k]
        assert 12.0 <= ratio <= 20.0, f"component {k}: ratio {ratio}"
