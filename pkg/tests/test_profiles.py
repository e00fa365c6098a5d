"""Profile construction and pulse-data checks.

Frozen reference values come from independent Simpson quadrature (the probe
that generated them lives in the docstrings of the asserting tests).
"""

import numpy as np
import pytest

from pulsekg.grid import GridError, GridSpec, ScalarField, StateSlice, field_from_function
from pulsekg.profiles import (
    PulseParams,
    assemble_blowup_data,
    assemble_decay_data,
    blowup_profiles,
    mollifier,
    mollify,
    sobolev_norm,
    upsilon_initial,
    upsilon_unit_oracle,
    SEED_F,
    SEED_G,
    SEED_H,
)

# normalizer of exp(-1/(1-t^2)) on (-1,1), via Simpson with 2^14 panels
BUMP_NORMALIZER = 2.2522836210435813
UPSILON_UNIT_REF = 28.725  # Simpson oracle, dense theta grid


def test_mollifier_support_and_normalization():
    assert mollifier(1.0) == 0.0
    assert mollifier(-1.0) == 0.0
    assert mollifier(1.5) == 0.0
    x = np.linspace(-1, 1, 2**12 + 1)
    w = np.ones_like(x)
    w[1:-1:2], w[2:-1:2] = 4.0, 2.0
    w *= (x[1] - x[0]) / 3.0
    assert abs(np.sum(w * mollifier(x)) - 1.0) < 1e-10


def test_mollifier_center_value():
    assert abs(mollifier(0.0) - BUMP_NORMALIZER * np.exp(-1.0)) < 1e-10


@pytest.mark.parametrize("seed,plateau,use_derivative", [
    (SEED_F, (-0.75, -0.25), False),
    (SEED_H, (-0.75, 0.75), False),
    (SEED_G, (-0.75, -0.25), True),
])
def test_plateaus(seed, plateau, use_derivative):
    table = mollify(seed)
    th = np.linspace(plateau[0], plateau[1], 401)
    vals = table.derivative(th) if use_derivative else table(th)
    assert np.max(np.abs(vals - 1.0)) < 1e-8


def test_plateau_midpoint_values():
    tabs = blowup_profiles()
    assert abs(float(tabs["f"](np.array([-0.5]))[0]) - 1.0) < 1e-8
    assert abs(float(tabs["h"](np.array([0.0]))[0]) - 1.0) < 1e-8
    assert abs(float(tabs["g"].derivative(np.array([-0.5]))[0]) - 1.0) < 1e-8


def test_profiles_vanish_outside_support():
    tabs = blowup_profiles()
    th = np.concatenate([np.linspace(-1.25, -1.0, 50), np.linspace(1.0, 1.25, 50)])
    for name in ("f", "g", "h"):
        assert np.max(np.abs(tabs[name](th))) < 1e-13
        assert np.max(np.abs(tabs[name].derivative(th))) < 1e-13


def test_profile_nonnegativity():
    # at the table nodes the quadrature keeps exact signs; between nodes the
    # cubic interpolant may undershoot near the support edge (Lagrange wiggle)
    tabs = blowup_profiles()
    assert np.min(tabs["f"].values) > -1e-10
    assert np.min(tabs["h"].values) > -1e-10
    left = tabs["g"].nodes <= 0.0
    assert np.min(tabs["g"].derivative_values[left]) > -1e-10
    th = np.linspace(-1.25, 1.25, 5001)
    assert np.min(tabs["f"](th)) > -1e-5
    assert np.min(tabs["h"](th)) > -1e-5
    th_left = np.linspace(-1.0, 0.0, 2001)
    assert np.min(tabs["g"].derivative(th_left)) > -1e-5


def test_derivative_table_consistent_with_values():
    # derivative column comes from the seed's distributional derivative, never
    # from differencing; it must still agree with centered differences of the
    # values column to second order in the node spacing (the constant carries
    # the profile's third derivative, of size ~16^3 from the mollifier width)
    def deviation(nodes):
        tab = mollify(SEED_G, nodes=nodes)
        dn = tab.spacing
        centered = (tab.values[2:] - tab.values[:-2]) / (2.0 * dn)
        return float(np.max(np.abs(centered - tab.derivative_values[1:-1]))), dn

    dev1, dn1 = deviation(4096)
    assert dev1 < 5e4 * dn1**2
    dev2, _ = deviation(8192)
    assert 3.0 < dev1 / dev2 < 5.0  # second-order consistency under refinement


def test_pulse_params_validation():
    with pytest.raises(ValueError):
        PulseParams(delta=0.0, nu=0.0)
    with pytest.raises(ValueError):
        PulseParams(delta=1.0, nu=0.0)
    with pytest.raises(ValueError):
        PulseParams(delta=0.5, nu=float("nan"))


def grid_for(delta: float, points_per_delta: int = 48, margin: float = 1.25):
    h = delta / points_per_delta
    return GridSpec.centered(margin * delta, h)


def test_assemble_identity_at_unit_scale():
    # delta -> 1 is outside (0,1); check the scaling factors directly instead:
    # at nu = -1 the amplitude of u0 is 4 g h h exactly (delta^(nu+1) = 1)
    delta = 0.5
    g = grid_for(delta)
    pair = assemble_blowup_data(g, PulseParams(delta=delta, nu=-1.0))
    tabs = blowup_profiles()
    x = g.axis_coords(0) / delta
    expect = 4.0 * tabs["g"](x)
    mid = g.dims[1] // 2
    got = pair.u0.values[:, mid, mid] / (tabs["h"](0.0 / delta) ** 2)
    assert np.max(np.abs(got - expect)) < 1e-10


def test_assemble_support():
    delta = 0.25
    g = grid_for(delta)
    pair = assemble_blowup_data(g, PulseParams(delta=delta, nu=-0.5))
    r = np.maximum.reduce([np.abs(g.coord_broadcast(a)) + 0 * pair.u0.values
                           for a in range(3)])
    outside = r >= delta
    assert np.max(np.abs(pair.u0.values[outside])) == 0.0
    assert np.max(np.abs(pair.u1.values[outside])) == 0.0


def test_assemble_peak_value():
    # oracle: max u1 = delta^nu * 4 * (max f) * (max h)^2 from the tables
    delta, nu = 0.25, -0.5
    g = grid_for(delta, 64)
    pair = assemble_blowup_data(g, PulseParams(delta=delta, nu=nu))
    tabs = blowup_profiles()
    x = g.axis_coords(0) / delta
    expect = delta**nu * 4.0 * np.max(tabs["f"](x)) * np.max(tabs["h"](x)) ** 2
    assert abs(np.max(pair.u1.values) - expect) < 1e-9 * expect


def test_assemble_requires_covering_grid():
    g = GridSpec.centered(0.1, 0.01)
    with pytest.raises(GridError):
        assemble_blowup_data(g, PulseParams(delta=0.5, nu=0.0))


def test_upsilon_initial_exceeds_paper_bound():
    for delta in (0.1, 0.25, 0.5):
        res = upsilon_initial(grid_for(delta), PulseParams(delta=delta, nu=-0.5))
        assert res.value > 18.0 * delta**2
        assert not res.under_resolved


def test_upsilon_factorization_exact():
    for delta in (0.1, 0.25, 0.5):
        for nu in (-1.0, -0.5, 0.5):
            res = upsilon_initial(grid_for(delta), PulseParams(delta=delta, nu=nu))
            assert abs(res.factorization_ratio - 1.0) < 1e-8


def test_upsilon_unit_against_simpson_oracle():
    oracle = upsilon_unit_oracle()
    assert oracle > 18.0
    assert abs(oracle - UPSILON_UNIT_REF) < 5e-3
    res = upsilon_initial(grid_for(0.25, 48), PulseParams(delta=0.25, nu=-0.5))
    assert abs(res.unit_value / oracle - 1.0) < 0.01


def test_upsilon_under_resolved_flag():
    delta = 0.25
    g = GridSpec.centered(1.25 * delta, delta / 16)
    res = upsilon_initial(g, PulseParams(delta=delta, nu=-0.5))
    assert res.under_resolved


def test_sobolev_zero_and_homogeneity():
    g = GridSpec.centered(1.0, 0.125)
    zero = field_from_function(g, lambda x, y, z: 0 * x)
    assert sobolev_norm(zero, 3) == 0.0
    f = field_from_function(g, lambda x, y, z: np.exp(-(x**2 + y**2 + z**2)))
    for k in (0, 1, 2):
        n1 = sobolev_norm(f, k)
        n2 = sobolev_norm(ScalarField(g, -2.5 * f.values), k)
        assert abs(n2 - 2.5 * n1) < 1e-12 * n1


def test_sobolev_gaussian_l2():
    # oracle: ||exp(-r^2)||_L2 = (pi/2)^(3/4)
    g = GridSpec.centered(4.0, 0.1)
    f = field_from_function(g, lambda x, y, z: np.exp(-(x**2 + y**2 + z**2)))
    exact = (np.pi / 2.0) ** 0.75
    assert abs(sobolev_norm(f, 0) - exact) / exact < 0.01


def test_sobolev_order_range():
    g = GridSpec.centered(0.5, 0.05)
    f = field_from_function(g, lambda x, y, z: 0 * x)
    with pytest.raises(ValueError):
        sobolev_norm(f, 6)


def test_smooth_decay_pair_normalized_and_supported():
    # near unit scale the combined Sobolev size is one by construction
    delta = 0.99
    g = GridSpec.centered(1.1, 1.0 / 32.0)
    pair = assemble_decay_data(g, PulseParams(delta=delta, nu=-1.0))
    total = sobolev_norm(pair.u0, 3) + sobolev_norm(pair.u1, 2)
    assert abs(total - 1.0) < 0.05  # grid differs from the normalization grid
    r = np.sqrt(g.radius_sq())
    outside = r >= delta
    assert np.max(np.abs(pair.u0.values[outside])) == 0.0
    assert np.max(np.abs(pair.u1.values[outside])) == 0.0


def test_smooth_decay_pair_positive_upsilon():
    from pulsekg.blowup import upsilon

    delta = 0.25
    g = GridSpec.centered(0.35, delta / 40)
    pair = assemble_decay_data(g, PulseParams(delta=delta, nu=-0.5))
    assert upsilon(StateSlice(0.0, pair.u0, pair.u1)) > 0.0


def test_smooth_decay_pair_pulse_scaling():
    # same exact factorization as the blowup pair: amplitudes d^(nu+1), d^nu
    delta, nu = 0.5, -0.25
    g = GridSpec.centered(0.7, delta / 32)
    pair = assemble_decay_data(g, PulseParams(delta=delta, nu=nu))
    unit_g = GridSpec(tuple(c / delta for c in g.origin), g.spacing / delta, g.dims)
    unit = assemble_decay_data(unit_g, PulseParams(delta=0.999999999, nu=nu))
    # compare shapes after removing the amplitude factors (delta vs ~1)
    a0 = delta ** (nu + 1.0)
    got = pair.u0.values / a0
    want = unit.u0.values / (0.999999999 ** (nu + 1.0))
    assert np.max(np.abs(got - want)) < 1e-6 * (np.max(np.abs(want)) + 1e-30)
