"""pulsekg: simulator and verification harness for short-pulse cubic Klein-Gordon dynamics.

The package evolves u_tt = lap(u) - m^2 u + F(u, du) for cubic F on uniform
3-D grids, either in original coordinates (unit mass) or in the rescaled
frame where the pulse has unit-size support, and measures the diagnostics
that distinguish dispersive decay from finite-time blowup: hyperboloid
energies, sup-norm decay rates, and the blowup functional with its closed
form comparison solution.
"""

from pulsekg.grid import (
    GridError,
    GridSpec,
    ScalarField,
    StateSlice,
    field_from_function,
    gradient,
    laplacian,
    lorentz_apply,
    rotation_apply,
    underbar_apply,
    underbar_perp,
)
from pulsekg.nonlinearity import CubicTensor, eval_cubic, preset_blowup, scale_tensor
from pulsekg.profiles import (
    DataPair,
    ProfileTable,
    PulseParams,
    assemble_blowup_data,
    blowup_profiles,
    mollifier,
    mollify,
    sobolev_norm,
    upsilon_initial,
)

__all__ = [
    "GridError",
    "GridSpec",
    "ScalarField",
    "StateSlice",
    "field_from_function",
    "gradient",
    "laplacian",
    "lorentz_apply",
    "rotation_apply",
    "underbar_apply",
    "underbar_perp",
    "CubicTensor",
    "eval_cubic",
    "preset_blowup",
    "scale_tensor",
    "DataPair",
    "ProfileTable",
    "PulseParams",
    "assemble_blowup_data",
    "blowup_profiles",
    "mollifier",
    "mollify",
    "sobolev_norm",
    "upsilon_initial",
]

__version__ = "0.1.0"
