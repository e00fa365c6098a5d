"""Cubic nonlinearity F(u, du) = sum g^{jkl} slot_j slot_k slot_l.

Slot indices run over {-1, 0, 1, 2, 3}: -1 is the identity slot (the field u
itself), 0 is the time derivative v, and 1..3 are the spatial derivatives.
Coefficients are stored sparsely; presets have one to three nonzero entries
and evaluation cost dominates everything else.  The sum is over ordered
triples exactly as given: no symmetrization is applied.

Under the pulse rescaling the coefficients pick up the factor
delta^(2 - n_j - n_k - n_l) with n_{-1} = 0 and n_i = 1 for i = 0..3.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pulsekg.grid import GridError, ScalarField

SLOTS = (-1, 0, 1, 2, 3)


@dataclass(frozen=True)
class CubicTensor:
    """Sparse coefficients: tuple of ((j, k, l), value) with j,k,l in SLOTS."""

    entries: tuple[tuple[tuple[int, int, int], float], ...]

    def __post_init__(self):
        norm = []
        for idx, val in self.entries:
            j, k, l = idx
            if any(s not in SLOTS for s in (j, k, l)):
                raise ValueError(f"tensor index {idx} outside slots {SLOTS}")
            val = float(val)
            if not np.isfinite(val):
                raise ValueError(f"tensor entry {idx} has non-finite value {val}")
            norm.append(((int(j), int(k), int(l)), val))
        object.__setattr__(self, "entries", tuple(norm))

    @classmethod
    def from_dict(cls, coeffs: dict[tuple[int, int, int], float]) -> "CubicTensor":
        return cls(tuple(sorted(coeffs.items())))

    def needed_gradient_axes(self) -> tuple[int, ...]:
        """Spatial slots (0-based axes) any entry touches; lets callers skip work."""
        axes = {s - 1 for idx, _ in self.entries for s in idx if s >= 1}
        return tuple(sorted(axes))

    @property
    def is_zero(self) -> bool:
        return all(v == 0.0 for _, v in self.entries)


ZERO_TENSOR = CubicTensor(())


def preset_blowup() -> CubicTensor:
    """F = (du/dt)^2 du/dx1, i.e. the single entry g^{001} = 1."""
    return CubicTensor((((0, 0, 1), 1.0),))


def scale_tensor(tensor: CubicTensor, delta: float) -> CubicTensor:
    """Coefficients of the rescaled-frame nonlinearity.

    Each entry is multiplied by delta^(2 - n_j - n_k - n_l), n_{-1}=0, else 1.
    """
    if not delta > 0:
        raise ValueError(f"scale factor must be positive, got {delta}")
    scaled = []
    for (j, k, l), val in tensor.entries:
        nsum = sum(0 if s == -1 else 1 for s in (j, k, l))
        scaled.append(((j, k, l), val * delta ** (2 - nsum)))
    return CubicTensor(tuple(scaled))


def _slot_array(s: int, u: np.ndarray, v: np.ndarray, grad: tuple[np.ndarray, ...]) -> np.ndarray:
    if s == -1:
        return u
    if s == 0:
        return v
    return grad[s - 1]


def eval_cubic_arrays(tensor: CubicTensor, u: np.ndarray, v: np.ndarray,
                      grad: tuple[np.ndarray | None, np.ndarray | None, np.ndarray | None]
                      ) -> np.ndarray:
    """Hot-path evaluation on raw arrays; grad components may be None if unused."""
    out = np.zeros_like(u)
    for (j, k, l), val in tensor.entries:
        if val == 0.0:
            continue
        term = _slot_array(j, u, v, grad) * _slot_array(k, u, v, grad)
        term *= _slot_array(l, u, v, grad)
        out += val * term
    return out


def eval_cubic(tensor: CubicTensor, u: ScalarField, v: ScalarField,
               grad: tuple[ScalarField, ScalarField, ScalarField]) -> ScalarField:
    """Pointwise sum over nonzero entries of g^{jkl} slot_j slot_k slot_l."""
    fields = (u, v) + tuple(grad)
    for f in fields[1:]:
        if f.grid != u.grid:
            raise GridError("all nonlinearity slot fields must share one grid")
    out = eval_cubic_arrays(tensor, u.values, v.values, tuple(g.values for g in grad))
    return ScalarField(u.grid, out)
