"""Fourier collocation operators on the torus.

The low-level helpers take and return plain spatial arrays so solver hot
loops avoid wrapper overhead; the field-level API mirrors them.

Derivatives use the Nyquist-zeroed symbols of :class:`TorusGrid`, so
``divergence(gradient(u))`` equals the discrete Laplacian exactly and
every derivative maps real fields to real fields.
"""

from __future__ import annotations

import numpy as np

from .torus import TorusGrid
from .fields import ScalarField, VectorField
from ..errors import ValidationError


# -- low level (arrays in, arrays out) ------------------------------------

def diff_array(grid: TorusGrid, values: np.ndarray, axis: int) -> np.ndarray:
    """Spectral partial derivative along *axis*."""
    spec = grid.rfftn(values)
    return grid.irfftn(1j * grid.k_deriv(axis) * spec)

def gradient_array(grid: TorusGrid, values: np.ndarray) -> np.ndarray:
    """All d partial derivatives, stacked on a leading axis. One forward
    transform is shared by the d inverse transforms."""
    spec = grid.rfftn(values)
    out = np.empty((grid.d,) + grid.spatial_shape)
    for axis in range(grid.d):
        out[axis] = grid.irfftn(1j * grid.k_deriv(axis) * spec)
    return out

def divergence_array(grid: TorusGrid, values: np.ndarray) -> np.ndarray:
    """Divergence of a vector array with leading component axis."""
    acc = np.zeros(grid.spectral_shape, dtype=complex)
    for axis in range(grid.d):
        acc += 1j * grid.k_deriv(axis) * grid.rfftn(values[axis])
    return grid.irfftn(acc)

def neg_laplace_inv_array(grid: TorusGrid, values: np.ndarray) -> np.ndarray:
    """Solve -Laplace(w) = v for the mean-zero solution.

    Modes in the kernel of the discrete Laplacian (the constant mode and
    pure Nyquist modes, where every derivative symbol vanishes) are
    projected out of the right-hand side.
    """
    spec = grid.rfftn(values)
    sym = grid.lap_symbol
    live = sym > 0.0
    out = np.zeros_like(spec)
    np.divide(spec, sym, out=out, where=live)
    return grid.irfftn(out)

def mollify_array(grid: TorusGrid, values: np.ndarray, scale: float) -> np.ndarray:
    """Gaussian spectral filter exp(-|k|^2 scale^2 / 2); preserves the mean."""
    if scale < 0:
        raise ValidationError(f"mollifier scale must be >= 0, got {scale}")
    if scale == 0:
        return np.array(values, dtype=float, copy=True)
    spec = grid.rfftn(values)
    return grid.irfftn(spec * np.exp(-0.5 * scale ** 2 * grid.k2_full))

def matvec_array(a_values: np.ndarray, vec: np.ndarray) -> np.ndarray:
    """Pointwise matrix-vector product (a v)_i = sum_j a_ij v_j.

    Explicit loop keeps the reduction order fixed regardless of BLAS.
    """
    d = vec.shape[0]
    out = np.zeros_like(vec)
    for i in range(d):
        for j in range(d):
            out[i] += a_values[i, j] * vec[j]
    return out


# -- field level -----------------------------------------------------------

def diff(field: ScalarField, axis: int) -> ScalarField:
    if not 0 <= axis < field.grid.d:
        raise ValidationError(f"axis {axis} out of range for d={field.grid.d}")
    return ScalarField(field.grid, diff_array(field.grid, field.values, axis),
                       mean_zero=True)

def gradient(field: ScalarField) -> VectorField:
    return VectorField(field.grid, gradient_array(field.grid, field.values),
                       mean_zero=True)

def divergence(field: VectorField) -> ScalarField:
    return ScalarField(field.grid, divergence_array(field.grid, field.values),
                       mean_zero=True)

def neg_laplace_inv(field: ScalarField) -> ScalarField:
    return ScalarField(field.grid,
                       neg_laplace_inv_array(field.grid, field.values),
                       mean_zero=True)

def mollify(field: ScalarField, scale: float) -> ScalarField:
    out = ScalarField(field.grid, mollify_array(field.grid, field.values, scale))
    out.mean_zero = field.mean_zero
    return out
