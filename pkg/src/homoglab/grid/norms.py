"""Norms: L2, H1 seminorm, spectral H^-1 on the torus, Dirichlet H^-1 on a ball.

All norms use the volume-weighted inner product, integral = h^d * sum over
cells. For tensor fields the reported value sums every nominal component,
so packed skew components count twice.
"""

from __future__ import annotations

import numpy as np

from .torus import TorusGrid
from .fields import Field, ScalarField
from .spectral import gradient_array
from ..errors import ValidationError

KINDS = ("L2", "H1semi", "Hminus1_torus")


def _l2_sq(grid: TorusGrid, values: np.ndarray) -> float:
    return float(np.sum(values ** 2) * grid.cell_volume)

def _h1semi_sq(grid: TorusGrid, values: np.ndarray) -> float:
    return _l2_sq(grid, gradient_array(grid, values))

def _hminus1_sq(grid: TorusGrid, values: np.ndarray) -> float:
    # Mode sum |u_k|^2 / |2 pi k / L|^2 over k != 0, in rfft storage.
    # The unnormalized DFT carries a factor n^d against the L2 integral.
    spec = grid.rfftn(values)
    weight = np.zeros(grid.spectral_shape)
    live = grid.k2_full > 0.0
    np.divide(grid.parseval_mult * np.ones_like(grid.k2_full), grid.k2_full,
              out=weight, where=live)
    total = float(np.sum(weight * (spec.real ** 2 + spec.imag ** 2)))
    return total * grid.cell_volume / grid.cell_count


def norm(field: Field, kind: str) -> float:
    """Norm of a field over all its nominal components.

    ``Hminus1_torus`` acts on the mean-zero part of each component (the
    zero mode carries no weight in the mode sum).
    """
    if kind not in KINDS:
        raise ValidationError(f"unknown norm kind {kind!r}, expected one of {KINDS}")
    grid = field.grid
    flat = field.storage_components()
    mult = field.storage_multiplicity()
    if kind == "L2":
        parts = [_l2_sq(grid, comp) for comp in flat]
    elif kind == "H1semi":
        parts = [_h1semi_sq(grid, comp) for comp in flat]
    else:
        parts = [_hminus1_sq(grid, comp) for comp in flat]
    return float(np.sqrt(np.sum(mult * np.array(parts))))


def hminus1_ball(u: ScalarField, center, radius: float, tol: float = 1e-8) -> float:
    """Discrete H^-1 norm of u over the ball B(center, radius).

    Solves -Laplace(w) = u on the cell mask of B with w = 0 outside (finite
    differences, conjugate gradients to relative residual <= tol) and
    returns the Dirichlet energy norm ||grad w||_{L2(B)}.

    The ball must fit inside the torus with margin >= 2h.
    """
    grid = u.grid
    if not radius + 2.0 * grid.h <= grid.L / 2.0:
        raise ValidationError(
            f"ball radius {radius} leaves margin < 2h inside the torus "
            f"(need radius + 2h <= L/2 = {grid.L / 2.0})")
    if not (0.0 < tol < 1.0):
        raise ValidationError(f"tol must lie in (0, 1), got {tol}")
    mask = grid.ball_mask(center, radius)
    from ..cellsolve import dirichlet_mask_cg, dirichlet_energy
    w, _stats = dirichlet_mask_cg(grid, mask, u.values, rel_tol=tol)
    return float(np.sqrt(dirichlet_energy(grid, w)))
