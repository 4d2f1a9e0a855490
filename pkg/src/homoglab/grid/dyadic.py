"""Dyadic block averages and the multiscale H^-1 estimator.

Level m partitions the grid into cubes of side 2^(m+1) cells. The top
level N = log2(n) - 1 has a single block, whose average is the global
mean. Successive projections nest: P_{m-1} P_m = P_m.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .torus import TorusGrid
from .fields import ScalarField
from .spectral import gradient_array
from ..errors import BadLevel


def top_level(grid: TorusGrid) -> int:
    return int(grid.n).bit_length() - 2


def _block_cells(grid: TorusGrid, level: int) -> int:
    if level < 0:
        raise BadLevel(f"level must be >= 0, got {level}")
    cells = 2 ** (level + 1)
    if cells > grid.n or grid.n % cells != 0:
        raise BadLevel(
            f"level {level} needs blocks of {cells} cells per side, "
            f"incompatible with n = {grid.n}")
    return cells


def _project_array(grid: TorusGrid, values: np.ndarray, level: int) -> np.ndarray:
    b = _block_cells(grid, level)
    blocks = grid.n // b
    shape = []
    for _ in range(grid.d):
        shape.extend((blocks, b))
    folded = values.reshape(shape)
    # pairwise fold per block axis: sums of identical values are pure
    # doublings, so projecting a projected field reproduces it bitwise
    for axis in range(1, 2 * grid.d, 2):
        while folded.shape[axis] > 1:
            lo = [slice(None)] * folded.ndim
            hi = [slice(None)] * folded.ndim
            lo[axis] = slice(0, None, 2)
            hi[axis] = slice(1, None, 2)
            folded = folded[tuple(lo)] + folded[tuple(hi)]
    means = folded.reshape([blocks] * grid.d) / float(b ** grid.d)
    for axis in range(grid.d):
        means = np.repeat(means, b, axis=axis)
    return means


def dyadic_project(u: ScalarField, level: int) -> ScalarField:
    """Replace u by its average over each dyadic block of side 2^(level+1) cells."""
    return ScalarField(u.grid, _project_array(u.grid, u.values, level))


@dataclass
class MultiscaleDecomposition:
    """Orthogonal block-difference decomposition of a mean-zero field."""

    differences: list = dc_field(default_factory=list)  # P_{m-1}u - P_m u, m = 1..N
    residual: ScalarField = None                        # u - P_0 u
    l2_identity_gap: float = 0.0
    multiscale_hminus1_bound: float = 0.0
    mean_removed: float = 0.0


def multiscale_decomposition(u: ScalarField, N: int = None) -> MultiscaleDecomposition:
    """Decompose u - P_N u into L2-orthogonal dyadic pieces.

    Returns the block differences, the fine-scale residual u - P_0 u, the
    relative defect of the L2 orthogonality identity, and the raw bound

        sum_{m=1..N} 2^m * h * ||P_{m-1}u - P_m u||_L2 + ||grad u||_L2,

    an upper bound for the spectral H^-1 norm up to a fixed constant.
    The global mean is removed first (projections commute with constants,
    so the differences are unaffected).
    """
    grid = u.grid
    if N is None:
        N = top_level(grid)
    _block_cells(grid, N)

    mean = float(u.values.mean())
    vol = grid.cell_volume
    work = u.values - mean

    projections = [_project_array(grid, work, m) for m in range(N + 1)]
    residual = work - projections[0]
    diffs = [projections[m - 1] - projections[m] for m in range(1, N + 1)]

    total_sq = float(np.sum((work - projections[N]) ** 2) * vol)
    parts_sq = float(np.sum(residual ** 2) * vol)
    bound = 0.0
    for m, diff in enumerate(diffs, start=1):
        piece = float(np.sum(diff ** 2) * vol)
        parts_sq += piece
        bound += (2.0 ** m) * grid.h * np.sqrt(piece)
    bound += float(np.sqrt(np.sum(gradient_array(grid, work) ** 2) * vol))

    gap = abs(total_sq - parts_sq)
    return MultiscaleDecomposition(
        differences=[ScalarField(grid, dv) for dv in diffs],
        residual=ScalarField(grid, residual),
        l2_identity_gap=gap,
        multiscale_hminus1_bound=float(bound),
        mean_removed=mean,
    )
