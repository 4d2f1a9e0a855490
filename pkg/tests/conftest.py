"""Shared fixtures and independent oracle helpers.

Dense oracles here deliberately avoid the package's FFT wrappers: the
spectral mode sums use numpy's full complex FFT directly and the masked
Laplacian is assembled as an explicit matrix, so a bug in the library's
operator plumbing cannot cancel out of a comparison.
"""
import numpy as np
import pytest

from homoglab.grid import TorusGrid, MatrixField
from homoglab.ensemble import CoefficientField


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def band_limited_values(grid: TorusGrid, cut: int, seed: int) -> np.ndarray:
    """Mean-zero random field with integer modes |k| <= cut per axis."""
    rng = make_rng(seed)
    white = rng.standard_normal(grid.spatial_shape)
    spec = grid.rfftn(white)
    keep = grid.k2_full <= (2.0 * np.pi / grid.L * cut) ** 2
    v = grid.irfftn(np.where(keep, spec, 0.0))
    return v - v.mean()


def trig_coefficient(grid: TorusGrid, skew: float = 0.0) -> CoefficientField:
    """Fixed smooth matrix coefficient, refinable on any grid (d >= 2)."""
    L = grid.L
    xs = [grid.coordinate(ax) for ax in range(grid.d)]
    w = 2.0 * np.pi / L
    base = 0.55 + 0.18 * np.sin(w * xs[0]) * np.cos(w * xs[1]) \
        + 0.08 * np.cos(2.0 * w * xs[0])
    off = 0.1 * np.sin(w * xs[1])
    values = np.zeros((grid.d, grid.d) + grid.spatial_shape)
    for i in range(grid.d):
        values[i, i] = base
    values[0, 1] += off + skew * np.cos(w * xs[0])
    values[1, 0] += off - skew * np.cos(w * xs[0])
    return CoefficientField(a=MatrixField(grid, values), lam=0.2,
                            symmetric=(skew == 0.0),
                            provenance={"kind": "trig", "skew": skew})


def dense_masked_neg_laplacian(grid: TorusGrid, mask: np.ndarray) -> tuple:
    """Explicit matrix of the 2d+1-point Dirichlet operator on the mask.

    Returns (A, cells) where cells is the list of masked multi-indices in
    C order and A[p, q] couples cells[p] and cells[q]. Neighbors are taken
    with periodic wrap, matching the library for masks that do not touch
    the seam.
    """
    mask = np.asarray(mask, dtype=bool)
    cells = np.argwhere(mask)
    index = -np.ones(grid.spatial_shape, dtype=int)
    for p, c in enumerate(cells):
        index[tuple(c)] = p
    m = len(cells)
    A = np.zeros((m, m))
    h2 = grid.h * grid.h
    for p, c in enumerate(cells):
        A[p, p] = 2.0 * grid.d / h2
        for axis in range(grid.d):
            for step in (-1, 1):
                nb = list(c)
                nb[axis] = (nb[axis] + step) % grid.n
                q = index[tuple(nb)]
                if q >= 0:
                    A[p, q] -= 1.0 / h2
    return A, cells


def dense_hminus1_torus(grid: TorusGrid, values: np.ndarray) -> float:
    """Direct mode-sum H^-1 norm via numpy's full complex FFT."""
    v = values - values.mean()
    spec = np.fft.fftn(v) / v.size
    k2 = np.zeros(grid.spatial_shape)
    for axis in range(grid.d):
        k_int = np.fft.fftfreq(grid.n, d=1.0 / grid.n)
        shape = [1] * grid.d
        shape[axis] = grid.n
        k2 = k2 + (2.0 * np.pi / grid.L * k_int.reshape(shape)) ** 2
    mask = k2 > 0
    total = np.sum(np.abs(spec[mask]) ** 2 / k2[mask]) * grid.L ** grid.d
    return float(np.sqrt(total))


def laminate_phi_exact(grid: TorusGrid) -> np.ndarray:
    """First corrector of the {1, 1/2} half-period laminate along axis 0.

    alpha = 1 on [0, L/2), 1/2 on [L/2, L): phi' = c/alpha - 1 with the
    harmonic mean c = 2/3, glued continuously, shifted to mean zero.
    """
    L = grid.L
    x = grid.axis_coords()[(slice(None),) + (None,) * (grid.d - 1)]
    x = np.broadcast_to(x, grid.spatial_shape)
    phi = np.where(x < L / 2, -x / 3.0, -L / 6.0 + (x - L / 2.0) / 3.0)
    return phi + L / 12.0


def laminate_psi11_exact(grid: TorusGrid) -> np.ndarray:
    """Second corrector psi_11 of the same laminate: alpha psi' = -phi alpha + c."""
    L = grid.L
    x = grid.axis_coords()[(slice(None),) + (None,) * (grid.d - 1)]
    x = np.broadcast_to(x, grid.spatial_shape)
    y = x - L / 2.0
    return np.where(x < L / 2, x ** 2 / 6.0 - L * x / 12.0,
                    -(y ** 2) / 6.0 + L * y / 12.0)


@pytest.fixture(scope="session")
def grid2() -> TorusGrid:
    return TorusGrid(d=2, n=32, L=1.0)


@pytest.fixture(scope="session")
def grid3() -> TorusGrid:
    return TorusGrid(d=3, n=16, L=1.0)
