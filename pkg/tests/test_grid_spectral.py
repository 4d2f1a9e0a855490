"""Spectral derivative contracts: exact modes, composition, commutation."""
import numpy as np
import pytest

from homoglab.grid import TorusGrid, ScalarField, VectorField, diff, gradient, divergence

from conftest import band_limited_values


@pytest.mark.parametrize("d", [1, 2, 3])
def test_single_mode_derivative_exact(d):
    g = TorusGrid(d=d, n=32, L=2.0)
    x = g.coordinate(0)
    u = ScalarField(g, np.sin(2.0 * np.pi * x / g.L))
    want = (2.0 * np.pi / g.L) * np.cos(2.0 * np.pi * x / g.L)
    got = diff(u, 0).values
    assert np.max(np.abs(got - want)) <= 1e-12 * np.max(np.abs(want))


def test_constant_has_zero_derivative(grid2):
    u = ScalarField(grid2, np.full(grid2.spatial_shape, 3.7))
    for axis in range(grid2.d):
        assert np.max(np.abs(diff(u, axis).values)) == 0.0


def test_nyquist_mode_derivative_is_dropped(grid2):
    # odd-derivative convention: the n/2 cosine differentiates to zero
    x = grid2.coordinate(0)
    u = ScalarField(grid2, np.cos(2.0 * np.pi * (grid2.n // 2) * x / grid2.L))
    assert np.max(np.abs(diff(u, 0).values)) <= 1e-12 * grid2.n


@pytest.mark.parametrize("d,n", [(2, 32), (3, 16)])
def test_laplacian_is_symbol_multiplication(d, n):
    g = TorusGrid(d=d, n=n, L=1.0)
    u = ScalarField(g, band_limited_values(g, cut=n // 4, seed=11))
    lap = divergence(gradient(u)).values
    want = g.irfftn(-g.k2_full * g.rfftn(u.values))
    scale = np.max(np.abs(want))
    assert np.max(np.abs(lap - want)) <= 1e-12 * scale


def test_mixed_partial_multipliers_commute_bitwise(grid3):
    # the d/dx_i symbol is one shared array per axis, so the composed
    # symbol is literally the same product both ways
    for i in range(grid3.d):
        for j in range(i + 1, grid3.d):
            mi = 1j * grid3.k_deriv(i)
            mj = 1j * grid3.k_deriv(j)
            assert np.array_equal(mi * mj, mj * mi)


def test_mixed_partials_commute_to_roundoff(grid3):
    # sequential application reenters the FFT, so agreement is a few
    # tens of eps rather than bitwise (measured 4.6 eps at n=16)
    eps = np.finfo(float).eps
    u = ScalarField(grid3, band_limited_values(grid3, cut=5, seed=2))
    for i in range(grid3.d):
        for j in range(i + 1, grid3.d):
            a = diff(diff(u, i), j).values
            b = diff(diff(u, j), i).values
            assert np.max(np.abs(a - b)) <= 64.0 * eps * np.max(np.abs(a))


def test_divergence_of_gradient_matches_neg_laplace_inv_roundtrip(grid2):
    from homoglab.grid import neg_laplace_inv
    u = ScalarField(grid2, band_limited_values(grid2, cut=6, seed=7))
    w = neg_laplace_inv(u)
    back = -divergence(gradient(w)).values
    assert np.max(np.abs(back - u.values)) <= 1e-11 * np.max(np.abs(u.values))


def test_vector_field_divergence_linear_in_components(grid2):
    vx = band_limited_values(grid2, cut=4, seed=3)
    vy = band_limited_values(grid2, cut=4, seed=4)
    v = VectorField(grid2, np.stack([vx, vy]))
    split = (diff(ScalarField(grid2, vx), 0).values
             + diff(ScalarField(grid2, vy), 1).values)
    assert np.max(np.abs(divergence(v).values - split)) <= 1e-13
