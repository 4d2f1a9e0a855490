"""Norm oracles: Parseval closed forms, dense mode sums, masked Dirichlet H^-1."""
import numpy as np
import pytest

from homoglab.grid import TorusGrid, ScalarField, norm, hminus1_ball

from conftest import (band_limited_values, dense_hminus1_torus,
                      dense_masked_neg_laplacian)


@pytest.mark.parametrize("d,L", [(1, 1.0), (2, 2.0), (3, 1.0)])
def test_single_mode_l2_and_hminus1(d, L):
    g = TorusGrid(d=d, n=16, L=L)
    u = ScalarField(g, np.sin(2.0 * np.pi * g.coordinate(0) / L))
    want_l2 = np.sqrt(L ** d / 2.0)
    assert abs(norm(u, "L2") - want_l2) <= 1e-12 * want_l2
    want_hm1 = want_l2 * L / (2.0 * np.pi)
    assert abs(norm(u, "Hminus1_torus") - want_hm1) <= 1e-12 * want_hm1


@pytest.mark.parametrize("d,n", [(2, 32), (3, 16)])
def test_hminus1_matches_dense_mode_sum(d, n):
    g = TorusGrid(d=d, n=n, L=1.5)
    for seed in range(5):
        u = ScalarField(g, band_limited_values(g, cut=n // 4, seed=seed))
        want = dense_hminus1_torus(g, u.values)
        assert abs(norm(u, "Hminus1_torus") - want) <= 1e-12 * want


def test_hminus1_ignores_the_mean(grid2):
    u = band_limited_values(grid2, cut=6, seed=9)
    a = norm(ScalarField(grid2, u), "Hminus1_torus")
    b = norm(ScalarField(grid2, u + 4.25), "Hminus1_torus")
    assert abs(a - b) <= 1e-12 * a


def test_hminus1_bounded_by_l2_over_smallest_symbol(grid2):
    bound = grid2.L / (2.0 * np.pi)
    for seed in range(8):
        u = ScalarField(grid2, band_limited_values(grid2, cut=8, seed=seed))
        assert norm(u, "Hminus1_torus") <= bound * norm(u, "L2") * (1 + 1e-12)


def test_h1semi_of_single_mode(grid2):
    k = 3
    u = ScalarField(grid2, np.sin(2.0 * np.pi * k * grid2.coordinate(0) / grid2.L))
    want = (2.0 * np.pi * k / grid2.L) * np.sqrt(grid2.L ** grid2.d / 2.0)
    assert abs(norm(u, "H1semi") - want) <= 1e-12 * want


def test_ball_norm_of_zero_field(grid2):
    u = ScalarField(grid2, np.zeros(grid2.spatial_shape))
    assert hminus1_ball(u, grid2.center, 0.2) == 0.0


@pytest.mark.parametrize("d", [2, 3])
def test_ball_norm_eigenfunction_oracle(d):
    # first Dirichlet eigenpair of the masked 5/7-point Laplacian on 8^d
    g = TorusGrid(d=d, n=8, L=1.0)
    radius = 0.25
    mask = g.ball_mask(g.center, radius)
    A, cells = dense_masked_neg_laplacian(g, mask)
    lams, vecs = np.linalg.eigh(A)
    lam1, e1 = lams[0], vecs[:, 0]
    values = np.zeros(g.spatial_shape)
    for p, c in enumerate(cells):
        values[tuple(c)] = e1[p]
    u = ScalarField(g, values)
    want = lam1 ** -0.5 * norm(u, "L2")
    got = hminus1_ball(u, g.center, radius, tol=1e-12)
    assert abs(got - want) <= 1e-8 * want


@pytest.mark.parametrize("d", [2, 3])
def test_ball_norm_indicator_matches_dense_solve(d):
    g = TorusGrid(d=d, n=16, L=1.0)
    radius = 0.25
    tol = 1e-10
    mask = g.ball_mask(g.center, radius)
    A, cells = dense_masked_neg_laplacian(g, mask)
    rhs = np.ones(len(cells))
    w = np.linalg.solve(A, rhs)
    want = float(np.sqrt(g.cell_volume * rhs @ w))
    u = ScalarField(g, mask.astype(float))
    got = hminus1_ball(u, g.center, radius, tol=tol)
    assert abs(got - want) <= 10.0 * tol * want


def test_ball_norm_monotone_under_inclusion(grid2):
    tol = 1e-8
    u = ScalarField(grid2, band_limited_values(grid2, cut=8, seed=17))
    slack = 10.0 * tol * norm(u, "L2")
    radii = [0.08, 0.12, 0.18, 0.24]
    vals = [hminus1_ball(u, grid2.center, r, tol=tol) for r in radii]
    for small, big in zip(vals, vals[1:]):
        assert small <= big + slack


def test_ball_norm_requires_margin(grid2):
    from homoglab.errors import ValidationError
    u = ScalarField(grid2, np.ones(grid2.spatial_shape))
    with pytest.raises(ValidationError):
        hminus1_ball(u, grid2.center, 0.49)


def test_ball_norm_empty_mask(grid2):
    from homoglab.errors import MaskEmpty
    u = ScalarField(grid2, np.ones(grid2.spatial_shape))
    with pytest.raises(MaskEmpty):
        hminus1_ball(u, grid2.center, grid2.h / 8.0)
