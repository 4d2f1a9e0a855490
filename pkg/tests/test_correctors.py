"""Corrector pipeline: phi/sigma/a_hom, psi/q1/a1/Psi, gauges, r_star.

Quantitative gates are frozen from oracle calibration runs:
  - laminate closed forms (exact piecewise integration, see conftest)
  - nonsymmetric 1D-profile a1 via dense quadrature (values inlined below)
  - checkerboard effective coefficient via the 2D duality relation
"""
import itertools

import numpy as np
import pytest

from homoglab.grid import (TorusGrid, ScalarField, MatrixField, SymRank3Field,
                           norm, diff)
from homoglab.ensemble import (CoefficientField, CovarianceSpec,
                               LipschitzMapSpec, constant_field,
                               laminate_field, checkerboard_field,
                               sample_coefficient_field)
from homoglab.cellsolve import SolveSpec, default_spec_for
from homoglab.correctors import (solve_first_order, solve_second_order,
                                 solve_psi, compute_q1_a1, solve_Psi,
                                 check_sigma_divergence, estimate_rstar,
                                 equationpsi_residuals, gauge_residual,
                                 potential_divergence_gap, dump_correctors,
                                 load_correctors)
from homoglab.runtime import dsum

from conftest import (trig_coefficient, laminate_phi_exact,
                      laminate_psi11_exact)

REL_TOL = 1e-9


def l2(grid, values):
    return float(np.sqrt(dsum(values * values) * grid.cell_volume))


@pytest.fixture(scope="module")
def trig_foc():
    g = TorusGrid(d=2, n=32, L=1.0)
    a = trig_coefficient(g)
    foc = solve_first_order(a, spec=SolveSpec(rel_tol=REL_TOL, max_iter=2000))
    return g, a, foc


# -- identity coefficient: everything collapses -------------------------------

def test_identity_first_and_second_order(grid3):
    a = constant_field(grid3, np.eye(3))
    foc = solve_first_order(a, spec=SolveSpec(rel_tol=REL_TOL))
    for i in range(3):
        assert l2(grid3, foc.phi.values[i]) <= 10 * REL_TOL
    assert np.max(np.abs(foc.a_hom - np.eye(3))) <= 1e-10
    assert foc.sigma.l2_norm() <= 1e-12
    gaps, kernel = check_sigma_divergence(a, foc)
    assert np.max(gaps) <= 1e-12
    assert np.max(kernel) <= 1e-12
    soc = solve_second_order(a, foc, eps_scale=0.25,
                             spec=SolveSpec(rel_tol=REL_TOL))
    assert soc.psi.l2_norm() <= 1e-8
    assert np.max(np.abs(soc.a1)) == 0.0
    assert soc.q1.l2_norm() <= 1e-8
    assert soc.Psi.l2_norm() <= 1e-8


# -- laminate oracle -----------------------------------------------------------

def test_laminate_first_order_matches_quadrature_oracle():
    for n, factor_check in ((64, False), (128, True)):
        g = TorusGrid(d=3, n=n, L=1.0)
        a = laminate_field(g, axis=0, alpha1=1.0, alpha2=0.5)
        foc = solve_first_order(a, spec=SolveSpec(rel_tol=REL_TOL, max_iter=2000))
        want = np.diag([2.0 / 3.0, 1.0, 1.0])
        assert np.max(np.abs(foc.a_hom - want)) <= max(10 * REL_TOL, 0.06 / n ** 2)
        err = norm(ScalarField(g, foc.phi.values[0] - laminate_phi_exact(g)),
                   "Hminus1_torus")
        assert err <= 0.06 / n ** 2
        if factor_check:
            globals()["_lam_err_128"] = err
        else:
            globals()["_lam_err_64"] = err
        # gradient plateau +-1/3 away from the two interfaces
        dphi = diff(ScalarField(g, foc.phi.values[0]), 0).values
        x = g.axis_coords()
        far = (np.minimum(x, g.L - x) > g.L / 8.0) & (np.abs(x - g.L / 2) > g.L / 8.0)
        target = np.where(x < g.L / 2, -1.0 / 3.0, 1.0 / 3.0)
        line = dphi[(slice(None),) + (0,) * (g.d - 1)]
        assert np.max(np.abs(line[far] - target[far])) <= 1e-10
    # quadratic convergence: n doubling shrinks the error by >= 3x
    assert globals()["_lam_err_64"] / globals()["_lam_err_128"] >= 3.0


def test_laminate_psi_matches_quadrature_oracle():
    for n in (64, 128):
        g = TorusGrid(d=2, n=n, L=1.0)
        a = laminate_field(g, axis=0, alpha1=1.0, alpha2=0.5)
        spec = SolveSpec(rel_tol=REL_TOL, max_iter=2000)
        foc = solve_first_order(a, spec=spec)
        psi, _stats = solve_psi(a, foc, spec=spec)
        err = norm(ScalarField(g, psi.values[0, 0] - laminate_psi11_exact(g)),
                   "Hminus1_torus")
        assert err <= 0.005 / n ** 2


# -- checkerboard duality ------------------------------------------------------

def test_checkerboard_matches_duality_relation():
    # 2D duality: a_hom = sqrt(a1 a2) I for the two-phase checkerboard;
    # the builder normalizes by 4, so compare on the unnormalized scale
    g = TorusGrid(d=2, n=256, L=1.0)
    a = checkerboard_field(g, a1=1.0, a2=4.0, period=g.L / 8.0)
    foc = solve_first_order(a, spec=SolveSpec(rel_tol=REL_TOL, max_iter=4000))
    scale = a.provenance["normalized_by"]
    a_hom = scale * foc.a_hom
    want = np.sqrt(1.0 * 4.0)
    assert abs(a_hom[0, 0] - want) <= 0.02 * want
    assert abs(a_hom[1, 1] - want) <= 0.02 * want
    assert abs(a_hom[0, 1]) <= 0.02 * want
    assert abs(a_hom[1, 0]) <= 0.02 * want


# -- first-order invariants ----------------------------------------------------

def test_first_order_invariants(trig_foc):
    g, a, foc = trig_foc
    for i in range(g.d):
        phi_i = foc.phi.values[i]
        assert abs(phi_i.mean()) <= 1e-12 * l2(g, phi_i)
        # torus average of q_i is a_hom e_i by definition, bit-exact
        for j in range(g.d):
            assert foc.q.values[i, j].mean() == foc.a_hom[j, i] \
                or abs(foc.q.values[i, j].mean() - foc.a_hom[j, i]) == 0.0
    foc.sigma.check_mean_zero()  # raises on violation
    # ellipticity window: lam <= eigs, |a_hom v| <= d
    sym = 0.5 * (foc.a_hom + foc.a_hom.T)
    assert np.linalg.eigvalsh(sym).min() >= a.lam - 1e-10
    assert np.linalg.norm(foc.a_hom, 2) <= g.d + 1e-10


def test_ahom_duality_under_transpose(trig_foc):
    g, a, foc = trig_foc
    at = CoefficientField(a=MatrixField(g, a.a.values.transpose(1, 0, 2, 3)),
                          lam=a.lam, symmetric=a.symmetric)
    foc_t = solve_first_order(at, spec=SolveSpec(rel_tol=REL_TOL, max_iter=2000))
    assert np.max(np.abs(foc_t.a_hom - foc.a_hom.T)) <= 10 * REL_TOL


def test_sigma_divergence_gap_and_tolerance_scaling(trig_foc):
    g, a, foc = trig_foc
    gaps, kernel = check_sigma_divergence(a, foc)
    q_scale = max(l2(g, foc.flux_correction(i)) for i in range(g.d))
    assert np.max(gaps) <= 1e-7 * q_scale  # measured 3.8e-11 relative
    half = solve_first_order(a, spec=SolveSpec(rel_tol=REL_TOL / 2, max_iter=2000))
    gaps_half, _ = check_sigma_divergence(a, half)
    ratio = np.max(gaps) / np.max(gaps_half)
    assert 0.5 <= ratio <= 8.0  # halving tol halves the gap within 4x


# -- second-order pipeline -----------------------------------------------------

def test_psi_asymmetry_for_nonsymmetric_field():
    g = TorusGrid(d=2, n=32, L=1.0)
    a = trig_coefficient(g, skew=0.25)
    spec = default_spec_for(a, rel_tol=REL_TOL, max_iter=2000)
    foc = solve_first_order(a, spec=spec)
    psi, _ = solve_psi(a, foc, spec=spec)
    asym = norm(ScalarField(g, psi.values[0, 1] - psi.values[1, 0]), "L2")
    scale = psi.l2_norm()
    assert asym > 10 * REL_TOL * scale  # measured ratio ~5e7


def test_equationpsi_residuals_small(trig_foc):
    g, a, foc = trig_foc
    psi, _ = solve_psi(a, foc, spec=SolveSpec(rel_tol=REL_TOL, max_iter=2000))
    res = equationpsi_residuals(a, foc, psi, count=10, seed=0)
    assert res.shape == (2, 2, 10)
    assert np.max(res) <= REL_TOL


def test_a1_symmetric_idempotent_and_q1_mean_zero(trig_foc):
    g, a, foc = trig_foc
    soc = solve_second_order(a, foc, eps_scale=0.25,
                             spec=SolveSpec(rel_tol=REL_TOL, max_iter=2000))
    for perm in itertools.permutations(range(3)):
        permuted = np.transpose(soc.a1, perm)
        assert np.array_equal(permuted, soc.a1)
    resym = np.zeros_like(soc.a1)
    for p in itertools.permutations(range(3)):
        resym += np.transpose(soc.a1, p)
    assert np.array_equal(resym / 6.0, soc.a1)
    soc.q1.check_mean_zero()  # raises on violation
    for means in soc.q1.component_means():
        assert means == 0.0


def test_remove_mean_exact_reaches_literal_zero():
    # uniform shifts stall once the residual mean is below half an ulp of
    # every entry; the helper must still land on literal zero
    from homoglab.correctors import _remove_mean_exact
    from homoglab.runtime import dsum_exact

    rng = np.random.default_rng(11)
    for trial in range(20):
        x = rng.standard_normal((31, 33)) * 10.0 ** float(rng.integers(-6, 4))
        if trial % 3 == 0:
            x[0, 0] = 1e-18
        if trial % 5 == 0:
            x += 17.0
        out = _remove_mean_exact(x)
        assert dsum_exact(out) == 0.0
        drift = np.max(np.abs(out - (x - np.mean(x))))
        assert drift <= 1e-12 * np.max(np.abs(x))

    zero = _remove_mean_exact(np.zeros((5, 5)))
    assert np.array_equal(zero, np.zeros((5, 5)))


def test_nonsym_a1_matches_1d_quadrature_oracle():
    # dense-quadrature oracle for a = [[alpha, beta], [-beta, alpha]] with
    # alpha = 0.6 + 0.25 sin(2 pi x0), beta = 0.3 cos(2 pi x0 + 0.7):
    # every cell problem reduces to periodic ODEs in x0 (values at N = 8192);
    # package deviation measured 8.5e-14 at n = 32
    oracle_ahom = np.array([[0.54543560573178573, 0.04218161745719344],
                            [-0.042181617457193454, 0.67857272774622857]])
    oracle_a1 = np.zeros((2, 2, 2))
    for (i, j, k), v in {(0, 0, 1): 0.0051850098430448344,
                         (1, 1, 1): -0.015385251219396668}.items():
        for p in itertools.permutations((i, j, k)):
            oracle_a1[p] = v

    n, L = 32, 1.0
    g = TorusGrid(d=2, n=n, L=L)
    x = g.axis_coords()[:, None]
    alpha = 0.6 + 0.25 * np.sin(2.0 * np.pi * np.broadcast_to(x, g.spatial_shape) / L)
    beta = 0.3 * np.cos(2.0 * np.pi * np.broadcast_to(x, g.spatial_shape) / L + 0.7)
    values = np.stack([np.stack([alpha, beta]), np.stack([-beta, alpha])])
    a = CoefficientField(a=MatrixField(g, values), lam=0.3, symmetric=False)
    spec = default_spec_for(a, rel_tol=REL_TOL, max_iter=2000)
    foc = solve_first_order(a, spec=spec)
    soc = solve_second_order(a, foc, eps_scale=1.0, spec=spec, with_Psi=False)
    assert np.max(np.abs(foc.a_hom - oracle_ahom)) <= 5e-11
    assert np.max(np.abs(soc.a1 - oracle_a1)) <= 5e-11


def test_Psi_gauge_contracts(trig_foc):
    g, a, foc = trig_foc
    soc = solve_second_order(a, foc, eps_scale=0.25,
                             spec=SolveSpec(rel_tol=REL_TOL, max_iter=2000))
    # gauge equation inverted exactly per mode
    assert gauge_residual(soc.Psi, soc.q1) <= 1e-10
    # structural skew in the trailing pair
    for i in range(g.d):
        for j in range(g.d):
            for k in range(g.d):
                assert np.array_equal(soc.Psi.component(i, j, k, k),
                                      np.zeros(g.spatial_shape))
                for l in range(k + 1, g.d):
                    assert np.array_equal(soc.Psi.component(i, j, k, l),
                                          -soc.Psi.component(i, j, l, k))
    # open question of the gauge: div(Psi) = q1 pointwise is NOT asserted,
    # only measured; record that the gap is a genuine quantity
    gap = potential_divergence_gap(soc.Psi, soc.q1)
    assert np.isfinite(gap) and gap >= 0.0


def test_zero_q1_gives_zero_Psi(grid2):
    d = grid2.d
    q1 = SymRank3Field(grid2, np.zeros((d * (d + 1) * (d + 2) // 6,)
                                       + grid2.spatial_shape))
    Psi = solve_Psi(q1)
    assert Psi.l2_norm() == 0.0


# -- r_star ---------------------------------------------------------------------

def test_rstar_identity_is_minimal(grid3):
    a = constant_field(grid3, np.eye(3))
    foc = solve_first_order(a, spec=SolveSpec(rel_tol=REL_TOL))
    diag = estimate_rstar(foc)
    assert diag.r_star == min(diag.radii)
    assert not diag.capped


def test_rstar_nondecreasing_as_delta_shrinks(trig_foc):
    g, a, foc = trig_foc
    deltas = [1.0 / 4, 1.0 / 16, 1.0 / 64, 1.0 / 256, 1.0 / 1024]
    values = [estimate_rstar(foc, delta=d_).r_star for d_ in deltas]
    for lo, hi in zip(values, values[1:]):
        assert hi >= lo
    for v in values:
        assert v in estimate_rstar(foc).radii or v == g.L / 2


# -- persistence ----------------------------------------------------------------

def test_dump_load_roundtrip(tmp_path, trig_foc):
    import json
    g, a, foc = trig_foc
    soc = solve_second_order(a, foc, eps_scale=0.25,
                             spec=SolveSpec(rel_tol=REL_TOL, max_iter=2000))
    manifest_path = dump_correctors(tmp_path / "bundle", foc, soc)
    manifest = json.loads(open(manifest_path).read())
    assert np.allclose(manifest["a_hom"], foc.a_hom, rtol=0, atol=0)
    foc2, soc2 = load_correctors(tmp_path / "bundle")
    assert np.array_equal(foc2.phi.values, foc.phi.values)
    assert np.array_equal(foc2.q.values, foc.q.values)
    assert np.array_equal(foc2.sigma.values, foc.sigma.values)
    assert np.array_equal(foc2.a_hom, foc.a_hom)
    assert np.array_equal(soc2.psi.values, soc.psi.values)
    assert np.array_equal(soc2.q1.values, soc.q1.values)
    assert np.array_equal(soc2.a1, soc.a1)
    assert np.array_equal(soc2.Psi.values, soc.Psi.values)
    assert soc2.eps_scale == soc.eps_scale
