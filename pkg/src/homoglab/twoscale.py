"""Macroscopic solves, two-scale expansions, residual identities, error norms.

Everything lives on one torus: the coefficient varies at the correlation
length ell (playing epsilon) while the right-hand side varies at scale L,
so no coordinate rescaling or grid transfer is ever needed.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .grid import (TorusGrid, ScalarField, VectorField, MatrixField,
                   SymRank3Field, SkewRank4Field, sym_triples)
from .grid.spectral import gradient_array, matvec_array
from .grid.norms import norm, hminus1_ball
from .ensemble import CoefficientField
from .cellsolve import (SolveSpec, SolveStats, fft_const_solve,
                        krylov_solve_divform, default_spec_for,
                        filtered_coefficient)
from .correctors import (FirstOrderCorrectors, SecondOrderCorrectors,
                         solve_first_order, solve_psi, compute_q1_a1,
                         compute_flux_correction, solve_potential, solve_Psi,
                         _m_column)
from .errors import ValidationError
from .runtime import dsum, ddot

MACRO_RESIDUAL_RTOL = 1e-12


# -- right-hand sides ----------------------------------------------------------

def default_f(grid: TorusGrid, radius: float = None, center=None) -> ScalarField:
    """Smooth compactly supported bump, mean-removed for torus solvability.

    The profile exp(1 - 1/(1 - r^2/R^2)) on r < R (zero outside) is C-infinity
    with support radius R = L/8 by default, centered at the torus center.
    The removed mean is recorded on the field as ``mean_removed``.
    """
    if radius is None:
        radius = grid.L / 8.0
    if center is None:
        center = grid.center
    if not 0 < radius < grid.L / 2.0:
        raise ValidationError(f"bump radius must lie in (0, L/2), got {radius}")
    r2 = grid.distance2(center) / radius ** 2
    values = np.zeros(grid.spatial_shape)
    inside = r2 < 1.0
    values[inside] = np.exp(1.0 - 1.0 / (1.0 - r2[inside]))
    mean = float(values.mean())
    out = ScalarField(grid, values - mean, mean_zero=True)
    out.mean_removed = mean
    return out


def band_limited_bump(grid: TorusGrid, cut: int = 4,
                      width: float = None) -> ScalarField:
    """Periodized Gaussian truncated to integer frequencies |k_i| <= cut.

    The Fourier coefficients are analytic (per-axis Gaussian decay times
    the center phase), never read off a sampled transform, so every grid
    with n >= 2 cut + 2 samples the identical continuum polynomial and
    refinement studies see one fixed right-hand side.
    """
    if width is None:
        width = grid.L / 12.0
    if not 1 <= cut <= grid.n // 2 - 1:
        raise ValidationError(
            f"cut must lie in [1, n/2 - 1] = [1, {grid.n // 2 - 1}], got {cut}")
    # coefficients of sum_m exp(-|x - c - mL|^2 / 2 width^2) factorize:
    # c_k = (width sqrt(2 pi)/L) exp(-2 pi^2 k^2 width^2 / L^2) e^{-2 pi i k c/L}
    # and c = L/2 on every axis makes the phase (-1)^k
    ks = np.arange(-cut, cut + 1)
    amp = (width * np.sqrt(2.0 * np.pi) / grid.L
           * np.exp(-2.0 * (np.pi * ks * width / grid.L) ** 2)
           * np.where(ks % 2 == 0, 1.0, -1.0))
    x = grid.axis_coords()
    profile = np.zeros(grid.n)
    for k, c in zip(ks, amp):
        profile += c * np.cos(2.0 * np.pi * k * x / grid.L)
    values = profile.reshape((-1,) + (1,) * (grid.d - 1)).copy()
    for axis in range(1, grid.d):
        shape = [1] * grid.d
        shape[axis] = grid.n
        values = values * profile.reshape(shape)
    mean = float(amp[cut]) ** grid.d
    out = ScalarField(grid, values - mean, mean_zero=True)
    out.mean_removed = mean
    return out


# -- macroscopic solves ---------------------------------------------------------

def solve_uhom(a_hom: np.ndarray, f: ScalarField) -> ScalarField:
    """Mean-zero solution of -div(a_hom grad u_hom) = f, exact per mode."""
    return fft_const_solve(a_hom, f)


def _a1_contraction_spec(grid: TorusGrid, a1: np.ndarray,
                         u_spec: np.ndarray) -> np.ndarray:
    """Spectrum of sum_ijk a1_ijk d_i d_j d_k u."""
    d = grid.d
    symbol = np.zeros(grid.spectral_shape)
    for i in range(d):
        ki = grid.k_deriv(i)
        for j in range(d):
            kj = grid.k_deriv(j)
            for k in range(d):
                symbol = symbol + a1[i, j, k] * ki * kj * grid.k_deriv(k)
    # (i k_i)(i k_j)(i k_k) = -i k_i k_j k_k
    return -1j * symbol * u_spec


def solve_u1hom(a_hom: np.ndarray, a1: np.ndarray,
                u_hom: ScalarField) -> ScalarField:
    """Solve -div(a_hom grad u1_hom) = sum a1_ijk d_ijk u_hom exactly."""
    grid = u_hom.grid
    rhs_spec = _a1_contraction_spec(grid, a1, grid.rfftn(u_hom.values))
    rhs = ScalarField(grid, grid.irfftn(rhs_spec), mean_zero=True)
    return fft_const_solve(a_hom, rhs)


@dataclass
class MacroscopicSolution:
    """u_hom, u1_hom, and their spectral derivative caches.

    grad2 stores d_i d_j u_hom at [i, j]; grad3 the sorted triples of
    d_i d_j d_k u_hom; grad_u1/grad2_u1 mirror the first two for u1_hom.
    """

    f: ScalarField
    a_hom: np.ndarray
    a1: np.ndarray
    u_hom: ScalarField
    u1_hom: ScalarField
    grad: VectorField
    grad2: MatrixField
    grad3: SymRank3Field
    grad_u1: VectorField
    grad2_u1: MatrixField
    f_mean_removed: float = 0.0

    @property
    def grid(self) -> TorusGrid:
        return self.f.grid

    def hessian_row(self, i: int) -> np.ndarray:
        """grad(d_i u_hom) as a (d, spatial) array."""
        return self.grad2.values[i]

    def third_row(self, i: int, j: int) -> np.ndarray:
        """grad(d_i d_j u_hom) as a (d, spatial) array."""
        return np.stack([self.grad3.component(i, j, l)
                         for l in range(self.grid.d)])

    def hessian_row_u1(self, i: int) -> np.ndarray:
        return self.grad2_u1.values[i]


def _derivative_caches(grid: TorusGrid, values: np.ndarray):
    spec = grid.rfftn(values)
    d = grid.d
    g1 = np.empty((d,) + grid.spatial_shape)
    for i in range(d):
        g1[i] = grid.irfftn(1j * grid.k_deriv(i) * spec)
    g2 = np.empty((d, d) + grid.spatial_shape)
    for i in range(d):
        for j in range(i, d):
            g2[i, j] = grid.irfftn(-grid.k_deriv(i) * grid.k_deriv(j) * spec)
            if j > i:
                g2[j, i] = g2[i, j]
    return spec, g1, g2


def solve_macro(a_hom: np.ndarray, a1: np.ndarray, f: ScalarField) -> MacroscopicSolution:
    """Solve both effective equations and build all derivative caches.

    Validates the spectral residuals of both solves against
    MACRO_RESIDUAL_RTOL times the right-hand side norm.
    """
    grid = f.grid
    d = grid.d
    a_hom = np.asarray(a_hom, dtype=float)
    a1 = np.asarray(a1, dtype=float)
    if a1.shape != (d, d, d):
        raise ValidationError(f"a1 must have shape {(d, d, d)}, got {a1.shape}")
    u_hom = solve_uhom(a_hom, f)
    u1_hom = solve_u1hom(a_hom, a1, u_hom)

    u_spec, g1, g2 = _derivative_caches(grid, u_hom.values)
    triples = sym_triples(d)
    g3 = np.empty((len(triples),) + grid.spatial_shape)
    for s, (i, j, k) in enumerate(triples):
        sym = grid.k_deriv(i) * grid.k_deriv(j) * grid.k_deriv(k)
        g3[s] = grid.irfftn(-1j * sym * u_spec)
    _, g1u1, g2u1 = _derivative_caches(grid, u1_hom.values)

    vol = grid.cell_volume
    fnorm = float(np.sqrt(dsum(f.values ** 2) * vol))
    res = -_divergence_of(grid, _const_flux(grid, a_hom, g1)) - f.values
    if float(np.sqrt(dsum(res * res) * vol)) > MACRO_RESIDUAL_RTOL * fnorm:
        raise ValidationError("u_hom residual exceeds the exact-solve budget")
    rhs1 = grid.irfftn(_a1_contraction_spec(grid, a1, u_spec))
    rhs1_norm = float(np.sqrt(dsum(rhs1 * rhs1) * vol))
    res1 = -_divergence_of(grid, _const_flux(grid, a_hom, g1u1)) - rhs1
    if float(np.sqrt(dsum(res1 * res1) * vol)) > max(
            MACRO_RESIDUAL_RTOL * rhs1_norm, 1e-300):
        if rhs1_norm > 0:
            raise ValidationError("u1_hom residual exceeds the exact-solve budget")

    macro = MacroscopicSolution(
        f=f, a_hom=a_hom, a1=a1, u_hom=u_hom, u1_hom=u1_hom,
        grad=VectorField(grid, g1),
        grad2=MatrixField(grid, g2),
        grad3=SymRank3Field(grid, g3),
        grad_u1=VectorField(grid, g1u1),
        grad2_u1=MatrixField(grid, g2u1),
        f_mean_removed=getattr(f, "mean_removed", 0.0))
    return macro


def _const_flux(grid: TorusGrid, A: np.ndarray, grad: np.ndarray) -> np.ndarray:
    d = grid.d
    out = np.zeros_like(grad)
    for i in range(d):
        for j in range(d):
            out[i] += A[i, j] * grad[j]
    return out


def _divergence_of(grid: TorusGrid, vec: np.ndarray) -> np.ndarray:
    acc = np.zeros(grid.spectral_shape, dtype=complex)
    for axis in range(grid.d):
        acc += 1j * grid.k_deriv(axis) * grid.rfftn(vec[axis])
    return grid.irfftn(acc)


# -- expansions -----------------------------------------------------------------

@dataclass
class ExpansionBundle:
    order: int
    field: ScalarField
    gradient: VectorField


def assemble_expansion(order: int, macro: MacroscopicSolution,
                       foc: FirstOrderCorrectors = None,
                       soc: SecondOrderCorrectors = None,
                       eps_scale: float = None) -> ExpansionBundle:
    """Two-scale expansion of the requested order.

    order 0: u_hom (bit-exact copy). order 1: u_hom + phi_i d_i u_hom.
    order 2: (u_hom + eps u1_hom) + phi_i d_i(u_hom + eps u1_hom)
    + psi_ij d_ij u_hom; eps is soc.eps_scale unless overridden. The
    gradient is the spectral gradient of the assembled field.
    """
    grid = macro.grid
    d = grid.d
    if order not in (0, 1, 2):
        raise ValidationError(f"order must be 0, 1, or 2, got {order}")
    if order >= 1 and foc is None:
        raise ValidationError("order >= 1 needs first-order correctors")
    if order == 2 and soc is None:
        raise ValidationError("order 2 needs second-order correctors")
    if foc is not None and foc.grid != grid:
        raise ValidationError("correctors and macro solution on different grids")

    if order == 0:
        values = macro.u_hom.values.copy()
    elif order == 1:
        values = macro.u_hom.values.copy()
        for i in range(d):
            values += foc.phi.values[i] * macro.grad.values[i]
    else:
        eps = soc.eps_scale if eps_scale is None else eps_scale
        values = macro.u_hom.values + eps * macro.u1_hom.values
        base_grad = macro.grad.values + eps * macro.grad_u1.values
        for i in range(d):
            values += foc.phi.values[i] * base_grad[i]
        for i in range(d):
            for j in range(d):
                values += soc.psi.values[i, j] * macro.grad2.values[i, j]
    field = ScalarField(grid, values)
    gradient = VectorField(grid, gradient_array(grid, values))
    return ExpansionBundle(order=order, field=field, gradient=gradient)


# -- residual identities ----------------------------------------------------------

def _neg_div_a_grad(grid: TorusGrid, a_values: np.ndarray,
                    values: np.ndarray) -> np.ndarray:
    grad = gradient_array(grid, values)
    return -_divergence_of(grid, matvec_array(a_values, grad))


def _hm1(grid: TorusGrid, values: np.ndarray) -> float:
    return norm(ScalarField(grid, values), "Hminus1_torus")


def _potential_times_grad(potential, i: int, j: int,
                          row: np.ndarray) -> np.ndarray:
    """(Phat_ij grad w)_k = sum_l P_ijkl (grad w)_l for a skew container."""
    grid = potential.grid
    d = grid.d
    out = np.zeros((d,) + grid.spatial_shape)
    for k in range(d):
        for l in range(d):
            if l == k:
                continue
            out[k] += potential.component(i, j, k, l) * row[l]
    return out


def identity_residuals(a: CoefficientField, macro: MacroscopicSolution,
                       foc: FirstOrderCorrectors, soc: SecondOrderCorrectors,
                       potential: SkewRank4Field = None) -> dict:
    """Relative H^-1 residuals of the first- and second-order identities.

    Forms reported (all normalized by ||f||_{H^-1}):
      order1:             -div(a grad v1) - f  vs  -div(sum_i M_i grad d_i u_hom)
      order2_intermediate: v2 without u1; RHS -sum F_ij . grad d_ij u_hom
                           - sum div(a psi_ij grad d_ij u_hom)
      order2:             full expansion vs -div((psi a - Phat) grad d_ij u)
                           - eps div(M_i grad d_i u1)   [the paper display;
                           discretely exact up to solver and aliasing terms]
      order2_sym_gauge:   order2 with the potential of the symmetrized q1
                           (diagnostic for the open gauge question)
      order2_ablated:     order2 with the potential term dropped

    ``potential`` is the gauge potential of the unsymmetrized flux
    correction; computed here when not supplied. M_i = phi_i a - sigma_i.
    """
    grid = macro.grid
    d = grid.d
    if potential is None:
        potential = solve_potential(compute_flux_correction(a, foc, soc.psi))
    eps = soc.eps_scale
    scale = _hm1(grid, macro.f.values)
    out = {"scale": scale}

    # order 1
    v1 = assemble_expansion(1, macro, foc)
    lhs1 = _neg_div_a_grad(grid, a.a.values, v1.field.values) - macro.f.values
    rhs_vec = np.zeros((d,) + grid.spatial_shape)
    for i in range(d):
        m_cols = [_m_column(a, foc, i, j) for j in range(d)]
        row = macro.hessian_row(i)
        for j in range(d):
            rhs_vec += m_cols[j] * row[j]
    rhs1 = -_divergence_of(grid, rhs_vec)
    out["order1"] = _hm1(grid, lhs1 - rhs1) / scale

    # order 2, intermediate form (no u1 in the expansion)
    v2s_values = macro.u_hom.values.copy()
    for i in range(d):
        v2s_values += foc.phi.values[i] * macro.grad.values[i]
    for i in range(d):
        for j in range(d):
            v2s_values += soc.psi.values[i, j] * macro.grad2.values[i, j]
    lhs_int = _neg_div_a_grad(grid, a.a.values, v2s_values) - macro.f.values
    rhs_int = np.zeros(grid.spatial_shape)
    for i in range(d):
        for j in range(d):
            row = macro.third_row(i, j)
            F_ij = (matvec_array(a.a.values,
                                 gradient_array(grid, soc.psi.values[i, j]))
                    + _m_column(a, foc, i, j))
            for k in range(d):
                rhs_int -= F_ij[k] * row[k]
            apsi = np.zeros((d,) + grid.spatial_shape)
            for k in range(d):
                acc = np.zeros(grid.spatial_shape)
                for l in range(d):
                    acc += a.a.values[k, l] * row[l]
                apsi[k] = soc.psi.values[i, j] * acc
            rhs_int -= _divergence_of(grid, apsi)
    out["order2_intermediate"] = _hm1(grid, lhs_int - rhs_int) / scale

    # order 2, full expansion
    v2 = assemble_expansion(2, macro, foc, soc)
    lhs2 = _neg_div_a_grad(grid, a.a.values, v2.field.values) - macro.f.values

    def order2_rhs(pot, include_potential=True):
        vec = np.zeros((d,) + grid.spatial_shape)
        for i in range(d):
            for j in range(d):
                row = macro.third_row(i, j)
                flux = np.zeros((d,) + grid.spatial_shape)
                for k in range(d):
                    acc = np.zeros(grid.spatial_shape)
                    for l in range(d):
                        acc += a.a.values[k, l] * row[l]
                    flux[k] = soc.psi.values[i, j] * acc
                if include_potential:
                    flux -= _potential_times_grad(pot, i, j, row)
                vec += flux
        return -_divergence_of(grid, vec)

    u1_div_form = np.zeros((d,) + grid.spatial_shape)
    for i in range(d):
        m_cols = [_m_column(a, foc, i, j) for j in range(d)]
        row_u1 = macro.hessian_row_u1(i)
        for j in range(d):
            u1_div_form += m_cols[j] * row_u1[j]
    base2 = order2_rhs(potential)
    rhs2_display = base2 - eps * _divergence_of(grid, u1_div_form)
    out["order2"] = _hm1(grid, lhs2 - rhs2_display) / scale
    if soc.Psi is not None:
        rhs_g = order2_rhs(soc.Psi) - eps * _divergence_of(grid, u1_div_form)
        out["order2_sym_gauge"] = _hm1(grid, lhs2 - rhs_g) / scale
    rhs_a = order2_rhs(potential, include_potential=False) \
        - eps * _divergence_of(grid, u1_div_form)
    out["order2_ablated"] = _hm1(grid, lhs2 - rhs_a) / scale
    return out


@dataclass
class IdentityRefinementReport:
    """Residuals of each identity form across a refinement ladder."""

    ns: list
    residuals: dict
    slopes: dict
    ablation_factors: list
    smoothed: bool = False


def residual_identity_check(a_factory, d: int, n_values, L: float,
                            eps_scale: float, rel_tol: float = 1e-9,
                            f_cut: int = 4, smooth_rough: bool = False) -> IdentityRefinementReport:
    """Run the identity residuals on a refinement ladder n -> 2n -> 4n.

    ``a_factory(grid)`` must evaluate one fixed coefficient field on any
    grid (trigonometric or piecewise fields; Gaussian draws are not
    refinable). The right-hand side is the band-limited bump, identical
    as a continuum function on every level. ``smooth_rough`` applies one
    mollification pass to the coefficient (flagged in the report) so the
    Leibniz discretization error is the only residual source for rough
    fields. Slopes are fitted decay rates of log2(residual) in log2(n);
    ablation factors are residual(order2_ablated)/residual(order2).
    """
    ns = sorted(int(n) for n in n_values)
    if len(ns) < 2:
        raise ValidationError("refinement needs at least two grid sizes")
    residuals = {}
    ablation = []
    for n in ns:
        grid = TorusGrid(d, n, L)
        a = a_factory(grid)
        if smooth_rough:
            a = filtered_coefficient(a)
        spec = default_spec_for(a, rel_tol=rel_tol)
        foc = solve_first_order(a, spec)
        psi, _ = solve_psi(a, foc, spec)
        q1, a1 = compute_q1_a1(a, foc, psi, eps_scale)
        soc = SecondOrderCorrectors(psi=psi, q1=q1, a1=a1, Psi=solve_Psi(q1),
                                    eps_scale=eps_scale, spec=spec)
        f = band_limited_bump(grid, cut=f_cut)
        macro = solve_macro(foc.a_hom, a1, f)
        res = identity_residuals(a, macro, foc, soc)
        for key, val in res.items():
            residuals.setdefault(key, []).append(val)
        ablation.append(res["order2_ablated"] / max(res["order2"], 1e-300))
    slopes = {}
    logn = np.log2(np.array(ns, dtype=float))
    for key, vals in residuals.items():
        if key == "scale":
            continue
        logs = np.log2(np.maximum(np.array(vals), 1e-300))
        coef = np.polyfit(logn, logs, 1)[0]
        slopes[key] = float(-coef)
    return IdentityRefinementReport(ns=ns, residuals=residuals, slopes=slopes,
                                    ablation_factors=ablation,
                                    smoothed=smooth_rough)


# -- integration by parts in expectation ------------------------------------------

def ibp_expectation_check(a: CoefficientField, foc: FirstOrderCorrectors,
                          soc: SecondOrderCorrectors,
                          foc_adjoint: FirstOrderCorrectors = None):
    """Gaps |<a grad psi_ij . e_k> + <a grad psi_ij . grad phi*_k>| per (i,j,k).

    phi* are the correctors of the transposed coefficient (equal to phi
    when a is symmetric): testing the psi flux against the adjoint flux
    e_k + grad phi*_k makes the torus boundary term vanish exactly, so
    the gap is bounded by solver tolerances. Returns (gaps, scales) with
    scales_ij = ||a grad psi_ij||_{L2}.
    """
    grid = foc.grid
    d = grid.d
    if foc_adjoint is None:
        if a.symmetric:
            foc_adjoint = foc
        else:
            foc_adjoint = solve_first_order(a.transpose(), foc.spec)
    vol = grid.cell_volume
    grad_phi_star = np.empty((d, d) + grid.spatial_shape)
    for k in range(d):
        grad_phi_star[k] = gradient_array(grid, foc_adjoint.phi.values[k])
    gaps = np.empty((d, d, d))
    scales = np.empty((d, d))
    for i in range(d):
        for j in range(d):
            flux = matvec_array(a.a.values,
                                gradient_array(grid, soc.psi.values[i, j]))
            scales[i, j] = float(np.sqrt(dsum(flux * flux) * vol))
            for k in range(d):
                term1 = dsum(flux[k]) / grid.cell_count
                term2 = ddot(flux, grad_phi_star[k]) / grid.cell_count
                gaps[i, j, k] = abs(term1 + term2)
    return gaps, scales


# -- error report ------------------------------------------------------------------

def masked_l2(grid: TorusGrid, values: np.ndarray, mask: np.ndarray) -> float:
    return float(np.sqrt(dsum(np.where(mask, values, 0.0) ** 2)
                         * grid.cell_volume))


@dataclass
class ErrorReport:
    """Norms of Theorems 1-2 plus the per-seed energy consistency check."""

    l2_ball: float
    hm1_ball: float
    hm1_ball_plain: float
    h1_twoscale2: float
    l2_exp1_ball: float
    ball_center: np.ndarray
    ball_radius: float
    nonsymmetric: bool
    micro_stats: SolveStats
    energy_lhs: float = 0.0
    energy_bound: float = 0.0
    energy_ok: bool = True
    f_mean_removed: float = 0.0


def energy_rhs_field(a: CoefficientField, macro: MacroscopicSolution,
                     foc: FirstOrderCorrectors, soc: SecondOrderCorrectors,
                     potential: SkewRank4Field) -> VectorField:
    """G with -div(a grad(u - expansion2)) = div G up to solver terms:
    G = sum_ij (psi_ij a - Phat_ij) grad d_ij u_hom
      + eps sum_i (phi_i a - sigma_i) grad d_i u1_hom."""
    grid = macro.grid
    d = grid.d
    vec = np.zeros((d,) + grid.spatial_shape)
    for i in range(d):
        for j in range(d):
            row = macro.third_row(i, j)
            for k in range(d):
                acc = np.zeros(grid.spatial_shape)
                for l in range(d):
                    acc += a.a.values[k, l] * row[l]
                vec[k] += soc.psi.values[i, j] * acc
            vec -= _potential_times_grad(potential, i, j, row)
    eps = soc.eps_scale
    for i in range(d):
        m_cols = [_m_column(a, foc, i, j) for j in range(d)]
        row_u1 = macro.hessian_row_u1(i)
        for j in range(d):
            vec += eps * m_cols[j] * row_u1[j]
    return VectorField(grid, vec)


def error_report(a: CoefficientField, macro: MacroscopicSolution,
                 foc: FirstOrderCorrectors, soc: SecondOrderCorrectors,
                 ball_center=None, ball_radius: float = None,
                 spec: SolveSpec = None, ball_tol: float = 1e-8,
                 potential: SkewRank4Field = None,
                 u: ScalarField = None,
                 micro_stats: SolveStats = None) -> ErrorReport:
    """Solve the microscopic problem and measure every Theorem-1/2 norm.

    The H^-1(B) norm uses u - u_hom - eps u1_hom when a is nonsymmetric
    and u - u_hom otherwise. The energy consistency check compares
    ||grad(u - expansion2)||_{L2(torus)} against ||G||_{L2} / lambda with
    G from energy_rhs_field (the raw-flux potential). Pass ``u`` to reuse
    an existing microscopic solve.
    """
    grid = macro.grid
    if ball_center is None:
        ball_center = grid.center
    if ball_radius is None:
        ball_radius = grid.L / 4.0
    if spec is None:
        spec = default_spec_for(a)
    if u is None:
        u, micro_stats = krylov_solve_divform(a, macro.f, spec)
    elif micro_stats is None:
        micro_stats = SolveStats(iterations=0, rel_residual=0.0,
                                 wall_time=0.0, method=spec.method)
    mask = grid.ball_mask(ball_center, ball_radius)

    diff0 = u.values - macro.u_hom.values
    l2_ball = masked_l2(grid, diff0, mask)
    hm1_plain = hminus1_ball(ScalarField(grid, diff0), ball_center,
                             ball_radius, tol=ball_tol)
    if a.symmetric:
        hm1 = hm1_plain
    else:
        hm1_input = diff0 - soc.eps_scale * macro.u1_hom.values
        hm1 = hminus1_ball(ScalarField(grid, hm1_input), ball_center,
                           ball_radius, tol=ball_tol)

    v1 = assemble_expansion(1, macro, foc)
    l2_exp1 = masked_l2(grid, u.values - v1.field.values, mask)

    v2 = assemble_expansion(2, macro, foc, soc)
    grad_err = gradient_array(grid, u.values - v2.field.values)
    h1_ts2 = float(np.sqrt(dsum(grad_err * grad_err) * grid.cell_volume))

    if potential is None:
        potential = solve_potential(compute_flux_correction(a, foc, soc.psi))
    G = energy_rhs_field(a, macro, foc, soc, potential)
    bound = norm(G, "L2") / a.lam
    fnorm = float(np.sqrt(dsum(macro.f.values ** 2) * grid.cell_volume))
    slack = 10.0 * spec.rel_tol * fnorm / a.lam
    report = ErrorReport(
        l2_ball=l2_ball, hm1_ball=hm1, hm1_ball_plain=hm1_plain,
        h1_twoscale2=h1_ts2, l2_exp1_ball=l2_exp1,
        ball_center=np.asarray(ball_center, dtype=float),
        ball_radius=float(ball_radius),
        nonsymmetric=not a.symmetric,
        micro_stats=micro_stats,
        energy_lhs=h1_ts2, energy_bound=bound,
        energy_ok=bool(h1_ts2 <= bound + slack),
        f_mean_removed=macro.f_mean_removed)
    return report
