"""First- and second-order correctors, effective tensors, gauge potentials.

First order: the cell problems -div(a(e_i + grad phi_i)) = 0, the flux
q_i = a(e_i + grad phi_i), the effective matrix a_hom e_i = <q_i>, and the
skew potential sigma of the flux correction. Second order: psi_ij solving
-div(a grad psi_ij) = div((phi_i a - sigma_i) e_j), the symmetrized flux
q1 with the effective tensor a1, and the skew potential Psi of q1.

Expectation is realized as the torus average throughout; finite-volume
fluctuation across seeds is an output, not an error.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field as dc_field

import numpy as np

from .grid import (TorusGrid, ScalarField, VectorField, MatrixField,
                   Rank3Field, SymRank3Field, SkewRank3Field, SkewRank4Field,
                   skew_pairs, sym_triples, write_field, read_field)
from .grid.spectral import gradient_array, matvec_array
from .grid.norms import norm
from .ensemble import CoefficientField, ELLIPTICITY_TOL
from .cellsolve import (SolveSpec, SolveStats, DivergenceForm,
                        krylov_solve_divform, default_spec_for)
from .errors import ValidationError, NoConvergence
from .runtime import dsum, ddot, dsum_exact


def _remove_mean_exact(values: np.ndarray) -> np.ndarray:
    """Subtract the cell average until it is exactly zero.

    Uniform shifts alone cannot finish the job: once the residual mean
    drops below half an ulp of every entry, subtracting it is a no-op.
    So after a few uniform passes the leftover total is folded into the
    entry of least magnitude. Every entry is an integer multiple of the
    smallest entry's spacing, hence so is the total; once small it is
    exactly representable and the single-entry subtraction is exact,
    leaving a true sum of zero that the correctly rounded reduction
    reports as literal 0.0.
    """
    out = np.array(values, dtype=float, copy=True)
    flat = out.reshape(-1)
    if flat.size == 0:
        return out
    for _ in range(4):
        mean = dsum_exact(flat) / flat.size
        if mean == 0.0:
            return out
        flat -= mean
    for _ in range(60):
        total = dsum_exact(flat)
        if total == 0.0:
            return out
        nonzero = np.flatnonzero(flat)
        if nonzero.size == 0:
            flat[0] = -total
            continue
        target = nonzero[np.argmin(np.abs(flat[nonzero]))]
        flat[target] -= total
    raise ValidationError("mean removal did not reach exact zero")


# -- first order ---------------------------------------------------------------

@dataclass
class FirstOrderCorrectors:
    """phi, flux, effective matrix, and the sigma potential.

    ``phi.component(i)`` is phi_i; ``q.values[i, k]`` is the k-th component
    of the flux q_i; ``a_hom[:, i]`` is the exact torus average of q_i;
    ``sigma.component(i, j, k)`` is sigma_ijk (skew in (j, k)).
    """

    phi: VectorField
    q: MatrixField
    a_hom: np.ndarray
    sigma: SkewRank3Field
    spec: SolveSpec
    stats: list = dc_field(default_factory=list)

    @property
    def grid(self) -> TorusGrid:
        return self.phi.grid

    def flux_correction(self, i: int) -> np.ndarray:
        """q_i - a_hom e_i as a (d, spatial) array, mean-zero per component."""
        d = self.grid.d
        out = np.empty((d,) + self.grid.spatial_shape)
        for k in range(d):
            out[k] = self.q.values[i, k] - self.a_hom[k, i]
        return out


def solve_first_order(a: CoefficientField, spec: SolveSpec = None) -> FirstOrderCorrectors:
    """Solve the d cell problems and build flux, a_hom, and sigma.

    sigma_ijk is the mean-zero solution of the Poisson gauge
    -Laplace(sigma_ijk) = d_j qt_ik - d_k qt_ij with qt the flux
    correction; exact FFT inversion, zero mode set to 0.
    """
    grid = a.grid
    d = grid.d
    if spec is None:
        spec = default_spec_for(a)

    phi_values = np.empty((d,) + grid.spatial_shape)
    q_values = np.empty((d, d) + grid.spatial_shape)
    a_hom = np.empty((d, d))
    stats = []
    for i in range(d):
        g = VectorField(grid, a.a.values[:, i].copy())
        try:
            phi_i, st = krylov_solve_divform(a, DivergenceForm(g), spec)
        except NoConvergence as exc:
            raise NoConvergence(f"phi_{i}: {exc}", stats=exc.stats) from exc
        stats.append(st)
        phi_values[i] = phi_i.values
        flux = matvec_array(a.a.values, gradient_array(grid, phi_i.values))
        for k in range(d):
            q_values[i, k] = flux[k] + a.a.values[k, i]
            a_hom[k, i] = float(np.mean(q_values[i, k]))

    sym_eigs = np.linalg.eigvalsh(0.5 * (a_hom + a_hom.T))
    if sym_eigs[0] < a.lam - ELLIPTICITY_TOL:
        raise ValidationError(
            f"a_hom lost ellipticity: min symmetric eigenvalue "
            f"{sym_eigs[0]:.6g} < lambda = {a.lam}")
    op_norm = float(np.linalg.norm(a_hom, 2))
    if op_norm > d + ELLIPTICITY_TOL:
        raise ValidationError(f"a_hom operator norm {op_norm:.6g} exceeds d = {d}")

    pairs = skew_pairs(d)
    qt_spec = np.empty((d, d) + grid.spectral_shape, dtype=complex)
    for i in range(d):
        for k in range(d):
            qt_spec[i, k] = grid.rfftn(q_values[i, k] - a_hom[k, i])
    sigma_values = np.zeros((d, len(pairs)) + grid.spatial_shape)
    live = grid.lap_symbol > 0.0
    for i in range(d):
        for p, (j, k) in enumerate(pairs):
            rhs = (1j * grid.k_deriv(j) * qt_spec[i, k]
                   - 1j * grid.k_deriv(k) * qt_spec[i, j])
            sol = np.zeros_like(rhs)
            np.divide(rhs, grid.lap_symbol, out=sol, where=live)
            sigma_values[i, p] = grid.irfftn(sol)

    return FirstOrderCorrectors(
        phi=VectorField(grid, phi_values, mean_zero=True),
        q=MatrixField(grid, q_values),
        a_hom=a_hom,
        sigma=SkewRank3Field(grid, sigma_values, mean_zero=True),
        spec=spec, stats=stats)


def check_sigma_divergence(a: CoefficientField,
                           foc: FirstOrderCorrectors) -> tuple:
    """Residuals of div(sigma_ij.) = q_ij - a_hom_ij, split by reachability.

    Returns ``(gaps, kernel)``, both (d, d) arrays of L2 norms. The flux
    correction is split along the joint kernel of the derivative symbols
    (modes whose components are all zero or Nyquist, which every spectral
    derivative annihilates): no divergence can reproduce that part, so it
    is reported separately in ``kernel`` as a resolution figure for the
    coefficient. ``gaps[i, j]`` is the defect against the reachable part;
    with spectral operators derivatives commute exactly, so it is
    controlled by the phi solve tolerance alone.
    """
    grid = foc.grid
    if a.grid != grid:
        raise ValidationError("coefficient and correctors live on different grids")
    d = grid.d
    mask = np.ones(grid.spectral_shape, dtype=bool)
    for ax in range(d):
        mask &= grid.k_deriv(ax) == 0.0
    gaps = np.empty((d, d))
    kernel = np.empty((d, d))
    vol = grid.cell_volume
    for i in range(d):
        qt = foc.flux_correction(i)
        for j in range(d):
            spec_q = grid.rfftn(qt[j])
            qker = grid.irfftn(np.where(mask, spec_q, 0.0))
            kernel[i, j] = float(np.sqrt(dsum(qker * qker) * vol))
            divergence = np.zeros(grid.spectral_shape, dtype=complex)
            for k in range(d):
                comp = foc.sigma.component(i, j, k)
                if k != j:
                    divergence += 1j * grid.k_deriv(k) * grid.rfftn(comp)
            res = grid.irfftn(divergence) - (qt[j] - qker)
            gaps[i, j] = float(np.sqrt(dsum(res * res) * vol))
    return gaps, kernel


# -- second order --------------------------------------------------------------

def _m_column(a: CoefficientField, foc: FirstOrderCorrectors,
              i: int, j: int) -> np.ndarray:
    """Column j of M_i = phi_i a - sigma_i, i.e. (phi_i a_kj - sigma_ikj)_k."""
    grid = foc.grid
    d = grid.d
    phi_i = foc.phi.values[i]
    col = np.empty((d,) + grid.spatial_shape)
    for k in range(d):
        col[k] = phi_i * a.a.values[k, j] - foc.sigma.component(i, k, j)
    return col


def solve_psi(a: CoefficientField, foc: FirstOrderCorrectors,
              spec: SolveSpec = None):
    """Solve -div(a grad psi_ij) = div((phi_i a - sigma_i) e_j) for all (i, j).

    Returns (psi, stats): psi is a MatrixField whose (i, j) entry is the
    mean-zero scalar psi_ij; stats is the row-major list of SolveStats.
    """
    grid = foc.grid
    if a.grid != grid:
        raise ValidationError("coefficient and correctors live on different grids")
    d = grid.d
    if spec is None:
        spec = default_spec_for(a)
    psi_values = np.empty((d, d) + grid.spatial_shape)
    stats = []
    for i in range(d):
        for j in range(d):
            g = VectorField(grid, _m_column(a, foc, i, j))
            try:
                sol, st = krylov_solve_divform(a, DivergenceForm(g), spec)
            except NoConvergence as exc:
                raise NoConvergence(f"psi_{i}{j}: {exc}", stats=exc.stats) from exc
            psi_values[i, j] = sol.values
            stats.append(st)
    return MatrixField(grid, psi_values, mean_zero=True), stats


def _flux_terms(a: CoefficientField, foc: FirstOrderCorrectors,
                psi: MatrixField, i: int, j: int) -> np.ndarray:
    """F_ij. = a grad psi_ij + (phi_i a - sigma_i) e_j, a (d, spatial) array."""
    grid = foc.grid
    grad = gradient_array(grid, psi.values[i, j])
    return matvec_array(a.a.values, grad) + _m_column(a, foc, i, j)


def compute_q1_a1(a: CoefficientField, foc: FirstOrderCorrectors,
                  psi: MatrixField, eps_scale: float):
    """Symmetrized second-order flux q1 and effective tensor a1.

    a1_ijk = (1/eps) sym_ijk <F_ijk> with F_ijk = (a grad psi_ij)_k +
    (phi_i a - sigma_i)_kj; q1 = sym F - eps a1, made mean-free exactly.
    eps_scale is the ensemble correlation length (the period for
    deterministic fields). a1 is returned as a dense (d, d, d) array whose
    permutation slots hold identical floats.
    """
    grid = foc.grid
    d = grid.d
    if not eps_scale > 0:
        raise ValidationError(f"eps_scale must be > 0, got {eps_scale}")
    triples = sym_triples(d)
    slot = {t: s for s, t in enumerate(triples)}
    acc = np.zeros((len(triples),) + grid.spatial_shape)
    counts = np.zeros(len(triples), dtype=int)
    for i in range(d):
        for j in range(d):
            F_ij = _flux_terms(a, foc, psi, i, j)
            for k in range(d):
                s = slot[tuple(sorted((i, j, k)))]
                acc[s] += F_ij[k]
                counts[s] += 1
    a1 = np.empty((d, d, d))
    q1_values = np.empty_like(acc)
    for s, (i, j, k) in enumerate(triples):
        sym_f = acc[s] / counts[s]
        mean = float(np.mean(sym_f))
        q1_values[s] = _remove_mean_exact(sym_f)
        value = mean / eps_scale
        for p in {(i, j, k), (i, k, j), (j, i, k), (j, k, i),
                  (k, i, j), (k, j, i)}:
            a1[p] = value
    q1 = SymRank3Field(grid, q1_values, mean_zero=True)
    return q1, a1


def symmetrize_tensor3(t: np.ndarray) -> np.ndarray:
    """Average over index permutations; bit-exact no-op on symmetric input."""
    d = t.shape[0]
    out = np.empty_like(t)
    for i in range(d):
        for j in range(i, d):
            for k in range(j, d):
                perms = {(i, j, k), (i, k, j), (j, i, k), (j, k, i),
                         (k, i, j), (k, j, i)}
                vals = [t[p] for p in perms]
                if all(v == vals[0] for v in vals[1:]):
                    value = vals[0]
                else:
                    value = float(np.mean(vals))
                for p in perms:
                    out[p] = value
    return out


def compute_flux_correction(a: CoefficientField, foc: FirstOrderCorrectors,
                            psi: MatrixField) -> Rank3Field:
    """Unsymmetrized mean-free flux Q_ijk = F_ijk - <F_ijk>.

    By the psi equation each vector Q_ij. is divergence-free to the solve
    tolerance, so its Poisson gauge potential reproduces it exactly; the
    symmetrized q1 admits no such exact potential in general (see
    potential_divergence_gap).
    """
    grid = foc.grid
    d = grid.d
    values = np.empty((d, d, d) + grid.spatial_shape)
    for i in range(d):
        for j in range(d):
            F_ij = _flux_terms(a, foc, psi, i, j)
            for k in range(d):
                values[i, j, k] = _remove_mean_exact(F_ij[k])
    return Rank3Field(grid, values, mean_zero=True)


def solve_potential(flux) -> SkewRank4Field:
    """Skew(3,4) Poisson gauge potential of a mean-zero rank-3 field:
    -Laplace(P_ijkl) = d_k flux_ijl - d_l flux_ijk, zero mode set to 0."""
    grid = flux.grid
    d = grid.d
    pairs = skew_pairs(d)
    live = grid.lap_symbol > 0.0
    values = np.zeros((d, d, len(pairs)) + grid.spatial_shape)
    for i in range(d):
        for j in range(d):
            comp = [grid.rfftn(flux.component(i, j, k)) for k in range(d)]
            for p, (k, l) in enumerate(pairs):
                rhs = (1j * grid.k_deriv(k) * comp[l]
                       - 1j * grid.k_deriv(l) * comp[k])
                sol = np.zeros_like(rhs)
                np.divide(rhs, grid.lap_symbol, out=sol, where=live)
                values[i, j, p] = grid.irfftn(sol)
    return SkewRank4Field(grid, values, mean_zero=True)


def solve_Psi(q1: SymRank3Field) -> SkewRank4Field:
    """Gauge potential of the symmetrized flux q1 (the shipped Psi)."""
    if not isinstance(q1, SymRank3Field):
        raise ValidationError("solve_Psi expects the symmetrized flux q1")
    q1.check_mean_zero()
    return solve_potential(q1)


def potential_divergence_gap(potential: SkewRank4Field, flux) -> float:
    """Max over (i,j,k) of ||sum_l d_l P_ijkl - flux_ijk||_L2 / ||flux||_L2.

    Measures whether the gauge potential satisfies the pointwise equation
    div(P_ijk.) = flux_ijk. For the potential of the unsymmetrized flux
    correction this gap sits at the solver tolerance; for the potential of
    the symmetrized q1 it is O(1) in general. Reported, never asserted.
    """
    grid = potential.grid
    d = grid.d
    flux_norm = norm(flux, "L2")
    if flux_norm == 0.0:
        return 0.0
    vol = grid.cell_volume
    worst = 0.0
    for i in range(d):
        for j in range(d):
            for k in range(d):
                acc = np.zeros(grid.spectral_shape, dtype=complex)
                for l in range(d):
                    if l == k:
                        continue
                    acc += 1j * grid.k_deriv(l) * grid.rfftn(
                        potential.component(i, j, k, l))
                res = grid.irfftn(acc) - flux.component(i, j, k)
                worst = max(worst, float(np.sqrt(dsum(res * res) * vol)))
    return worst / flux_norm


def gauge_residual(potential: SkewRank4Field, flux) -> float:
    """Max L2 residual of -Laplace(P_ijkl) = d_k flux_ijl - d_l flux_ijk,
    relative to ||flux||_L2. Exact FFT inversion keeps this at roundoff."""
    grid = potential.grid
    d = grid.d
    flux_norm = norm(flux, "L2")
    if flux_norm == 0.0:
        return 0.0
    vol = grid.cell_volume
    worst = 0.0
    for i in range(d):
        for j in range(d):
            comp = [grid.rfftn(flux.component(i, j, k)) for k in range(d)]
            for p, (k, l) in enumerate(skew_pairs(d)):
                lhs = grid.irfftn(grid.lap_symbol * grid.rfftn(
                    potential.values[i, j, p]))
                rhs = grid.irfftn(1j * grid.k_deriv(k) * comp[l]
                                  - 1j * grid.k_deriv(l) * comp[k])
                res = lhs - rhs
                worst = max(worst, float(np.sqrt(dsum(res * res) * vol)))
    return worst / flux_norm


@dataclass
class SecondOrderCorrectors:
    """psi, the symmetrized flux and tensor, and the shipped gauge potential.

    ``Psi`` may be None when a memory-constrained run skips materializing
    it; stream_potential_contraction covers that case.
    """

    psi: MatrixField
    q1: SymRank3Field
    a1: np.ndarray
    Psi: SkewRank4Field
    eps_scale: float
    spec: SolveSpec
    stats: list = dc_field(default_factory=list)

    @property
    def grid(self) -> TorusGrid:
        return self.psi.grid


def solve_second_order(a: CoefficientField, foc: FirstOrderCorrectors,
                       eps_scale: float, spec: SolveSpec = None,
                       with_Psi: bool = True) -> SecondOrderCorrectors:
    """psi solves, then (q1, a1), then optionally the Psi potential."""
    psi, stats = solve_psi(a, foc, spec)
    q1, a1 = compute_q1_a1(a, foc, psi, eps_scale)
    Psi = solve_Psi(q1) if with_Psi else None
    return SecondOrderCorrectors(psi=psi, q1=q1, a1=a1, Psi=Psi,
                                 eps_scale=eps_scale,
                                 spec=spec or default_spec_for(a),
                                 stats=stats)


def stream_potential_contraction(flux, weights: MatrixField) -> VectorField:
    """T_k = sum_{i,j,l} P_ijkl d_l w_ij without materializing P.

    ``flux`` is the mean-zero rank-3 source of the potential (P solved
    pairwise on the fly); ``weights`` holds the scalars w_ij. Memory use
    is O(d) scalar fields beyond the inputs.
    """
    grid = flux.grid
    d = grid.d
    live = grid.lap_symbol > 0.0
    out = np.zeros((d,) + grid.spatial_shape)
    for i in range(d):
        for j in range(d):
            comp = [grid.rfftn(flux.component(i, j, k)) for k in range(d)]
            w_spec = grid.rfftn(weights.values[i, j])
            grad_w = [grid.irfftn(1j * grid.k_deriv(l) * w_spec)
                      for l in range(d)]
            for p, (k, l) in enumerate(skew_pairs(d)):
                rhs = (1j * grid.k_deriv(k) * comp[l]
                       - 1j * grid.k_deriv(l) * comp[k])
                sol = np.zeros_like(rhs)
                np.divide(rhs, grid.lap_symbol, out=sol, where=live)
                P_ijkl = grid.irfftn(sol)
                out[k] += P_ijkl * grad_w[l]
                out[l] -= P_ijkl * grad_w[k]
    return VectorField(grid, out)


# -- r_star diagnostic -----------------------------------------------------------

@dataclass
class RStarDiagnostic:
    """Smallest dyadic radius above which (phi, sigma) oscillation is small.

    ``r_star`` is 2^m h for some m, or the cap L/2 with ``capped`` set when
    even the largest radius fails the threshold.
    """

    delta: float
    r_star: float
    capped: bool
    radii: np.ndarray
    oscillations: np.ndarray


def estimate_rstar(foc: FirstOrderCorrectors, delta: float = 1.0 / 16.0) -> RStarDiagnostic:
    """Scan dyadic balls centered at the origin.

    For each radius R = 2^m h up to L/2 the statistic is
    (1/R^2) * mean over the ball of |(phi, sigma) - ball average|^2,
    summed over all nominal components. r_star is the smallest radius
    from which every larger dyadic radius passes (statistic <= delta).
    """
    if not delta > 0:
        raise ValidationError(f"delta must be > 0, got {delta}")
    grid = foc.grid
    dist2 = grid.distance2(np.zeros(grid.d))
    radii = []
    r = grid.h
    while r <= grid.L / 2.0 + 1e-12 * grid.L:
        radii.append(r)
        r *= 2.0
    comps = []
    mults = []
    for i in range(grid.d):
        comps.append(foc.phi.values[i])
        mults.append(1.0)
    for i in range(grid.d):
        for p in range(len(skew_pairs(grid.d))):
            comps.append(foc.sigma.values[i, p])
            mults.append(2.0)
    osc = np.empty(len(radii))
    for ridx, R in enumerate(radii):
        mask = dist2 <= R * R
        count = int(np.count_nonzero(mask))
        total = 0.0
        for mult, comp in zip(mults, comps):
            vals = comp[mask]
            mean = dsum(vals) / count
            dev = vals - mean
            total += mult * dsum(dev * dev) / count
        osc[ridx] = total / (R * R)
    passing = osc <= delta
    r_star = radii[-1]
    capped = True
    for ridx in range(len(radii) - 1, -1, -1):
        if passing[ridx]:
            r_star = radii[ridx]
            capped = False
        else:
            break
    return RStarDiagnostic(delta=delta, r_star=float(r_star), capped=capped,
                           radii=np.array(radii), oscillations=osc)


# -- Equationpsi weak residual -----------------------------------------------

def equationpsi_residuals(a: CoefficientField, foc: FirstOrderCorrectors,
                          psi: MatrixField, count: int = 10,
                          seed: int = 0) -> np.ndarray:
    """|<r, v>| / (||b|| ||v||) for random band-limited test fields v.

    r = b + div(a grad psi_ij) is the strong residual of Equationpsi and
    b = div((phi_i a - sigma_i) e_j) its right-hand side; Cauchy-Schwarz
    plus the solver contract bounds every entry by the solve rel_tol.
    Returns an array of shape (d, d, count).
    """
    grid = foc.grid
    d = grid.d
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    cut = max(2, grid.n // 4)
    tests = []
    for _ in range(count):
        white = rng.standard_normal(grid.spatial_shape)
        spec = grid.rfftn(white)
        keep = grid.k2_full <= (2.0 * np.pi / grid.L * cut) ** 2
        v = grid.irfftn(np.where(keep, spec, 0.0))
        tests.append(v - v.mean())
    vol = grid.cell_volume
    out = np.empty((d, d, count))
    for i in range(d):
        for j in range(d):
            g = _m_column(a, foc, i, j)
            b_spec = np.zeros(grid.spectral_shape, dtype=complex)
            for k in range(d):
                b_spec += 1j * grid.k_deriv(k) * grid.rfftn(g[k])
            b = grid.irfftn(b_spec)
            flux = matvec_array(a.a.values,
                                gradient_array(grid, psi.values[i, j]))
            lhs_spec = np.zeros(grid.spectral_shape, dtype=complex)
            for k in range(d):
                lhs_spec += 1j * grid.k_deriv(k) * grid.rfftn(flux[k])
            r = b + grid.irfftn(lhs_spec)
            bnorm = float(np.sqrt(dsum(b * b) * vol))
            for t, v in enumerate(tests):
                vnorm = float(np.sqrt(dsum(v * v) * vol))
                inner = abs(ddot(r, v) * vol)
                out[i, j, t] = inner / (bnorm * vnorm) if bnorm * vnorm else 0.0
    return out


# -- persistence ----------------------------------------------------------------

def dump_correctors(dirpath, foc: FirstOrderCorrectors,
                    soc: SecondOrderCorrectors = None) -> str:
    """Write the corrector bundle as HGF1 files plus a JSON manifest."""
    os.makedirs(dirpath, exist_ok=True)
    files = {}
    write_field(os.path.join(dirpath, "phi.hgf1"), foc.phi)
    files["phi"] = "phi.hgf1"
    write_field(os.path.join(dirpath, "q.hgf1"), foc.q)
    files["q"] = "q.hgf1"
    write_field(os.path.join(dirpath, "sigma.hgf1"), foc.sigma)
    files["sigma"] = "sigma.hgf1"
    manifest = {
        "grid": {"d": foc.grid.d, "n": foc.grid.n, "L": foc.grid.L},
        "a_hom": foc.a_hom.tolist(),
        "rel_tol": foc.spec.rel_tol,
        "method": foc.spec.method,
        "stats": [{"iterations": s.iterations,
                   "rel_residual": s.rel_residual,
                   "wall_time": s.wall_time} for s in foc.stats],
        "files": files,
        "index_convention": {
            "phi": "component i is phi_i",
            "q": "values[i, k] is the k-th component of the flux q_i",
            "sigma": "sigma_ijk, antisymmetric pair (j, k), j < k stored",
        },
    }
    if soc is not None:
        write_field(os.path.join(dirpath, "psi.hgf1"), soc.psi)
        files["psi"] = "psi.hgf1"
        write_field(os.path.join(dirpath, "q1.hgf1"), soc.q1)
        files["q1"] = "q1.hgf1"
        if soc.Psi is not None:
            write_field(os.path.join(dirpath, "Psi.hgf1"), soc.Psi)
            files["Psi"] = "Psi.hgf1"
        manifest["a1"] = soc.a1.tolist()
        manifest["eps_scale"] = soc.eps_scale
        manifest["index_convention"]["psi"] = "values[i, j] is psi_ij"
        manifest["index_convention"]["q1"] = \
            "totally symmetric, sorted triples stored"
        manifest["index_convention"]["Psi"] = \
            "Psi_ijkl, antisymmetric pair (k, l), k < l stored"
    path = os.path.join(dirpath, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return path


def load_correctors(dirpath):
    """Read a bundle written by dump_correctors; returns (foc, soc or None)."""
    with open(os.path.join(dirpath, "manifest.json")) as fh:
        manifest = json.load(fh)
    g = manifest["grid"]
    grid = TorusGrid(g["d"], g["n"], g["L"])
    def rd(name):
        return read_field(os.path.join(dirpath, manifest["files"][name]), grid)
    phi = rd("phi")
    phi.mean_zero = True
    sigma = rd("sigma")
    sigma.mean_zero = True
    spec = SolveSpec(rel_tol=manifest["rel_tol"], method=manifest["method"])
    stats = [SolveStats(iterations=s["iterations"],
                        rel_residual=s["rel_residual"],
                        wall_time=s["wall_time"],
                        method=manifest["method"])
             for s in manifest["stats"]]
    foc = FirstOrderCorrectors(
        phi=phi, q=rd("q"), a_hom=np.array(manifest["a_hom"]),
        sigma=sigma, spec=spec, stats=stats)
    soc = None
    if "psi" in manifest["files"]:
        psi = rd("psi")
        psi.mean_zero = True
        q1 = rd("q1")
        q1.mean_zero = True
        Psi = None
        if "Psi" in manifest["files"]:
            Psi = rd("Psi")
            Psi.mean_zero = True
        soc = SecondOrderCorrectors(
            psi=psi, q1=q1, a1=np.array(manifest["a1"]), Psi=Psi,
            eps_scale=manifest["eps_scale"], spec=spec, stats=[])
    return foc, soc
