"""Linear solvers for the cell problems.

Three layers: exact FFT inversion of constant-coefficient divergence-form
operators, FFT-preconditioned Krylov iteration (CG or BiCGStab) for
variable coefficients, and a masked finite-difference CG backing the
Dirichlet-ball norm. All reductions use pairwise summation (np.sum), so
results are reproducible across FFT worker counts.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .grid import TorusGrid, ScalarField, VectorField
from .grid.spectral import matvec_array
from .ensemble import CoefficientField
from .errors import ValidationError, MaskEmpty, NoConvergence
from .runtime import dsum, ddot

METHODS = ("cg", "bicgstab")


@dataclass(frozen=True)
class SolveSpec:
    """Krylov solve settings.

    ``precond`` is the constant reference matrix A0; None means the torus
    average of the symmetric part of the coefficient.
    """

    rel_tol: float = 1e-9
    max_iter: int = 1000
    method: str = "cg"
    precond: object = None

    def __post_init__(self):
        if not 0.0 < self.rel_tol <= 1e-3:
            raise ValidationError(
                f"rel_tol must lie in (0, 1e-3], got {self.rel_tol}")
        if self.max_iter < 1:
            raise ValidationError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.method not in METHODS:
            raise ValidationError(
                f"method must be one of {METHODS}, got {self.method!r}")
        if self.precond is not None:
            A0 = np.asarray(self.precond, dtype=float)
            if A0.ndim != 2 or A0.shape[0] != A0.shape[1]:
                raise ValidationError("precond must be a square matrix")
            if np.linalg.eigvalsh(0.5 * (A0 + A0.T))[0] <= 0.0:
                raise ValidationError("precond matrix must be elliptic")


def default_spec_for(a: CoefficientField, rel_tol: float = 1e-9,
                     max_iter: int = 1000) -> SolveSpec:
    """CG for symmetric coefficients, BiCGStab otherwise."""
    return SolveSpec(rel_tol=rel_tol, max_iter=max_iter,
                     method="cg" if a.symmetric else "bicgstab")


@dataclass
class SolveStats:
    iterations: int
    rel_residual: float
    wall_time: float
    method: str = "cg"
    restarts: int = 0


@dataclass(frozen=True)
class DivergenceForm:
    """Right-hand side given as the functional div(g); exactly mean-free."""

    g: VectorField


# -- constant-coefficient FFT solve ------------------------------------------

def _const_symbol(grid: TorusGrid, A: np.ndarray) -> np.ndarray:
    symbol = np.zeros(grid.spectral_shape)
    for i in range(grid.d):
        ki = grid.k_deriv(i)
        for j in range(grid.d):
            symbol = symbol + A[i, j] * ki * grid.k_deriv(j)
    return symbol


def _project_solvable(grid: TorusGrid, values: np.ndarray):
    """Remove the kernel modes of the derivative symbols (the constant
    mode and pure Nyquist modes). Returns (projected, mean, nyquist L2)."""
    spec = grid.rfftn(values)
    dead = grid.lap_symbol == 0.0
    mean = float(spec.reshape(-1)[0].real) / grid.cell_count
    killed = np.where(dead, spec, 0.0)
    killed_mass = np.sqrt(
        np.sum(grid.parseval_mult * (killed.real ** 2 + killed.imag ** 2))
        * grid.cell_volume / grid.cell_count)
    spec = np.where(dead, 0.0, spec)
    return grid.irfftn(spec), mean, float(killed_mass)


def fft_const_solve(A, rhs, grid: TorusGrid = None) -> ScalarField:
    """Solve -div(A grad u) = rhs for constant elliptic A, exactly per mode.

    ``rhs`` is a ScalarField (projected onto the solvable modes; the
    removed cell average is recorded on the result as ``mean_removed``
    and the removed Nyquist L2 mass as ``nyquist_mass_removed``) or a
    DivergenceForm (mean-free by construction). The solution is mean-zero.
    """
    if isinstance(rhs, DivergenceForm):
        grid = rhs.g.grid
        acc = np.zeros(grid.spectral_shape, dtype=complex)
        for axis in range(grid.d):
            acc += 1j * grid.k_deriv(axis) * grid.rfftn(rhs.g.values[axis])
        spec = acc
        mean_removed = 0.0
        nyquist_removed = 0.0
    else:
        field = rhs
        grid = field.grid
        projected, mean_removed, nyquist_removed = _project_solvable(
            grid, field.values)
        spec = grid.rfftn(projected)
    A = np.asarray(A, dtype=float)
    if A.shape != (grid.d, grid.d):
        raise ValidationError(f"A must be {grid.d}x{grid.d}, got {A.shape}")
    min_eig = float(np.linalg.eigvalsh(0.5 * (A + A.T)).min())
    if min_eig <= 0.0:
        raise ValidationError(
            f"A must be elliptic; min symmetric-part eigenvalue is {min_eig}")
    symbol = _const_symbol(grid, A)
    live = symbol > 0.0
    out = np.zeros_like(spec)
    np.divide(spec, symbol, out=out, where=live)
    result = ScalarField(grid, grid.irfftn(out), mean_zero=True)
    result.mean_removed = mean_removed
    result.nyquist_mass_removed = nyquist_removed
    return result


# -- variable-coefficient Krylov ---------------------------------------------

def _divform_apply(grid: TorusGrid, a_values: np.ndarray,
                   u: np.ndarray) -> np.ndarray:
    """-div(a grad u) via spectral derivatives and pointwise products."""
    spec = grid.rfftn(u)
    grad = np.empty((grid.d,) + grid.spatial_shape)
    for axis in range(grid.d):
        grad[axis] = grid.irfftn(1j * grid.k_deriv(axis) * spec)
    flux = matvec_array(a_values, grad)
    acc = np.zeros(grid.spectral_shape, dtype=complex)
    for axis in range(grid.d):
        acc += 1j * grid.k_deriv(axis) * grid.rfftn(flux[axis])
    return -grid.irfftn(acc)


def _true_rel_residual(grid, a_values, x, b, bnorm) -> float:
    r = b - _divform_apply(grid, a_values, x)
    return float(np.sqrt(dsum(r * r))) / bnorm


def krylov_solve_divform(a: CoefficientField, rhs, spec: SolveSpec = None):
    """Solve -div(a grad u) = rhs on the torus, mean-zero u.

    Preconditioned by the exact FFT inverse of the constant reference
    operator. Stops when the L2 residual drops below rel_tol times the
    L2 norm of the right-hand side; the true residual is re-verified on
    exit and the iteration restarted (fresh residual) if recursion drift
    ate the margin. Returns (solution, SolveStats).

    Raises NoConvergence (carrying the stats so far) at the iteration cap.
    """
    grid = a.grid
    if spec is None:
        spec = default_spec_for(a)
    if spec.method == "cg" and not a.symmetric:
        raise ValidationError("cg requires a symmetric coefficient; "
                              "use method='bicgstab'")
    if isinstance(rhs, DivergenceForm):
        acc = np.zeros(grid.spectral_shape, dtype=complex)
        for axis in range(grid.d):
            acc += 1j * grid.k_deriv(axis) * grid.rfftn(rhs.g.values[axis])
        b = grid.irfftn(acc)
        mean_removed = 0.0
        nyquist_removed = 0.0
    else:
        b, mean_removed, nyquist_removed = _project_solvable(grid, rhs.values)

    if spec.precond is not None:
        A0 = np.asarray(spec.precond, dtype=float)
    else:
        sym = 0.5 * (a.a.values + np.swapaxes(a.a.values, 0, 1))
        A0 = sym.mean(axis=tuple(range(2, 2 + grid.d)))
    symbol = _const_symbol(grid, A0)
    if np.linalg.eigvalsh(0.5 * (A0 + A0.T))[0] <= 0.0:
        raise ValidationError("preconditioner matrix must be elliptic")
    live = symbol > 0.0

    def minv(r: np.ndarray) -> np.ndarray:
        s = grid.rfftn(r)
        out = np.zeros_like(s)
        np.divide(s, symbol, out=out, where=live)
        return grid.irfftn(out)

    def apply(u: np.ndarray) -> np.ndarray:
        return _divform_apply(grid, a.a.values, u)

    t0 = time.perf_counter()
    bnorm = float(np.sqrt(dsum(b * b)))
    stats = SolveStats(iterations=0, rel_residual=0.0, wall_time=0.0,
                       method=spec.method)
    if bnorm == 0.0:
        stats.wall_time = time.perf_counter() - t0
        out = ScalarField(grid, np.zeros(grid.spatial_shape), mean_zero=True)
        out.mean_removed = mean_removed
        out.nyquist_mass_removed = nyquist_removed
        return out, stats

    x = np.zeros(grid.spatial_shape)
    target = spec.rel_tol * bnorm
    iters = 0
    restarts = 0
    while True:
        if spec.method == "cg":
            x, iters, converged = _pcg(apply, minv, b, x, target,
                                       spec.max_iter, iters)
        else:
            x, iters, converged = _bicgstab(apply, minv, b, x, target,
                                            spec.max_iter, iters)
        true_rel = _true_rel_residual(grid, a.a.values, x, b, bnorm)
        stats.iterations = iters
        stats.rel_residual = true_rel
        stats.restarts = restarts
        stats.wall_time = time.perf_counter() - t0
        if converged and true_rel <= spec.rel_tol:
            break
        if iters >= spec.max_iter:
            raise NoConvergence(
                f"{spec.method} reached {iters} iterations with relative "
                f"residual {true_rel:.3e} > {spec.rel_tol:.3e}", stats=stats)
        restarts += 1

    x = x - dsum(x) / x.size
    out = ScalarField(grid, x, mean_zero=True)
    out.mean_removed = mean_removed
    out.nyquist_mass_removed = nyquist_removed
    return out, stats


def _pcg(apply, minv, b, x, target, max_iter, iters):
    r = b - apply(x)
    rnorm = float(np.sqrt(dsum(r * r)))
    if rnorm <= target:
        return x, iters, True
    z = minv(r)
    p = z.copy()
    rz = ddot(r, z)
    while iters < max_iter:
        Ap = apply(p)
        pAp = ddot(p, Ap)
        if pAp <= 0.0:
            return x, iters, False
        alpha = rz / pAp
        x = x + alpha * p
        r = r - alpha * Ap
        iters += 1
        if float(np.sqrt(dsum(r * r))) <= target:
            return x, iters, True
        z = minv(r)
        rz_new = ddot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, iters, False


def _bicgstab(apply, minv, b, x, target, max_iter, iters):
    r = b - apply(x)
    if float(np.sqrt(dsum(r * r))) <= target:
        return x, iters, True
    rhat = r.copy()
    rho = 1.0
    alpha = 1.0
    omega = 1.0
    v = np.zeros_like(b)
    p = np.zeros_like(b)
    while iters < max_iter:
        rho_new = ddot(rhat, r)
        if rho_new == 0.0:
            return x, iters, False
        beta = (rho_new / rho) * (alpha / omega)
        p = r + beta * (p - omega * v)
        phat = minv(p)
        v = apply(phat)
        denom = ddot(rhat, v)
        if denom == 0.0:
            return x, iters, False
        alpha = rho_new / denom
        s = r - alpha * v
        iters += 1
        if float(np.sqrt(dsum(s * s))) <= target:
            return x + alpha * phat, iters, True
        shat = minv(s)
        t = apply(shat)
        tt = ddot(t, t)
        if tt == 0.0:
            return x, iters, False
        omega = ddot(t, s) / tt
        x = x + alpha * phat + omega * shat
        r = s - omega * t
        rho = rho_new
        if float(np.sqrt(dsum(r * r))) <= target:
            return x, iters, True
        if omega == 0.0:
            return x, iters, False
    return x, iters, False


# -- masked Dirichlet CG ------------------------------------------------------

def _crop_geometry(grid: TorusGrid, mask: np.ndarray):
    """Integer rolls making the mask contiguous, plus the padded bounding box.

    Returns (shifts, slices, padded_shape, offsets): rolling by ``shifts``
    puts an all-false plane at the end of each axis where possible, so the
    bounding box never wraps and a one-cell zero border (offset 1) captures
    every neighbor. An axis the mask spans completely keeps its periodic
    coupling instead: no border, offset 0.
    """
    shifts = []
    slices = []
    padded = []
    offsets = []
    for axis in range(grid.d):
        other = tuple(i for i in range(grid.d) if i != axis)
        line = mask.any(axis=other)
        if line.all():
            shifts.append(0)
            slices.append(slice(0, grid.n))
            padded.append(grid.n)
            offsets.append(0)
            continue
        empty = int(np.flatnonzero(~line)[0])
        shift = grid.n - 1 - empty
        rolled = np.roll(line, shift)
        true_idx = np.flatnonzero(rolled)
        lo, hi = int(true_idx[0]), int(true_idx[-1]) + 1
        shifts.append(shift)
        slices.append(slice(lo, hi))
        padded.append(hi - lo + 2)
        offsets.append(1)
    return shifts, slices, tuple(padded), offsets


def _fd_neg_laplace(w: np.ndarray, h: float, d: int) -> np.ndarray:
    out = (2.0 * d) * w
    for axis in range(d):
        out = out - np.roll(w, 1, axis=axis) - np.roll(w, -1, axis=axis)
    return out / (h * h)


def dirichlet_mask_cg(grid: TorusGrid, mask: np.ndarray, rhs: np.ndarray,
                      rel_tol: float = 1e-8, max_iter: int = 20000):
    """Solve -Laplace_h(w) = rhs on the masked cells, w = 0 outside.

    The 2d+1-point finite-difference operator is restricted to the mask;
    values of rhs outside the mask are ignored. Plain CG on a cropped
    bounding box (the mask is rolled to avoid wraparound first).
    Returns (w on the full grid, SolveStats).
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != grid.spatial_shape:
        raise ValidationError(f"mask must have shape {grid.spatial_shape}")
    if not mask.any():
        raise MaskEmpty("no cell center lies in the requested region")
    if not (0.0 < rel_tol < 1.0):
        raise ValidationError(f"rel_tol must lie in (0, 1), got {rel_tol}")

    t0 = time.perf_counter()
    shifts, slices, padded_shape, offsets = _crop_geometry(grid, mask)
    mask_r = np.roll(mask, shifts, axis=tuple(range(grid.d)))
    rhs_r = np.roll(np.asarray(rhs, dtype=float), shifts,
                    axis=tuple(range(grid.d)))
    inner = tuple(slice(off, off + s.stop - s.start)
                  for off, s in zip(offsets, slices))
    m = np.zeros(padded_shape, dtype=bool)
    m[inner] = mask_r[tuple(slices)]
    b = np.zeros(padded_shape)
    b[inner] = np.where(mask_r[tuple(slices)], rhs_r[tuple(slices)], 0.0)

    def apply(w: np.ndarray) -> np.ndarray:
        out = _fd_neg_laplace(w, grid.h, grid.d)
        out[~m] = 0.0
        return out

    bnorm = float(np.sqrt(dsum(b * b)))
    stats = SolveStats(iterations=0, rel_residual=0.0, wall_time=0.0,
                       method="cg")
    w = np.zeros(padded_shape)
    if bnorm > 0.0:
        target = rel_tol * bnorm
        r = b.copy()
        p = r.copy()
        rr = ddot(r, r)
        converged = np.sqrt(rr) <= target
        while not converged and stats.iterations < max_iter:
            Ap = apply(p)
            alpha = rr / ddot(p, Ap)
            w = w + alpha * p
            r = r - alpha * Ap
            stats.iterations += 1
            rr_new = ddot(r, r)
            if np.sqrt(rr_new) <= target:
                converged = True
                break
            p = r + (rr_new / rr) * p
            rr = rr_new
        true_r = b - apply(w)
        stats.rel_residual = float(np.sqrt(dsum(true_r * true_r))) / bnorm
        stats.wall_time = time.perf_counter() - t0
        if stats.rel_residual > rel_tol:
            raise NoConvergence(
                f"masked CG stalled at relative residual "
                f"{stats.rel_residual:.3e} > {rel_tol:.3e} "
                f"after {stats.iterations} iterations", stats=stats)
    w = np.where(m, w, 0.0)

    full_r = np.zeros(grid.spatial_shape)
    full_r[tuple(slices)] = w[inner]
    full = np.roll(full_r, [-s for s in shifts], axis=tuple(range(grid.d)))
    stats.wall_time = time.perf_counter() - t0
    return full, stats


def dirichlet_energy(grid: TorusGrid, w: np.ndarray) -> float:
    """Discrete Dirichlet energy sum_edges ((w_a - w_b)/h)^2 * h^d with
    periodic adjacency; equals ||grad w||^2 for the FD operator."""
    total = 0.0
    for axis in range(grid.d):
        diff = (np.roll(w, -1, axis=axis) - w) / grid.h
        total += dsum(diff * diff)
    return total * grid.cell_volume


def filtered_coefficient(a: CoefficientField, scale: float = None) -> CoefficientField:
    """One Gaussian mollification pass of each entry (default scale 2h).

    The filter kernel is a positive probability density on the torus, so
    convex-combination bounds survive: the result is still lambda-elliptic
    with operator norm at most 1. Intended for rough (piecewise-constant)
    coefficients in spectral residual checks; flagged in provenance.
    """
    grid = a.grid
    if scale is None:
        scale = 2.0 * grid.h
    filt = np.exp(-0.5 * scale ** 2 * grid.k2_full)
    values = np.empty_like(a.a.values)
    for i in range(grid.d):
        for j in range(grid.d):
            values[i, j] = grid.irfftn(filt * grid.rfftn(a.a.values[i, j]))
    prov = dict(a.provenance)
    prov["filtered_scale"] = float(scale)
    from .grid import MatrixField
    return CoefficientField(a=MatrixField(grid, values), lam=a.lam,
                            symmetric=a.symmetric, provenance=prov,
                            rescale_events=a.rescale_events,
                            lsi_beta=a.lsi_beta)
