"""d=1 pipeline vs same-grid quadrature oracle (phi, psi, a_hom, a1, u)."""
import numpy as np

from homoglab.grid import TorusGrid, ScalarField, norm
from homoglab.ensemble import (CovarianceSpec, LipschitzMapSpec,
                               sample_coefficient_field)
from homoglab.cellsolve import default_spec_for, krylov_solve_divform, DivergenceForm
from homoglab.correctors import solve_first_order, solve_second_order
from homoglab.twoscale import default_f, solve_macro
from homoglab.grid import VectorField


def antider(values, L):
    N = values.size
    spec = np.fft.rfft(values)
    k = 2.0 * np.pi / L * np.arange(spec.size)
    out = np.zeros_like(spec)
    out[1:] = spec[1:] / (1j * k[1:])
    if N % 2 == 0:
        out[-1] = 0.0
    return np.fft.irfft(out, n=N)


L = 1.0
for n in (32, 64, 128):
    grid = TorusGrid(d=1, n=n, L=L)
    cov = CovarianceSpec(kind="gaussian_bump", ell=L / 8.0, variance=1.0)
    mp = LipschitzMapSpec(lam=0.2, symmetric=True)
    a = sample_coefficient_field(grid, cov, mp, seed=3)
    alpha = a.a.values[0, 0]
    avg = lambda v: float(np.mean(v))

    spec = default_spec_for(a, rel_tol=1e-9, max_iter=2000)
    foc = solve_first_order(a, spec=spec)
    soc = solve_second_order(a, foc, eps_scale=1.0 / 8.0, spec=spec,
                             with_Psi=False)

    inv_harm = avg(1.0 / alpha)
    c0 = 1.0 / inv_harm
    phi_o = antider(c0 / alpha - 1.0, L)
    dev_phi = np.abs(foc.phi.values[0] - phi_o).max()
    dev_ahom = abs(foc.a_hom[0, 0] - c0)

    # psi: alpha psi' + phi alpha = k (sigma = 0 in 1D)
    M = phi_o * alpha
    k00 = avg(M / alpha) / inv_harm
    psi_o = antider((k00 - M) / alpha, L)
    dev_psi = np.abs(soc.psi.values[0, 0] - psi_o).max()
    a1_o = k00 / (1.0 / 8.0)
    dev_a1 = abs(soc.a1[0, 0, 0] - a1_o)

    # micro solve: alpha u' = -F + c
    f = default_f(grid)
    F = antider(f.values, L)
    cu = avg(F / alpha) / inv_harm
    u_o = antider((cu - F) / alpha, L)
    u, _ = krylov_solve_divform(a, f, spec=spec)
    dev_u = np.abs(u.values - u_o).max()
    scale_u = np.abs(u_o).max()

    print(f"n={n}: dev_phi {dev_phi:.3e}  dev_psi {dev_psi:.3e}  "
          f"dev_ahom {dev_ahom:.3e}  dev_a1 {dev_a1:.3e}  "
          f"dev_u {dev_u:.3e} (rel {dev_u / scale_u:.3e})")
