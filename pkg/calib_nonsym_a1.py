"""Nonsym 1D-profile a1 oracle: closed 1D reduction vs package, d=2.

a(x) = [[alpha(x0), beta(x0)], [-beta(x0), alpha(x0)]] with smooth trig
profiles. Every cell problem reduces to first-order ODEs in x0 solved by
periodic averages and spectral antiderivatives on a dense 1D grid.
"""
import numpy as np

from homoglab.grid import TorusGrid, MatrixField
from homoglab.ensemble import CoefficientField
from homoglab.cellsolve import SolveSpec, default_spec_for
from homoglab.correctors import solve_first_order, solve_second_order


def profiles(x, L):
    alpha = 0.6 + 0.25 * np.sin(2.0 * np.pi * x / L)
    beta = 0.3 * np.cos(2.0 * np.pi * x / L + 0.7)
    return alpha, beta


def antiderivative_mean_zero(values, L):
    """Spectral antiderivative of a mean-zero periodic sample set."""
    N = values.size
    spec = np.fft.rfft(values)
    k = 2.0 * np.pi / L * np.arange(spec.size)
    out = np.zeros_like(spec)
    out[1:] = spec[1:] / (1j * k[1:])
    if N % 2 == 0:
        out[-1] = 0.0
    return np.fft.irfft(out, n=N)


def oracle_a1(L=1.0, N=8192, eps=1.0):
    x = (np.arange(N) + 0.5) * (L / N)
    alpha, beta = profiles(x, L)
    avg = lambda v: float(np.mean(v))
    inv_harm = avg(1.0 / alpha)

    # i = 0: alpha (1 + phi0') = c0
    c0 = 1.0 / inv_harm
    phi0p = c0 / alpha - 1.0
    phi0 = antiderivative_mean_zero(phi0p, L)
    qt0 = np.stack([np.zeros(N), -beta * c0 / alpha + c0 * avg(beta / alpha)])
    # i = 1: alpha phi1' + beta = cb
    cb = avg(beta / alpha) / inv_harm
    phi1p = (cb - beta) / alpha
    phi1 = antiderivative_mean_zero(phi1p, L)
    qt1 = np.stack([np.zeros(N),
                    alpha - beta * phi1p - avg(alpha - beta * phi1p)])

    ahom = np.array([[c0, cb],
                     [avg(-beta * c0 / alpha), avg(alpha - beta * phi1p)]])

    # sigma_i01' = -qt_i1 (Poisson gauge, 1D profile)
    s0 = -antiderivative_mean_zero(qt0[1], L)
    s1 = -antiderivative_mean_zero(qt1[1], L)

    def m_matrix(phi, s):
        return np.array([[phi * alpha, phi * beta - s],
                         [-phi * beta + s, phi * alpha]], dtype=object)

    phis = (phi0, phi1)
    sigmas = (s0, s1)
    a1_raw = np.zeros((2, 2, 2))
    for i in range(2):
        phi = phis[i]
        s = sigmas[i]
        M = [[phi * alpha, phi * beta - s],
             [-phi * beta + s, phi * alpha]]
        for j in range(2):
            # alpha psi_ij' + M[0][j] = k_ij
            k_ij = avg(M[0][j] / alpha) / inv_harm
            psip = (k_ij - M[0][j]) / alpha
            a1_raw[i, j, 0] = k_ij
            a1_raw[i, j, 1] = avg(-beta * psip + M[1][j])
    a1 = np.zeros((2, 2, 2))
    from itertools import permutations
    for i in range(2):
        for j in range(2):
            for k in range(2):
                a1[i, j, k] = np.mean(
                    [a1_raw[p] for p in permutations((i, j, k))])
    return ahom, a1 / eps


def package_a1(n, L=1.0, eps=1.0, rel_tol=1e-9):
    grid = TorusGrid(d=2, n=n, L=L)
    x = grid.axis_coords()[:, None]
    alpha, beta = profiles(np.broadcast_to(x, grid.spatial_shape), L)
    values = np.stack([np.stack([alpha, beta]), np.stack([-beta, alpha])])
    a = CoefficientField(a=MatrixField(grid, values), lam=0.3, symmetric=False,
                         provenance={"kind": "trig_profile_1d"})
    spec = default_spec_for(a, rel_tol=rel_tol, max_iter=2000)
    foc = solve_first_order(a, spec=spec)
    soc = solve_second_order(a, foc, eps_scale=eps, spec=spec, with_Psi=False)
    return foc.a_hom, soc.a1


ahom_o, a1_o = oracle_a1()
print("oracle a_hom:\n", ahom_o)
print("oracle a1 unique triples:")
for (i, j, k) in ((0, 0, 0), (0, 0, 1), (0, 1, 1), (1, 1, 1)):
    print(f"  a1_{i}{j}{k} = {a1_o[i, j, k]: .12e}")
for n in (16, 32, 64):
    ahom_p, a1_p = package_a1(n)
    dev_ahom = np.abs(ahom_p - ahom_o).max()
    dev_a1 = np.abs(a1_p - a1_o).max()
    print(f"n={n}: |ahom dev| {dev_ahom:.3e}  |a1 dev| {dev_a1:.3e} "
          f"(x n^2 = {dev_a1 * n * n:.3e})")
