"""Quick calibrations: multiscale band, checkerboard duality, iteration growth."""
import time

import numpy as np

from homoglab.grid import TorusGrid, ScalarField, norm, multiscale_decomposition
from homoglab.ensemble import (CovarianceSpec, LipschitzMapSpec,
                               sample_coefficient_field, checkerboard_field)
from homoglab.cellsolve import SolveSpec
from homoglab.correctors import solve_first_order

# A: multiscale bound / spectral Hminus1 ratio over 100 band-limited fields
for d in (2, 3):
    grid = TorusGrid(d=d, n=32, L=1.0)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(42)))
    cut = 8
    keep = grid.k2_full <= (2.0 * np.pi / grid.L * cut) ** 2
    ratios = []
    t0 = time.time()
    for _ in range(100):
        white = rng.standard_normal(grid.spatial_shape)
        v = grid.irfftn(np.where(keep, grid.rfftn(white), 0.0))
        u = ScalarField(grid, v - v.mean())
        dec = multiscale_decomposition(u)
        h = norm(u, "Hminus1_torus")
        ratios.append(dec.multiscale_hminus1_bound / h)
        assert dec.l2_identity_gap <= 1e-12 * norm(u, "L2") ** 2, dec.l2_identity_gap
    ratios = np.array(ratios)
    print(f"A d={d}: ratio min {ratios.min():.4g} max {ratios.max():.4g} "
          f"wall {time.time()-t0:.1f}s")

# D: checkerboard duality at n=256, d=2
grid = TorusGrid(d=2, n=256, L=1.0)
a = checkerboard_field(grid, 1.0, 4.0, period=1.0 / 8.0)
t0 = time.time()
foc = solve_first_order(a, spec=SolveSpec(rel_tol=1e-9, max_iter=2000))
# checkerboard(1, 4) normalized by 4 -> duality target sqrt(1*4)/4 = 0.5
print(f"D: a_hom = {foc.a_hom.tolist()} target 0.5*I "
      f"rel dev {np.abs(foc.a_hom - 0.5 * np.eye(2)).max() / 0.5:.4g} "
      f"iters {[s.iterations for s in foc.stats]} wall {time.time()-t0:.1f}s")

# G: iteration growth n=32 -> 64, d=3, 4 seeds
cov32 = CovarianceSpec(kind="gaussian_bump", ell=1.0 / 8.0, variance=1.0)
mp = LipschitzMapSpec(lam=0.2, symmetric=True)
for seed in range(4):
    its = {}
    for n in (32, 64):
        grid = TorusGrid(d=3, n=n, L=1.0)
        a = sample_coefficient_field(grid, cov32, mp, seed=seed)
        foc = solve_first_order(a, spec=SolveSpec(rel_tol=1e-9, max_iter=1000))
        its[n] = [s.iterations for s in foc.stats]
    ratios = [b / a_ for a_, b in zip(its[32], its[64])]
    print(f"G seed {seed}: iters32 {its[32]} iters64 {its[64]} "
          f"max ratio {max(ratios):.3f}")
