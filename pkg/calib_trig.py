"""Trig coefficient identity-refinement numbers (symmetric and nonsym)."""
import time

import numpy as np

from homoglab.grid import TorusGrid, MatrixField
from homoglab.ensemble import CoefficientField
from homoglab.twoscale import residual_identity_check


def trig_coefficient(grid, skew=0.0):
    """Fixed smooth matrix coefficient, refinable on any grid."""
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
    lam = float(base.min() - abs(off).max())
    return CoefficientField(a=MatrixField(grid, values), lam=0.2,
                            symmetric=(skew == 0.0),
                            provenance={"kind": "trig", "skew": skew})


for skew in (0.0, 0.12):
    t0 = time.time()
    rep = residual_identity_check(lambda g: trig_coefficient(g, skew),
                                  d=2, n_values=(32, 64, 128), L=1.0,
                                  eps_scale=0.1, rel_tol=1e-9)
    print(f"skew={skew}: wall {time.time()-t0:.1f}s")
    for key, vals in rep.residuals.items():
        if key == "scale":
            continue
        print(f"  {key:22s} {['%.3e' % v for v in vals]}  slope {rep.slopes[key]:.2f}")
    print(f"  ablation factors {['%.2e' % v for v in rep.ablation_factors]}")
