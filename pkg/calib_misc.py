"""Mini-calibrations: ibp linearity, fit scale invariance, laminate trend."""
import numpy as np

from homoglab.grid import TorusGrid, MatrixField
from homoglab.ensemble import CoefficientField, laminate_field
from homoglab.cellsolve import default_spec_for
from homoglab.correctors import solve_first_order, solve_second_order
from homoglab.twoscale import (default_f, solve_macro, error_report,
                               ibp_expectation_check)
from homoglab.experiments import fit_exponent
from calib_trig import trig_coefficient

# ibp gap vs rel_tol (nonsym trig, d=2, n=64)
grid = TorusGrid(d=2, n=64, L=1.0)
a = trig_coefficient(grid, skew=0.12)
for tol in (1e-6, 1e-8, 1e-10):
    spec = default_spec_for(a, rel_tol=tol, max_iter=4000)
    foc = solve_first_order(a, spec)
    soc = solve_second_order(a, foc, eps_scale=0.1, spec=spec, with_Psi=False)
    gaps, scales = ibp_expectation_check(a, foc, soc)
    rel = gaps.max() / scales.max()
    print(f"ibp tol {tol:.0e}: rel gap {rel:.3e}  gap/tol {rel / tol:.3f}")

# fit_exponent scale invariance, bit level?
ells = np.array([1 / 8, 1 / 12, 1 / 16, 1 / 24])
errs = 3.0 * ells ** 1.5 * (1.0 + np.array([0.01, -0.02, 0.015, 0.0]))
f1 = fit_exponent(ells, errs)
f2 = fit_exponent(ells, 1000.0 * errs)
print(f"fit slope {f1.slope!r} scaled {f2.slope!r} "
      f"identical {f1.slope == f2.slope}")
f3 = fit_exponent(ells, np.pi * errs)
print(f"fit slope x pi {f3.slope!r} identical {f1.slope == f3.slope}")

# laminate period halving: first-order L2(B) error monotone?
for d, n in ((2, 128),):
    for period_frac in (2, 4, 8):
        grid = TorusGrid(d=d, n=n, L=1.0)
        a = laminate_field(grid, axis=0, alpha1=1.0, alpha2=0.5,
                           period=1.0 / period_frac)
        spec = default_spec_for(a, rel_tol=1e-9, max_iter=2000)
        foc = solve_first_order(a, spec)
        soc = solve_second_order(a, foc, eps_scale=1.0 / period_frac,
                                 spec=spec, with_Psi=False)
        f = default_f(grid)
        macro = solve_macro(foc.a_hom, soc.a1, f)
        rep = error_report(a, macro, foc, soc, spec=spec)
        print(f"laminate period L/{period_frac}: exp1_L2(B) "
              f"{rep.l2_exp1_ball:.4e}  L2(B) {rep.l2_ball:.4e} "
              f"Hm1(B) {rep.hm1_ball:.4e}")
