"""Correctors, effective coefficients, and two-scale error studies for
divergence-form elliptic equations with random coefficients on a periodic
torus, solved spectrally."""

from .errors import (HomoglabError, ValidationError, BadLevel, BadPeriod,
                     MaskEmpty, NegativeSpectrum, DegenerateFit,
                     NoConvergence)
from .runtime import set_workers, get_workers
from .grid import (TorusGrid, ScalarField, VectorField, MatrixField,
                   Rank3Field, SymRank3Field, SkewRank3Field, SkewRank4Field,
                   norm, hminus1_ball, multiscale_decomposition,
                   dyadic_project, write_field, read_field)
from .ensemble import (CovarianceSpec, LipschitzMapSpec, CoefficientField,
                       EllipticityReport, sample_gaussian_field,
                       build_coefficient_field, sample_coefficient_field,
                       constant_field, laminate_field, checkerboard_field,
                       deterministic_field, validate_ellipticity)
from .cellsolve import (SolveSpec, SolveStats, DivergenceForm,
                        default_spec_for, fft_const_solve,
                        krylov_solve_divform, dirichlet_mask_cg,
                        filtered_coefficient)
from .correctors import (FirstOrderCorrectors, SecondOrderCorrectors,
                         RStarDiagnostic, solve_first_order, solve_psi,
                         solve_second_order, compute_q1_a1,
                         compute_flux_correction, solve_potential, solve_Psi,
                         check_sigma_divergence, potential_divergence_gap,
                         gauge_residual, estimate_rstar,
                         equationpsi_residuals, dump_correctors,
                         load_correctors)
from .twoscale import (MacroscopicSolution, ExpansionBundle, ErrorReport,
                       IdentityRefinementReport, default_f,
                       band_limited_bump, solve_uhom, solve_u1hom,
                       solve_macro, assemble_expansion, identity_residuals,
                       residual_identity_check, ibp_expectation_check,
                       error_report)
from .experiments import (ExperimentConfig, ExponentFit, SweepResult,
                          GrowthStudyResult, run_realization, fit_exponent,
                          sweep, write_sweep_csv, write_summary_json,
                          symmetric_a1_study, corrector_growth_study,
                          rstar_tail_study)

__version__ = "0.1.0"
