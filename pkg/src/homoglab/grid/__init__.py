"""Torus grids, tensor fields, spectral calculus, norms, dyadic analysis."""

from .torus import TorusGrid
from .fields import (Field, ScalarField, VectorField, MatrixField, Rank3Field,
                     SymRank3Field, SkewRank3Field, SkewRank4Field,
                     skew_pairs, sym_triples)
from .spectral import (diff, gradient, divergence, neg_laplace_inv, mollify,
                       diff_array, gradient_array, divergence_array,
                       neg_laplace_inv_array, mollify_array, matvec_array)
from .norms import norm, hminus1_ball
from .dyadic import (dyadic_project, multiscale_decomposition,
                     MultiscaleDecomposition, top_level)
from .hgf1 import read_field, write_field

__all__ = [
    "TorusGrid", "Field", "ScalarField", "VectorField", "MatrixField",
    "Rank3Field", "SymRank3Field", "SkewRank3Field", "SkewRank4Field",
    "skew_pairs", "sym_triples",
    "diff", "gradient", "divergence", "neg_laplace_inv", "mollify",
    "diff_array", "gradient_array", "divergence_array",
    "neg_laplace_inv_array", "mollify_array", "matvec_array",
    "norm", "hminus1_ball",
    "dyadic_project", "multiscale_decomposition", "MultiscaleDecomposition",
    "top_level",
    "read_field", "write_field",
]
