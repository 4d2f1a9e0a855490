"""Coefficient-field generation.

Random fields come from a stationary Gaussian field pushed through a
bounded Lipschitz map into the lambda-elliptic matrices; deterministic
fields (constant, laminate, checkerboard) serve as analytic oracles.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .grid import TorusGrid, ScalarField, MatrixField
from .errors import ValidationError, BadPeriod, NegativeSpectrum

# Tolerance of the per-cell ellipticity invariant.
ELLIPTICITY_TOL = 1e-10

COV_KINDS = ("gaussian_bump", "exponential")


@dataclass(frozen=True)
class CovarianceSpec:
    """Isotropic covariance kernel of the driving Gaussian field.

    ``gaussian_bump``: C(x) = variance * exp(-|x|^2 / (2 ell^2))
    ``exponential``:   C(x) = variance * exp(-|x| / ell)

    The kernel is lattice-periodized on the torus; its spectral density
    is checked for nonnegativity at sampling time. The correlation
    length ``ell`` plays the role of the paper scale separation and must
    satisfy 2h < ell < L/4 on the sampling grid.
    """

    kind: str
    ell: float
    variance: float = 1.0

    def __post_init__(self):
        if self.kind not in COV_KINDS:
            raise ValidationError(
                f"covariance kind must be one of {COV_KINDS}, got {self.kind!r}")
        if not self.ell > 0:
            raise ValidationError(f"correlation length must be > 0, got {self.ell}")
        if not self.variance > 0:
            raise ValidationError(f"variance must be > 0, got {self.variance}")

    def kernel(self, grid: TorusGrid) -> np.ndarray:
        """Kernel periodized over lattice images (sum over neighbor copies).

        Nearest-image truncation alone kinks the kernel at the |x| = L/2
        seam and pushes measurable negative mass into the spectrum; the
        image sum restores smooth periodicity. The Gaussian factorizes
        over axes, so its image sum is taken per axis.
        """
        idx = np.arange(grid.n)
        delta = ((idx * grid.h + grid.L / 2.0) % grid.L) - grid.L / 2.0
        if self.kind == "gaussian_bump":
            out = np.ones(grid.spatial_shape)
            for axis in range(grid.d):
                prof = np.zeros(grid.n)
                for m in (-2, -1, 0, 1, 2):
                    prof += np.exp(-0.5 * (delta + m * grid.L) ** 2
                                   / self.ell ** 2)
                shape = [1] * grid.d
                shape[axis] = grid.n
                out = out * prof.reshape(shape)
            return self.variance * out
        out = np.zeros(grid.spatial_shape)
        shifts = [-1, 0, 1]
        for image in np.ndindex(*(len(shifts),) * grid.d):
            r2 = np.zeros(grid.spatial_shape)
            for axis in range(grid.d):
                shape = [1] * grid.d
                shape[axis] = grid.n
                shifted = delta + shifts[image[axis]] * grid.L
                r2 = r2 + shifted.reshape(shape) ** 2
            out += np.exp(-np.sqrt(r2) / self.ell)
        return self.variance * out


@dataclass(frozen=True)
class LipschitzMapSpec:
    """Pointwise map from Gaussian values to lambda-elliptic matrices.

    Symmetric case (arity 1):  a = [lam + (c_max - lam) s(g1)] I
    Nonsymmetric case (arity 2): add skew_amplitude * s(g2) * S, where S
    is the unit skew matrix e1 (x) e2 - e2 (x) e1 and s(t) = (1+tanh t)/2.

    With c_max = 1 in the symmetric case and c_max = sqrt(1 - skew_amplitude^2)
    otherwise, every output satisfies both ellipticity bounds exactly
    (operator norm^2 = c^2 + beta^2 <= c_max^2 + skew_amplitude^2 <= 1),
    so the rescale safeguard never fires for this map.
    """

    lam: float
    symmetric: bool = True
    skew_amplitude: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.lam <= 1.0:
            raise ValidationError(f"lambda must lie in (0, 1], got {self.lam}")
        if self.symmetric:
            if self.skew_amplitude != 0.0:
                raise ValidationError("skew_amplitude must be 0 for a symmetric map")
        else:
            hi = (1.0 - self.lam) / 2.0
            if not 0.0 <= self.skew_amplitude <= hi:
                raise ValidationError(
                    f"skew_amplitude must lie in [0, (1-lambda)/2] = [0, {hi}], "
                    f"got {self.skew_amplitude}")

    @property
    def arity(self) -> int:
        return 1 if self.symmetric else 2

    @property
    def c_max(self) -> float:
        if self.symmetric:
            return 1.0
        return float(np.sqrt(1.0 - self.skew_amplitude ** 2))


@dataclass
class EllipticityReport:
    min_sym_eig: float
    max_op_norm: float
    violation_count: int


@dataclass
class CoefficientField:
    """A lambda-elliptic matrix coefficient with its certificate.

    ``lsi_beta`` records the log-Sobolev exponent of the generating
    ensemble; every shipped ensemble has integrable covariance, beta = 0.
    """

    a: MatrixField
    lam: float
    symmetric: bool
    provenance: dict = dc_field(default_factory=dict)
    rescale_events: int = 0
    lsi_beta: float = 0.0

    def __post_init__(self):
        if not np.all(np.isfinite(self.a.values)):
            raise ValidationError("coefficient values must be finite")
        report = self.provenance.pop("_report", None)
        if report is None:
            report = validate_ellipticity_values(self.a.values, self.lam)
        if report.min_sym_eig < self.lam - ELLIPTICITY_TOL:
            raise ValidationError(
                f"min symmetric-part eigenvalue {report.min_sym_eig:.12g} "
                f"below lambda = {self.lam}")
        if report.max_op_norm > 1.0 + ELLIPTICITY_TOL:
            raise ValidationError(
                f"max operator norm {report.max_op_norm:.12g} exceeds 1")
        if self.symmetric:
            gap = float(np.max(np.abs(
                self.a.values - np.swapaxes(self.a.values, 0, 1))))
            if gap != 0.0:
                raise ValidationError(
                    f"field flagged symmetric has max |a - a^T| = {gap:.3g}")
        self.ellipticity = report

    @property
    def grid(self) -> TorusGrid:
        return self.a.grid

    def transpose(self) -> "CoefficientField":
        """Pointwise transpose (same ellipticity certificate)."""
        prov = dict(self.provenance)
        prov["transposed"] = not prov.get("transposed", False)
        return CoefficientField(
            a=MatrixField(self.grid, np.swapaxes(self.a.values, 0, 1).copy()),
            lam=self.lam, symmetric=self.symmetric, provenance=prov,
            rescale_events=self.rescale_events, lsi_beta=self.lsi_beta)


# -- ellipticity checks ------------------------------------------------------

def _cellwise(values: np.ndarray) -> np.ndarray:
    """(d, d, spatial...) -> (cells, d, d)."""
    d = values.shape[0]
    return values.reshape(d, d, -1).transpose(2, 0, 1)

def validate_ellipticity_values(values: np.ndarray, lam: float) -> EllipticityReport:
    cells = _cellwise(values)
    sym = 0.5 * (cells + np.swapaxes(cells, 1, 2))
    sym_eigs = np.linalg.eigvalsh(sym)
    min_eig = float(sym_eigs[:, 0].min())
    gram = np.matmul(np.swapaxes(cells, 1, 2), cells)
    gram_eigs = np.linalg.eigvalsh(gram)
    norms_sq = gram_eigs[:, -1]
    max_norm = float(np.sqrt(max(norms_sq.max(), 0.0)))
    violations = int(np.count_nonzero(
        (sym_eigs[:, 0] < lam - ELLIPTICITY_TOL)
        | (norms_sq > (1.0 + ELLIPTICITY_TOL) ** 2)))
    return EllipticityReport(min_eig, max_norm, violations)

def validate_ellipticity(field: CoefficientField) -> EllipticityReport:
    """Exact per-cell check of a v.v >= lam |v|^2 and |a v| <= |v|."""
    return validate_ellipticity_values(field.a.values, field.lam)


# -- Gaussian sampling -------------------------------------------------------

def _rng_for(seed: int, stream: int, index: int) -> np.random.Generator:
    if seed < 0:
        raise ValidationError(f"seed must be nonnegative, got {seed}")
    ss = np.random.SeedSequence(entropy=int(seed),
                                spawn_key=(int(stream), int(index)))
    return np.random.Generator(np.random.Philox(ss))


def sample_gaussian_field(grid: TorusGrid, cov: CovarianceSpec, seed: int,
                          count: int = 1, stream: int = 0) -> list:
    """Draw stationary centered Gaussian fields with the periodized covariance.

    Each field is keyed by (seed, stream, field index) through a
    counter-based generator, so sampling order never matters. The FFT of
    real white noise is Hermitian-symmetric complex white noise, so
    filtering it by sqrt of the spectral density realizes the exact
    circulant covariance on the torus.

    Raises NegativeSpectrum if clipping negative spectral mass removes
    more than 1e-6 of the total.
    """
    if not 2.0 * grid.h < cov.ell < grid.L / 4.0:
        raise ValidationError(
            f"correlation length {cov.ell} outside (2h, L/4) = "
            f"({2.0 * grid.h}, {grid.L / 4.0})")
    if count < 1:
        raise ValidationError(f"count must be >= 1, got {count}")
    spectrum = grid.rfftn(cov.kernel(grid)).real
    negative = -np.minimum(spectrum, 0.0)
    neg_mass = float(np.sum(grid.parseval_mult * negative))
    total_mass = float(np.sum(grid.parseval_mult * np.abs(spectrum)))
    if neg_mass > 1e-6 * total_mass:
        raise NegativeSpectrum(
            f"{cov.kind} spectrum on n={grid.n} clips {neg_mass:.3e} of "
            f"{total_mass:.3e} total mass")
    root = np.sqrt(np.maximum(spectrum, 0.0))
    fields = []
    for i in range(count):
        rng = _rng_for(seed, stream, i)
        white = rng.standard_normal(grid.spatial_shape)
        fields.append(ScalarField(grid, grid.irfftn(root * grid.rfftn(white))))
    return fields


# -- Lipschitz map -----------------------------------------------------------

def _sigmoid(t: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(t))


def build_coefficient_field(gfields: list, spec: LipschitzMapSpec,
                            provenance: dict = None) -> CoefficientField:
    """Push Gaussian fields through the pointwise Lipschitz map.

    Construction is total: should any cell violate an ellipticity bound
    (impossible for this map, by the c_max cap), it is rescaled to the
    unit operator-norm ball and the event counted.
    """
    if len(gfields) != spec.arity:
        raise ValidationError(
            f"map needs {spec.arity} Gaussian fields, got {len(gfields)}")
    grid = gfields[0].grid
    for g in gfields[1:]:
        if g.grid != grid:
            raise ValidationError("all Gaussian fields must share one grid")
    if not spec.symmetric and grid.d < 2:
        raise ValidationError("nonsymmetric map needs d >= 2")

    c = spec.lam + (spec.c_max - spec.lam) * _sigmoid(gfields[0].values)
    values = np.zeros((grid.d, grid.d) + grid.spatial_shape)
    for i in range(grid.d):
        values[i, i] = c
    if not spec.symmetric and spec.skew_amplitude > 0.0:
        beta = spec.skew_amplitude * _sigmoid(gfields[1].values)
        values[0, 1] += beta
        values[1, 0] -= beta
        norm_sq = c ** 2 + beta ** 2
    else:
        beta = None
        norm_sq = c ** 2

    # Safety net; a no-op for the capped map above.
    over = norm_sq > 1.0
    rescales = int(np.count_nonzero(over))
    if rescales:
        factor = np.where(over, 1.0 / np.sqrt(norm_sq), 1.0)
        values *= factor
        c = c * factor

    # The structure makes the certificate closed-form: the symmetric part
    # is c I and the operator norm is sqrt(c^2 + beta^2) exactly.
    min_eig = float(c.min())
    if beta is None:
        max_norm = float(c.max())
    else:
        max_norm = float(np.sqrt((c ** 2 + beta ** 2).max()))
    report = EllipticityReport(
        min_sym_eig=min_eig, max_op_norm=max_norm,
        violation_count=int(np.count_nonzero(
            (c < spec.lam - ELLIPTICITY_TOL)
            | (norm_sq > (1.0 + ELLIPTICITY_TOL) ** 2))))

    prov = dict(provenance or {})
    prov.setdefault("kind", "gaussian_lipschitz")
    prov["map"] = {"lam": spec.lam, "symmetric": spec.symmetric,
                   "skew_amplitude": spec.skew_amplitude}
    prov["_report"] = report
    return CoefficientField(
        a=MatrixField(grid, values), lam=spec.lam, symmetric=spec.symmetric,
        provenance=prov, rescale_events=rescales, lsi_beta=0.0)


def sample_coefficient_field(grid: TorusGrid, cov: CovarianceSpec,
                             spec: LipschitzMapSpec, seed: int,
                             stream: int = 0) -> CoefficientField:
    """One-call ensemble draw: Gaussian fields plus the Lipschitz map."""
    gfields = sample_gaussian_field(grid, cov, seed, count=spec.arity,
                                    stream=stream)
    prov = {"kind": "gaussian_lipschitz",
            "cov": {"kind": cov.kind, "ell": cov.ell, "variance": cov.variance},
            "seed": int(seed), "stream": int(stream)}
    return build_coefficient_field(gfields, spec, provenance=prov)


# -- deterministic oracle fields --------------------------------------------

def _cells_for_length(grid: TorusGrid, length: float, what: str) -> int:
    cells = length / grid.h
    rounded = round(cells)
    if abs(cells - rounded) > 1e-9 * max(1.0, abs(cells)) or rounded < 1:
        raise BadPeriod(f"{what} {length} is not a whole number of cells "
                        f"(h = {grid.h})")
    return int(rounded)


def constant_field(grid: TorusGrid, matrix) -> CoefficientField:
    """a(x) = M everywhere; M must be lambda-elliptic for some lambda > 0."""
    matrix = np.asarray(matrix, dtype=float)
    a = MatrixField.constant(grid, matrix)
    sym_eigs = np.linalg.eigvalsh(0.5 * (matrix + matrix.T))
    lam = float(sym_eigs[0])
    if lam <= 0:
        raise ValidationError(
            f"constant matrix has min symmetric eigenvalue {lam}, not elliptic")
    symmetric = bool(np.array_equal(matrix, matrix.T))
    return CoefficientField(a=a, lam=lam, symmetric=symmetric,
                            provenance={"kind": "constant",
                                        "matrix": matrix.tolist()})


def laminate_field(grid: TorusGrid, axis: int, alpha1: float, alpha2: float,
                   period: float = None) -> CoefficientField:
    """Two-phase laminate: the (axis, axis) entry is alpha(x_axis), the
    transverse diagonal entries are 1 (identity transverse). alpha is
    piecewise constant, alpha1 on the first half-period and alpha2 on the
    second, so the effective matrix is the harmonic mean along the axis
    and 1 transverse."""
    if not 0 <= axis < grid.d:
        raise ValidationError(f"axis {axis} out of range for d = {grid.d}")
    for name, val in (("alpha1", alpha1), ("alpha2", alpha2)):
        if not 0.0 < val <= 1.0:
            raise ValidationError(f"{name} must lie in (0, 1], got {val}")
    if period is None:
        period = grid.L
    cells = _cells_for_length(grid, period, "laminate period")
    if grid.n % cells != 0 or cells % 2 != 0:
        raise BadPeriod(
            f"laminate period of {cells} cells must be even and divide n = {grid.n}")
    idx = np.arange(grid.n)
    profile = np.where((idx % cells) < cells // 2, alpha1, alpha2)
    shape = [1] * grid.d
    shape[axis] = grid.n
    alpha = np.broadcast_to(profile.reshape(shape), grid.spatial_shape)
    values = np.zeros((grid.d, grid.d) + grid.spatial_shape)
    for i in range(grid.d):
        values[i, i] = alpha if i == axis else 1.0
    return CoefficientField(
        a=MatrixField(grid, values), lam=float(min(alpha1, alpha2)),
        symmetric=True,
        provenance={"kind": "laminate", "axis": axis, "alpha1": alpha1,
                    "alpha2": alpha2, "period": period})


def checkerboard_field(grid: TorusGrid, a1: float, a2: float,
                       period: float) -> CoefficientField:
    """Isotropic two-phase checkerboard with squares of side period/2.

    Values above 1 are scaled down by max(a1, a2) so the field satisfies
    the unit operator-norm bound; the factor is recorded in provenance
    (homogenization is linear in a, so oracles rescale the same way).
    """
    for name, val in (("a1", a1), ("a2", a2)):
        if not val > 0:
            raise ValidationError(f"{name} must be > 0, got {val}")
    cells = _cells_for_length(grid, period, "checkerboard period")
    if cells % 2 != 0 or grid.n % cells != 0:
        raise BadPeriod(
            f"checkerboard period of {cells} cells must be even and divide "
            f"n = {grid.n}")
    half = cells // 2
    tile = (np.arange(grid.n) // half) % 2
    parity = np.zeros(grid.spatial_shape, dtype=int)
    for axis in range(grid.d):
        shape = [1] * grid.d
        shape[axis] = grid.n
        parity = parity + tile.reshape(shape)
    scalar = np.where(parity % 2 == 0, float(a1), float(a2))
    scale = max(abs(a1), abs(a2))
    values = np.zeros((grid.d, grid.d) + grid.spatial_shape)
    for i in range(grid.d):
        values[i, i] = scalar / scale if scale > 1.0 else scalar
    lam = min(a1, a2) / scale if scale > 1.0 else min(a1, a2)
    return CoefficientField(
        a=MatrixField(grid, values), lam=float(lam), symmetric=True,
        provenance={"kind": "checkerboard", "a1": a1, "a2": a2,
                    "period": period, "normalized_by": max(scale, 1.0)})


def deterministic_field(grid: TorusGrid, kind: str, **params) -> CoefficientField:
    """Dispatch by name; see the dedicated constructors for parameters."""
    builders = {"constant": constant_field, "laminate": laminate_field,
                "checkerboard": checkerboard_field}
    if kind not in builders:
        raise ValidationError(
            f"unknown deterministic kind {kind!r}, expected one of "
            f"{tuple(builders)}")
    return builders[kind](grid, **params)
