"""Tensor fields on a torus grid.

Every field stores one real array per independent component, spatial axes
last. Antisymmetric fields store only the strictly upper pairs of their
skew index pair; the dependent components are reconstructed on access.
"""

from __future__ import annotations

import itertools

import numpy as np

from .torus import TorusGrid
from ..errors import ValidationError

# Relative tolerance of the mean-zero tag.
MEAN_ZERO_RTOL = 1e-12


def skew_pairs(d: int) -> list:
    """Index pairs (j, k) with j < k, lexicographic."""
    return [(j, k) for j in range(d) for k in range(j + 1, d)]


def sym_triples(d: int) -> list:
    """Index triples (i, j, k) with i <= j <= k, lexicographic."""
    return [(i, j, k) for i in range(d) for j in range(i, d) for k in range(j, d)]


class Field:
    """Base class: a grid, a values array, and an optional mean-zero tag.

    ``values`` has shape ``storage_shape + grid.spatial_shape``. Subclasses
    define the storage layout and how nominal components map onto it.
    """

    rank = None  # nominal tensor rank; set by subclasses

    def __init__(self, grid: TorusGrid, values: np.ndarray, mean_zero: bool = False):
        values = np.asarray(values, dtype=float)
        expected = self.storage_shape(grid.d) + grid.spatial_shape
        if values.shape != expected:
            raise ValidationError(
                f"{type(self).__name__} values must have shape {expected}, "
                f"got {values.shape}")
        self.grid = grid
        self.values = values
        self.mean_zero = bool(mean_zero)
        if mean_zero:
            self.check_mean_zero()

    # -- layout ----------------------------------------------------------

    @classmethod
    def storage_shape(cls, d: int) -> tuple:
        raise NotImplementedError

    @property
    def component_count(self) -> int:
        """Nominal component count d**rank."""
        return self.grid.d ** self.rank

    def storage_components(self):
        """Iterate stored component arrays, flattened over storage axes."""
        flat = self.values.reshape((-1,) + self.grid.spatial_shape)
        return flat

    def storage_multiplicity(self) -> np.ndarray:
        """Per stored component, how many nominal components it represents."""
        count = self.storage_components().shape[0]
        return np.ones(count)

    def component(self, *index) -> np.ndarray:
        """Nominal component as a spatial array (a view where possible)."""
        if len(index) != self.rank:
            raise ValidationError(
                f"expected {self.rank} indices, got {len(index)}")
        return self.values[tuple(index)]

    # -- numerics ----------------------------------------------------------

    def l2_norm(self) -> float:
        """L2 norm over all nominal components."""
        flat = self.storage_components()
        mult = self.storage_multiplicity().reshape((-1,) + (1,) * self.grid.d)
        return float(np.sqrt(np.sum(mult * flat ** 2) * self.grid.cell_volume))

    def component_means(self) -> np.ndarray:
        # correctly-rounded reduction: the convention every exact
        # mean-removal in the package drives to literal zero
        from ..runtime import dsum_exact
        flat = self.storage_components()
        return np.array([dsum_exact(c) / c.size for c in flat])

    def check_mean_zero(self) -> None:
        """Validate the tag: each stored component's cell average must not
        exceed ``MEAN_ZERO_RTOL`` times that component's L2 norm."""
        flat = self.storage_components()
        means = np.abs(self.component_means())
        vol = self.grid.cell_volume
        norms = np.sqrt(np.sum(flat ** 2, axis=tuple(range(1, flat.ndim))) * vol)
        bad = means > MEAN_ZERO_RTOL * norms
        if np.any(bad):
            i = int(np.argmax(bad))
            raise ValidationError(
                f"component {i} tagged mean-zero has average {means[i]:.3e} "
                f"exceeding {MEAN_ZERO_RTOL:g} * L2 norm {norms[i]:.3e}")

    def copy(self):
        out = type(self)(self.grid, self.values.copy())
        out.mean_zero = self.mean_zero
        return out

    def __repr__(self) -> str:
        tag = ", mean_zero" if self.mean_zero else ""
        return f"{type(self).__name__}(d={self.grid.d}, n={self.grid.n}{tag})"


class ScalarField(Field):
    rank = 0

    @classmethod
    def storage_shape(cls, d: int) -> tuple:
        return ()

    @classmethod
    def zeros(cls, grid: TorusGrid) -> "ScalarField":
        return cls(grid, np.zeros(grid.spatial_shape))


class VectorField(Field):
    rank = 1

    @classmethod
    def storage_shape(cls, d: int) -> tuple:
        return (d,)

    @classmethod
    def zeros(cls, grid: TorusGrid) -> "VectorField":
        return cls(grid, np.zeros((grid.d,) + grid.spatial_shape))


class MatrixField(Field):
    rank = 2

    @classmethod
    def storage_shape(cls, d: int) -> tuple:
        return (d, d)

    @classmethod
    def constant(cls, grid: TorusGrid, matrix: np.ndarray) -> "MatrixField":
        matrix = np.asarray(matrix, dtype=float)
        if matrix.shape != (grid.d, grid.d):
            raise ValidationError(
                f"matrix must be {grid.d}x{grid.d}, got {matrix.shape}")
        values = np.broadcast_to(
            matrix.reshape((grid.d, grid.d) + (1,) * grid.d),
            (grid.d, grid.d) + grid.spatial_shape).copy()
        return cls(grid, values)


class Rank3Field(Field):
    """Dense rank-3 field, no index symmetry assumed."""

    rank = 3

    @classmethod
    def storage_shape(cls, d: int) -> tuple:
        return (d, d, d)


class SymRank3Field(Field):
    """Rank-3 field totally symmetric in its indices.

    Stores one array per triple i <= j <= k, in the order of
    :func:`sym_triples`.
    """

    rank = 3

    def __init__(self, grid, values, mean_zero=False):
        self._triples = sym_triples(grid.d)
        self._slot = {t: s for s, t in enumerate(self._triples)}
        super().__init__(grid, values, mean_zero)

    @classmethod
    def storage_shape(cls, d: int) -> tuple:
        return (len(sym_triples(d)),)

    @property
    def triples(self) -> list:
        return list(self._triples)

    def storage_multiplicity(self) -> np.ndarray:
        # A triple with r distinct index values stands for 3!/(repeats)
        # nominal components.
        mult = []
        for t in self._triples:
            perms = {p for p in itertools.permutations(t)}
            mult.append(float(len(perms)))
        return np.array(mult)

    def component(self, i: int, j: int, k: int) -> np.ndarray:
        return self.values[self._slot[tuple(sorted((i, j, k)))]]

    @classmethod
    def from_dense(cls, grid: TorusGrid, dense: np.ndarray,
                   mean_zero: bool = False) -> "SymRank3Field":
        """Symmetrize a dense (d, d, d, ...) array and pack it."""
        d = grid.d
        triples = sym_triples(d)
        out = np.zeros((len(triples),) + grid.spatial_shape)
        for s, (i, j, k) in enumerate(triples):
            acc = np.zeros(grid.spatial_shape)
            # permutations() yields 6 tuples, repeating coincident indices,
            # so the plain mean is the exact symmetrization.
            for p in itertools.permutations((i, j, k)):
                acc += dense[p]
            out[s] = acc / 6.0
        return cls(grid, out, mean_zero)


class SkewRank3Field(Field):
    """Rank-3 field antisymmetric in its last two indices.

    Stores ``values[i, p]`` for the pairs ``(j, k), j < k`` of
    :func:`skew_pairs`; components with j == k are identically zero.
    """

    rank = 3

    def __init__(self, grid, values, mean_zero=False):
        self._pairs = skew_pairs(grid.d)
        self._slot = {p: s for s, p in enumerate(self._pairs)}
        super().__init__(grid, values, mean_zero)

    @classmethod
    def storage_shape(cls, d: int) -> tuple:
        return (d, len(skew_pairs(d)))

    @property
    def pairs(self) -> list:
        return list(self._pairs)

    def storage_multiplicity(self) -> np.ndarray:
        count = self.storage_components().shape[0]
        return np.full(count, 2.0)

    def component(self, i: int, j: int, k: int) -> np.ndarray:
        if j == k:
            return np.zeros(self.grid.spatial_shape)
        if j < k:
            return self.values[i, self._slot[(j, k)]]
        return -self.values[i, self._slot[(k, j)]]


class SkewRank4Field(Field):
    """Rank-4 field antisymmetric in its last two indices.

    Stores ``values[i, j, p]`` for pairs ``(k, l), k < l``.
    """

    rank = 4

    def __init__(self, grid, values, mean_zero=False):
        self._pairs = skew_pairs(grid.d)
        self._slot = {p: s for s, p in enumerate(self._pairs)}
        super().__init__(grid, values, mean_zero)

    @classmethod
    def storage_shape(cls, d: int) -> tuple:
        return (d, d, len(skew_pairs(d)))

    @property
    def pairs(self) -> list:
        return list(self._pairs)

    def storage_multiplicity(self) -> np.ndarray:
        count = self.storage_components().shape[0]
        return np.full(count, 2.0)

    def component(self, i: int, j: int, k: int, l: int) -> np.ndarray:
        if k == l:
            return np.zeros(self.grid.spatial_shape)
        if k < l:
            return self.values[i, j, self._slot[(k, l)]]
        return -self.values[i, j, self._slot[(l, k)]]
