"""Periodic torus grid and cached spectral machinery.

All fields live on a cubic lattice of cell centers ``x_j = (j + 1/2) h``
on the torus ``[0, L)^d``. Spatial axes are ordered ``(x, y, z)`` and
spectral arrays use the real-FFT layout (last axis halved).
"""

from __future__ import annotations

import numpy as np
import scipy.fft as _fft

from .. import runtime
from ..errors import ValidationError


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


class TorusGrid:
    """Cubic periodic grid in dimension d with n cells per side.

    Parameters
    ----------
    d : int
        Spatial dimension, 1, 2 or 3.
    n : int
        Cells per side; a power of two, at least 4.
    L : float
        Physical side length. The cell size is ``h = L / n`` exactly.

    Notes
    -----
    Spectral derivative multipliers zero the Nyquist mode so that real
    fields stay real and derivative operators are exactly skew-adjoint.
    Wave vectors for norms keep the Nyquist mode (integer frequencies in
    ``(-n/2, n/2]``).
    """

    def __init__(self, d: int, n: int, L: float = 1.0):
        if d not in (1, 2, 3):
            raise ValidationError(f"dimension must be 1, 2 or 3, got {d}")
        if not _is_power_of_two(n) or n < 4:
            raise ValidationError(f"n must be a power of two >= 4, got {n}")
        if not (L > 0.0 and np.isfinite(L)):
            raise ValidationError(f"L must be positive and finite, got {L}")
        self.d = d
        self.n = n
        self.L = float(L)
        self.h = self.L / n

        # Integer frequencies per axis; last axis in rfft layout.
        freq_full = np.fft.fftfreq(n, d=1.0 / n)            # 0..n/2-1, -n/2..-1
        freq_full[n // 2] = n // 2                           # Nyquist as +n/2
        freq_half = np.arange(n // 2 + 1, dtype=float)       # rfft axis

        scale = 2.0 * np.pi / self.L
        self._k_full = []      # symbol 2*pi*k/L, Nyquist kept
        self._k_deriv = []     # same, Nyquist zeroed
        for axis in range(d):
            ints = freq_half if axis == d - 1 else freq_full
            shape = [1] * d
            shape[axis] = ints.size
            kf = (scale * ints).reshape(shape)
            kd = kf.copy()
            idx = [slice(None)] * d
            if axis == d - 1:
                idx[axis] = slice(-1, None)
            else:
                idx[axis] = slice(n // 2, n // 2 + 1)
            kd[tuple(idx)] = 0.0
            self._k_full.append(kf)
            self._k_deriv.append(kd)

        self.k2_full = sum(kf ** 2 for kf in self._k_full)
        self.lap_symbol = sum(kd ** 2 for kd in self._k_deriv)

        # Parseval multiplicity for the halved last axis: self-conjugate
        # columns (index 0 and the Nyquist column) count once, others twice.
        mult = np.full(n // 2 + 1, 2.0)
        mult[0] = 1.0
        mult[-1] = 1.0
        shape = [1] * d
        shape[-1] = mult.size
        self.parseval_mult = mult.reshape(shape)

    # -- FFT plumbing ---------------------------------------------------

    @property
    def spatial_shape(self) -> tuple:
        return (self.n,) * self.d

    @property
    def spectral_shape(self) -> tuple:
        return (self.n,) * (self.d - 1) + (self.n // 2 + 1,)

    @property
    def cell_count(self) -> int:
        return self.n ** self.d

    @property
    def cell_volume(self) -> float:
        return self.h ** self.d

    def rfftn(self, values: np.ndarray) -> np.ndarray:
        return _fft.rfftn(values, axes=tuple(range(-self.d, 0)),
                          workers=runtime.get_workers())

    def irfftn(self, spectrum: np.ndarray) -> np.ndarray:
        return _fft.irfftn(spectrum, s=self.spatial_shape,
                           axes=tuple(range(-self.d, 0)),
                           workers=runtime.get_workers())

    def k_deriv(self, axis: int) -> np.ndarray:
        return self._k_deriv[axis]

    def k_full(self, axis: int) -> np.ndarray:
        return self._k_full[axis]

    # -- geometry -------------------------------------------------------

    def axis_coords(self) -> np.ndarray:
        return (np.arange(self.n) + 0.5) * self.h

    def coordinate(self, axis: int) -> np.ndarray:
        """Cell-center coordinate along *axis*, broadcast to the full grid."""
        x = self.axis_coords()
        shape = [1] * self.d
        shape[axis] = self.n
        return np.broadcast_to(x.reshape(shape), self.spatial_shape)

    def distance2(self, center, periodic: bool = True) -> np.ndarray:
        """Squared distance from *center* to every cell center.

        With ``periodic=True`` the torus (wrapped) distance is used.
        """
        center = np.asarray(center, dtype=float)
        if center.shape != (self.d,):
            raise ValidationError(f"center must have shape ({self.d},)")
        total = np.zeros(self.spatial_shape)
        x = self.axis_coords()
        for axis in range(self.d):
            delta = x - center[axis]
            if periodic:
                delta = (delta + self.L / 2.0) % self.L - self.L / 2.0
            shape = [1] * self.d
            shape[axis] = self.n
            total = total + delta.reshape(shape) ** 2
        return total

    def ball_mask(self, center, radius: float, periodic: bool = True) -> np.ndarray:
        """Boolean mask of cells with center within *radius* of *center*."""
        if radius <= 0:
            raise ValidationError(f"ball radius must be positive, got {radius}")
        return self.distance2(center, periodic=periodic) <= radius ** 2

    @property
    def center(self) -> np.ndarray:
        return np.full(self.d, self.L / 2.0)

    # -- identity -------------------------------------------------------

    def __eq__(self, other) -> bool:
        return (isinstance(other, TorusGrid)
                and self.d == other.d and self.n == other.n and self.L == other.L)

    def __hash__(self) -> int:
        return hash((self.d, self.n, self.L))

    def __repr__(self) -> str:
        return f"TorusGrid(d={self.d}, n={self.n}, L={self.L})"
