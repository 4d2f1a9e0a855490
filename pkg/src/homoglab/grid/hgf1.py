"""HGF1 binary field format.

Layout: magic ``HGF1``, little-endian u32 d, u32 n, f64 L, u32 rank,
u32 component_count, then the stored components in order as f64, each
serialized x-fastest. component_count is the stored count, which for
packed antisymmetric or symmetric layouts is smaller than d^rank; the
(rank, count) pair identifies the container class on read.
"""

from __future__ import annotations

import struct

import numpy as np

from .torus import TorusGrid
from . import fields as F
from ..errors import ValidationError

MAGIC = b"HGF1"
_HEADER = struct.Struct("<4sIIdII")


def _class_for(d: int, rank: int, count: int):
    table = {
        (0, 1): F.ScalarField,
        (1, d): F.VectorField,
        (2, d * d): F.MatrixField,
    }
    if (rank, count) in table:
        return table[(rank, count)]
    if rank == 3:
        # d = 1 collapses dense and symmetric storage to one component;
        # dense wins the tie.
        if count == d ** 3:
            return F.Rank3Field
        if count == len(F.sym_triples(d)):
            return F.SymRank3Field
        if count == d * len(F.skew_pairs(d)):
            return F.SkewRank3Field
    if rank == 4 and count == d * d * len(F.skew_pairs(d)):
        return F.SkewRank4Field
    raise ValidationError(
        f"no field layout with rank {rank} and {count} components in d = {d}")


def write_field(path, field: F.Field) -> None:
    flat = field.storage_components()
    count = flat.shape[0]
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, field.grid.d, field.grid.n,
                              field.grid.L, field.rank, count))
        for comp in flat:
            fh.write(np.ascontiguousarray(
                comp.ravel(order="F"), dtype="<f8").tobytes())


def read_field(path, grid: TorusGrid = None) -> F.Field:
    """Read a field; if *grid* is given it must match the header."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ValidationError(f"{path}: truncated header")
        magic, d, n, L, rank, count = _HEADER.unpack(head)
        if magic != MAGIC:
            raise ValidationError(f"{path}: bad magic {magic!r}")
        file_grid = TorusGrid(int(d), int(n), float(L))
        if grid is not None and grid != file_grid:
            raise ValidationError(
                f"{path}: grid {file_grid!r} does not match expected {grid!r}")
        cls = _class_for(file_grid.d, int(rank), int(count))
        per_comp = file_grid.cell_count
        raw = fh.read(count * per_comp * 8)
        if len(raw) != count * per_comp * 8 or fh.read(1):
            raise ValidationError(f"{path}: data length does not match header")
    data = np.frombuffer(raw, dtype="<f8").astype(float)
    comps = data.reshape(count, per_comp)
    values = np.empty(cls.storage_shape(file_grid.d) + file_grid.spatial_shape)
    flat_view = values.reshape((count,) + file_grid.spatial_shape)
    for i in range(count):
        flat_view[i] = comps[i].reshape(file_grid.spatial_shape, order="F")
    return cls(file_grid, values)
