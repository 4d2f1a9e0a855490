"""HGF1 on-disk format: golden bytes, round-trips, grid checks."""
import struct

import numpy as np
import pytest

from homoglab.errors import ValidationError
from homoglab.grid import (TorusGrid, ScalarField, VectorField, MatrixField,
                           SkewRank3Field, write_field, read_field)

from conftest import band_limited_values, make_rng


def test_scalar_golden_bytes(tmp_path):
    # header <4sIIdII then per-component f64 LE, first axis fastest
    g = TorusGrid(d=2, n=4, L=1.5)
    vals = np.arange(16, dtype=float).reshape(4, 4)
    path = tmp_path / "u.hgf1"
    write_field(path, ScalarField(g, vals))
    raw = path.read_bytes()
    want = struct.pack("<4sIIdII", b"HGF1", 2, 4, 1.5, 0, 1)
    want += vals.ravel(order="F").astype("<f8").tobytes()
    assert raw == want


def test_scalar_roundtrip_bitwise(tmp_path, grid2):
    vals = band_limited_values(grid2, cut=8, seed=5)
    path = tmp_path / "u.hgf1"
    write_field(path, ScalarField(grid2, vals))
    back = read_field(path)
    assert isinstance(back, ScalarField)
    assert back.grid == grid2
    assert np.array_equal(back.values, vals)


def test_vector_and_matrix_roundtrip(tmp_path, grid3):
    rng = make_rng(12)
    v = rng.standard_normal((grid3.d,) + grid3.spatial_shape)
    m = rng.standard_normal((grid3.d, grid3.d) + grid3.spatial_shape)
    pv, pm = tmp_path / "v.hgf1", tmp_path / "m.hgf1"
    write_field(pv, VectorField(grid3, v))
    write_field(pm, MatrixField(grid3, m))
    bv, bm = read_field(pv), read_field(pm)
    assert isinstance(bv, VectorField) and np.array_equal(bv.values, v)
    assert isinstance(bm, MatrixField) and np.array_equal(bm.values, m)


def test_skew_rank3_stores_unique_pairs_only(tmp_path, grid3):
    d = grid3.d
    rng = make_rng(3)
    stored = rng.standard_normal((d, d * (d - 1) // 2) + grid3.spatial_shape)
    field = SkewRank3Field(grid3, stored)
    path = tmp_path / "s.hgf1"
    write_field(path, field)
    raw = path.read_bytes()
    magic, dd, n, L, rank, count = struct.unpack("<4sIIdII", raw[:28])
    assert (magic, dd, n, rank) == (b"HGF1", d, grid3.n, 3)
    assert count == d * (d * (d - 1) // 2)
    assert len(raw) == 28 + count * grid3.cell_count * 8
    back = read_field(path)
    assert isinstance(back, SkewRank3Field)
    # structural antisymmetry in the trailing pair survives the roundtrip
    for i in range(d):
        for j in range(d):
            assert np.array_equal(back.component(i, j, j),
                                  np.zeros(grid3.spatial_shape))
            for k in range(j + 1, d):
                assert np.array_equal(back.component(i, j, k),
                                      -back.component(i, k, j))


def test_read_rejects_grid_mismatch(tmp_path, grid2):
    path = tmp_path / "u.hgf1"
    write_field(path, ScalarField(grid2, np.zeros(grid2.spatial_shape)))
    with pytest.raises(ValidationError):
        read_field(path, grid=TorusGrid(d=2, n=64, L=1.0))


def test_read_rejects_bad_magic(tmp_path, grid2):
    path = tmp_path / "u.hgf1"
    write_field(path, ScalarField(grid2, np.zeros(grid2.spatial_shape)))
    raw = bytearray(path.read_bytes())
    raw[:4] = b"XGF1"
    path.write_bytes(bytes(raw))
    with pytest.raises(ValidationError):
        read_field(path)
