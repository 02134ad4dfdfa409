"""Tensor container and binary format tests.

The byte-level fixtures here are frozen by hand from the format layout
(8-byte magic, dtype byte, rank byte, little-endian u32 dims, raw
row-major payload) and must never be regenerated from the encoder.
"""

import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as npst

from priorcount.errors import (
    BadMagic,
    IoFailure,
    TensorFormatError,
    TruncatedPayload,
    UnsupportedDtype,
)
from priorcount.grids import (
    MAGIC,
    Grid2D,
    Grid3D,
    decode_tensor,
    encode_tensor,
    read_tensor_file,
    write_tensor_file,
)

HEADER_2D = MAGIC + b"\x00\x02"


def test_magic_is_eight_bytes():
    assert len(MAGIC) == 8
    assert MAGIC.startswith(b"OCPT")


def test_single_pixel_u8_file_is_19_bytes():
    blob = encode_tensor(Grid2D(np.array([[7]], dtype=np.uint8)))
    assert len(blob) == 19
    assert blob == MAGIC + b"\x00\x02" + struct.pack("<2I", 1, 1) + b"\x07"


def test_two_by_two_u8_frozen_bytes():
    grid = Grid2D(np.array([[1, 0], [1, 1]], dtype=np.uint8))
    blob = encode_tensor(grid)
    expected = MAGIC + b"\x00\x02" + struct.pack("<2I", 2, 2) + bytes([1, 0, 1, 1])
    assert len(blob) == 22
    assert blob == expected


def test_decode_handbuilt_f32_blob():
    blob = MAGIC + b"\x01\x02" + struct.pack("<2I", 1, 2) + struct.pack("<2f", 0.5, 1.5)
    grid = decode_tensor(blob)
    assert isinstance(grid, Grid2D)
    assert grid.data.dtype == np.float32
    assert grid.data.tolist() == [[0.5, 1.5]]


def test_decode_handbuilt_3d_blob():
    blob = MAGIC + b"\x01\x03" + struct.pack("<3I", 1, 1, 2) + struct.pack("<2f", 0.25, 0.75)
    grid = decode_tensor(blob)
    assert isinstance(grid, Grid3D)
    assert grid.dims == (1, 1, 2)
    assert grid.data.tolist() == [[[0.25, 0.75]]]


def test_u8_payload_round_trips_arbitrary_values():
    arr = np.arange(256, dtype=np.uint8).reshape(16, 16)
    out = decode_tensor(encode_tensor(Grid2D(arr)))
    assert np.array_equal(out.data, arr)


def test_f32_special_values_round_trip_bitwise():
    arr = np.array([[np.nan, np.inf], [-np.inf, 0.0]], dtype=np.float32)
    out = decode_tensor(encode_tensor(Grid2D(arr)))
    assert out.data.tobytes() == arr.tobytes()


@settings(max_examples=60, deadline=None)
@given(
    npst.arrays(
        dtype=np.uint8,
        shape=npst.array_shapes(min_dims=2, max_dims=2, min_side=1, max_side=12),
        elements=st.integers(min_value=0, max_value=255),
    )
)
def test_round_trip_2d_u8(arr):
    grid = Grid2D(arr)
    out = decode_tensor(encode_tensor(grid))
    assert out == grid


@settings(max_examples=60, deadline=None)
@given(
    npst.arrays(
        dtype=np.float32,
        shape=npst.array_shapes(min_dims=2, max_dims=2, min_side=1, max_side=12),
        elements=st.floats(width=32, allow_nan=False, allow_infinity=False),
    )
)
def test_round_trip_2d_f32(arr):
    grid = Grid2D(arr)
    out = decode_tensor(encode_tensor(grid))
    assert out == grid


@settings(max_examples=40, deadline=None)
@given(
    npst.arrays(
        dtype=np.float32,
        shape=npst.array_shapes(min_dims=3, max_dims=3, min_side=1, max_side=6),
        elements=st.floats(width=32, allow_nan=False, allow_infinity=False),
    )
)
def test_round_trip_3d(arr):
    grid = Grid3D(arr)
    out = decode_tensor(encode_tensor(grid))
    assert out == grid


def test_bad_magic_rejected():
    with pytest.raises(BadMagic):
        decode_tensor(b"NOPE\x00\x00\x00\x01" + b"\x00\x02" + struct.pack("<2I", 1, 1) + b"\x00")
    with pytest.raises(BadMagic):
        decode_tensor(b"OCP")


def test_unknown_dtype_code_rejected():
    blob = MAGIC + b"\x02\x02" + struct.pack("<2I", 1, 1) + b"\x00"
    with pytest.raises(UnsupportedDtype):
        decode_tensor(blob)


def test_unsupported_rank_rejected():
    for rank in (0, 1, 4):
        blob = MAGIC + bytes([0, rank]) + struct.pack("<I", 1) * max(rank, 1) + b"\x00" * 8
        with pytest.raises(UnsupportedDtype):
            decode_tensor(blob)


def test_3d_u8_header_rejected():
    blob = MAGIC + b"\x00\x03" + struct.pack("<3I", 1, 1, 1) + b"\x00"
    with pytest.raises(UnsupportedDtype):
        decode_tensor(blob)


def test_truncations_rejected():
    full = MAGIC + b"\x00\x02" + struct.pack("<2I", 2, 2) + bytes([1, 0, 1, 1])
    with pytest.raises(TruncatedPayload):
        decode_tensor(full[:9])  # dtype byte present, rank byte cut
    with pytest.raises(TruncatedPayload):
        decode_tensor(full[:14])  # inside the dims block
    with pytest.raises(TruncatedPayload):
        decode_tensor(full[:-1])  # one payload byte short


def test_zero_axis_rejected():
    blob = MAGIC + b"\x00\x02" + struct.pack("<2I", 0, 3)
    with pytest.raises(TensorFormatError):
        decode_tensor(blob)


def test_grid2d_validation():
    with pytest.raises(ValueError):
        Grid2D(np.zeros((2, 2, 2), dtype=np.uint8))
    with pytest.raises(ValueError):
        Grid2D(np.zeros((2, 2), dtype=np.int32))
    with pytest.raises(ValueError):
        Grid2D(np.zeros((0, 2), dtype=np.uint8))


def test_grid3d_validation():
    with pytest.raises(ValueError):
        Grid3D(np.zeros((2, 2), dtype=np.float32))
    with pytest.raises(ValueError):
        Grid3D(np.zeros((2, 2, 3), dtype=np.float64))


def test_grids_are_immutable():
    grid = Grid2D(np.zeros((3, 3), dtype=np.uint8))
    with pytest.raises(ValueError):
        grid.data[0, 0] = 1
    src = np.zeros((3, 3), dtype=np.uint8)
    grid = Grid2D(src)
    src[0, 0] = 9  # later writes to the source must not leak in
    assert grid.data[0, 0] == 0


def test_equality_and_hash():
    a = Grid2D(np.ones((2, 3), dtype=np.uint8))
    b = Grid2D(np.ones((2, 3), dtype=np.uint8))
    c = Grid2D(np.ones((2, 3), dtype=np.float32))
    assert a == b and hash(a) == hash(b)
    assert a != c
    assert a != "not a grid"


def test_properties():
    g2 = Grid2D(np.zeros((4, 7), dtype=np.uint8))
    assert (g2.height, g2.width) == (4, 7)
    assert g2.dims == (4, 7)
    g3 = Grid3D(np.zeros((4, 7, 3), dtype=np.float32))
    assert (g3.height, g3.width, g3.channels) == (4, 7, 3)
    assert g3.dims == (4, 7, 3)


def test_file_round_trip(tmp_path):
    grid = Grid2D((np.arange(12, dtype=np.uint8) % 2).reshape(3, 4))
    path = tmp_path / "m.ocpt"
    write_tensor_file(path, grid)
    assert read_tensor_file(path) == grid


def test_io_failures(tmp_path):
    with pytest.raises(IoFailure):
        read_tensor_file(tmp_path / "missing.ocpt")
    with pytest.raises(IoFailure):
        write_tensor_file(tmp_path / "no" / "such" / "dir.ocpt", Grid2D(np.zeros((1, 1), dtype=np.uint8)))
