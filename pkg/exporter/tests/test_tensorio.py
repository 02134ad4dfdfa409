"""Tensor file format: round trips and bit compatibility with the engine."""

import numpy as np
import pytest

from priorcount import grids as core_grids

from priorexport.tensorio import decode_tensor, encode_tensor, read_tensor, write_tensor


def test_round_trip_u8(tmp_path):
    arr = np.arange(12, dtype=np.uint8).reshape(3, 4)
    path = tmp_path / "t.ocpt"
    write_tensor(path, arr)
    back = read_tensor(path)
    assert back.dtype == np.uint8
    assert np.array_equal(back, arr)


def test_round_trip_f32_with_nan(tmp_path):
    arr = np.array([[1.5, np.nan], [np.inf, -0.0]], dtype=np.float32)
    path = tmp_path / "t.ocpt"
    write_tensor(path, arr)
    back = read_tensor(path)
    assert back.dtype == np.float32
    assert back.tobytes() == arr.tobytes()


def test_round_trip_3d(tmp_path):
    arr = np.random.default_rng(3).standard_normal((4, 5, 3)).astype(np.float32)
    path = tmp_path / "t.ocpt"
    write_tensor(path, arr)
    assert np.array_equal(read_tensor(path), arr)


def test_writer_rejects_bad_inputs():
    with pytest.raises(ValueError):
        encode_tensor(np.zeros((2, 2), dtype=np.float64))
    with pytest.raises(ValueError):
        encode_tensor(np.zeros((2, 2, 2), dtype=np.uint8))
    with pytest.raises(ValueError):
        encode_tensor(np.zeros((3,), dtype=np.uint8))
    with pytest.raises(ValueError):
        encode_tensor(np.zeros((0, 2), dtype=np.uint8))


def test_reader_rejects_bad_blobs():
    good = encode_tensor(np.ones((2, 2), dtype=np.uint8))
    with pytest.raises(ValueError):
        decode_tensor(b"XXXX\x00\x00\x00\x01" + good[8:])
    with pytest.raises(ValueError):
        decode_tensor(good[:-1])
    with pytest.raises(ValueError):
        decode_tensor(good[:8] + bytes([9]) + good[9:])


def test_engine_reads_exporter_files(tmp_path):
    rng = np.random.default_rng(11)
    cases = [
        rng.integers(0, 2, size=(7, 9)).astype(np.uint8),
        rng.standard_normal((6, 4)).astype(np.float32),
        rng.standard_normal((5, 5, 3)).astype(np.float32),
    ]
    for i, arr in enumerate(cases):
        path = tmp_path / f"x{i}.ocpt"
        write_tensor(path, arr)
        grid = core_grids.read_tensor_file(path)
        assert grid.data.dtype == arr.dtype
        assert grid.data.tobytes() == arr.tobytes()


def test_exporter_reads_engine_files(tmp_path):
    arr = np.random.default_rng(12).standard_normal((8, 3)).astype(np.float32)
    path = tmp_path / "y.ocpt"
    core_grids.write_tensor_file(path, core_grids.Grid2D(arr))
    back = read_tensor(path)
    assert np.array_equal(back, arr)


def test_byte_identical_encodings():
    arr = np.arange(24, dtype=np.float32).reshape(2, 3, 4)
    assert encode_tensor(arr) == core_grids.encode_tensor(core_grids.Grid3D(arr))
