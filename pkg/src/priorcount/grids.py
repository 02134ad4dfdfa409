"""Dense grid containers and their binary file format.

File layout (extension ``.ocpt``), all integers little-endian:

    bytes 0..7    magic ``OCPT\\x00\\x00\\x00\\x01``
    byte  8       dtype code: 0 = uint8, 1 = float32
    byte  9       ndim: 2 or 3
    next  4*ndim  dims, one u32 per axis (row-major order)
    rest          payload, row-major, little-endian scalars

A 2-d header is therefore 18 bytes and a 3-d header 22 bytes.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadMagic,
    IoFailure,
    TensorFormatError,
    TruncatedPayload,
    UnsupportedDtype,
)

MAGIC = b"OCPT\x00\x00\x00\x01"

_DTYPE_CODES = {0: np.dtype(np.uint8), 1: np.dtype(np.float32)}
_CODE_FOR_DTYPE = {v: k for k, v in _DTYPE_CODES.items()}


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr)
    if out is arr:
        out = arr.copy()
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Grid2D:
    """Immutable 2-d grid of uint8 or float32 scalars.

    uint8 grids consumed as masks must hold only 0/1; that rule is
    enforced where masks enter the system, not here, so the format can
    round-trip arbitrary u8 payloads.
    """

    data: np.ndarray  # (H, W)

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2:
            raise ValueError(f"Grid2D.data must be 2-d, got ndim={arr.ndim}")
        if arr.dtype not in (np.dtype(np.uint8), np.dtype(np.float32)):
            raise ValueError(f"Grid2D.data must be uint8 or float32, got {arr.dtype}")
        if arr.size == 0:
            raise ValueError("Grid2D.data must be non-empty")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def dims(self) -> tuple[int, int]:
        return self.data.shape  # type: ignore[return-value]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Grid2D):
            return NotImplemented
        return self.data.dtype == other.data.dtype and np.array_equal(self.data, other.data)

    def __hash__(self):
        return hash((self.data.shape, self.data.dtype.str, self.data.tobytes()))


@dataclass(frozen=True, eq=False)
class Grid3D:
    """Immutable 3-d grid (H, W, C) of float32 scalars."""

    data: np.ndarray  # (H, W, C)

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3:
            raise ValueError(f"Grid3D.data must be 3-d, got ndim={arr.ndim}")
        if arr.dtype != np.dtype(np.float32):
            raise ValueError(f"Grid3D.data must be float32, got {arr.dtype}")
        if arr.size == 0:
            raise ValueError("Grid3D.data must be non-empty")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape  # type: ignore[return-value]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Grid3D):
            return NotImplemented
        return np.array_equal(self.data, other.data)

    def __hash__(self):
        return hash((self.data.shape, self.data.dtype.str, self.data.tobytes()))


def encode_tensor(grid: Grid2D | Grid3D) -> bytes:
    """Serialize a grid to the binary layout documented in the module docstring."""
    arr = grid.data
    code = _CODE_FOR_DTYPE[arr.dtype]
    header = MAGIC + struct.pack("<BB", code, arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    little = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
    return header + little.tobytes(order="C")


def decode_tensor(blob: bytes) -> Grid2D | Grid3D:
    """Parse bytes produced by :func:`encode_tensor`.

    Raises BadMagic, UnsupportedDtype, or TruncatedPayload on malformed input.
    """
    if len(blob) < len(MAGIC):
        raise BadMagic("file shorter than magic header")
    if blob[: len(MAGIC)] != MAGIC:
        raise BadMagic(f"bad magic {blob[:len(MAGIC)]!r}")
    if len(blob) < len(MAGIC) + 2:
        raise TruncatedPayload("header ends before dtype/ndim bytes")
    code, ndim = struct.unpack_from("<BB", blob, len(MAGIC))
    if code not in _DTYPE_CODES:
        raise UnsupportedDtype(f"unknown dtype code {code}")
    if ndim not in (2, 3):
        raise UnsupportedDtype(f"unsupported rank {ndim}")
    dtype = _DTYPE_CODES[code]
    if ndim == 3 and dtype != np.dtype(np.float32):
        raise UnsupportedDtype("3-d grids must be float32")
    dims_off = len(MAGIC) + 2
    dims_end = dims_off + 4 * ndim
    if len(blob) < dims_end:
        raise TruncatedPayload("header ends inside the dims block")
    dims = struct.unpack_from(f"<{ndim}I", blob, dims_off)
    if any(d == 0 for d in dims):
        raise TensorFormatError(f"zero-sized axis in dims {dims}")
    n_scalars = int(np.prod(dims, dtype=np.int64))
    need = n_scalars * dtype.itemsize
    if len(blob) < dims_end + need:
        raise TruncatedPayload(
            f"payload holds {len(blob) - dims_end} bytes, header promises {need}"
        )
    flat = np.frombuffer(blob, dtype=dtype.newbyteorder("<"), count=n_scalars, offset=dims_end)
    arr = flat.reshape(dims).astype(dtype)
    return Grid2D(arr) if ndim == 2 else Grid3D(arr)


def write_tensor_file(path, grid: Grid2D | Grid3D) -> None:
    """Write a grid to ``path``; raises IoFailure on filesystem errors."""
    blob = encode_tensor(grid)
    try:
        with open(path, "wb") as fh:
            fh.write(blob)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_tensor_file(path) -> Grid2D | Grid3D:
    """Read a grid from ``path``; raises IoFailure on filesystem errors."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return decode_tensor(blob)
