"""Binary tensor files in the counting engine's interchange format.

Layout: an 8-byte magic ("OCPT" plus a version word), one dtype code
byte (0 = uint8, 1 = float32), one rank byte (2 or 3), rank little-
endian uint32 axis lengths, then the row-major payload. uint8 is only
valid at rank 2; rank-3 tensors are always float32.
"""

import struct

import numpy as np

MAGIC = b"OCPT\x00\x00\x00\x01"
_DTYPE_U8 = 0
_DTYPE_F32 = 1


def _wire_dtype(arr: np.ndarray) -> int:
    if arr.ndim == 2 and arr.dtype == np.uint8:
        return _DTYPE_U8
    if arr.ndim in (2, 3) and arr.dtype == np.float32:
        return _DTYPE_F32
    raise ValueError(
        f"unsupported tensor: dtype {arr.dtype} with rank {arr.ndim} "
        "(uint8 rank 2, or float32 rank 2 or 3)"
    )


def encode_tensor(array) -> bytes:
    arr = np.asarray(array)
    code = _wire_dtype(arr)
    if any(s == 0 for s in arr.shape):
        raise ValueError(f"zero-size axis in shape {arr.shape}")
    wire = "<u1" if code == _DTYPE_U8 else "<f4"
    header = MAGIC + struct.pack("<BB", code, arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    return header + np.ascontiguousarray(arr).astype(wire, copy=False).tobytes()


def decode_tensor(blob: bytes) -> np.ndarray:
    if blob[:8] != MAGIC:
        raise ValueError(f"bad magic {blob[:8]!r}")
    if len(blob) < 10:
        raise ValueError("header truncated")
    code, ndim = blob[8], blob[9]
    if code not in (_DTYPE_U8, _DTYPE_F32):
        raise ValueError(f"unknown dtype code {code}")
    if ndim not in (2, 3):
        raise ValueError(f"unsupported rank {ndim}")
    if code == _DTYPE_U8 and ndim != 2:
        raise ValueError("uint8 tensors are rank 2 only")
    dims_end = 10 + 4 * ndim
    if len(blob) < dims_end:
        raise ValueError("dimension block truncated")
    dims = struct.unpack_from(f"<{ndim}I", blob, 10)
    if any(d == 0 for d in dims):
        raise ValueError(f"zero-size axis in dims {dims}")
    wire = np.dtype("<u1") if code == _DTYPE_U8 else np.dtype("<f4")
    n = 1
    for d in dims:
        n *= d
    if len(blob) - dims_end < n * wire.itemsize:
        raise ValueError(
            f"payload holds {len(blob) - dims_end} bytes, need {n * wire.itemsize}"
        )
    arr = np.frombuffer(blob, dtype=wire, count=n, offset=dims_end).reshape(dims)
    return arr.astype(wire.newbyteorder("="), copy=True)


def write_tensor(path, array) -> None:
    blob = encode_tensor(array)
    with open(path, "wb") as fh:
        fh.write(blob)


def read_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return decode_tensor(fh.read())
