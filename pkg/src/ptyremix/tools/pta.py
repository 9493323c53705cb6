"""
PTA array container.

Layout (all little-endian):
    magic  b"PTYA"
    u16    version (1)
    u16    dtype (1 = float64, 2 = complex128 as interleaved re, im)
    u16    ndim
    u16    pad (0)
    u64    dims[ndim]
    payload, row-major
"""

import struct
from pathlib import Path

import numpy as np

from ptyremix.exceptions import FormatError
from ptyremix.tools.storage import read_bytes, write_bytes

MAGIC = b"PTYA"
VERSION = 1
DTYPE_REAL = 1
DTYPE_COMPLEX = 2

_HEADER = struct.Struct("<4sHHHH")
_NUMPY_DTYPES = {DTYPE_REAL: np.dtype("<f8"), DTYPE_COMPLEX: np.dtype("<c16")}


def encode_pta(array: np.ndarray) -> bytes:
    array = np.asarray(array)
    if array.ndim < 1:
        raise FormatError("PTA needs at least one dimension")
    code = DTYPE_COMPLEX if np.iscomplexobj(array) else DTYPE_REAL
    payload = np.ascontiguousarray(array, dtype=_NUMPY_DTYPES[code]).tobytes()
    header = _HEADER.pack(MAGIC, VERSION, code, array.ndim, 0)
    dims = struct.pack(f"<{array.ndim}Q", *array.shape)
    return header + dims + payload


def decode_pta(blob: bytes) -> np.ndarray:
    if len(blob) < _HEADER.size:
        raise FormatError("PTA file is shorter than its header")
    magic, version, code, ndim, pad = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise FormatError(f"bad PTA magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported PTA version {version}")
    if code not in _NUMPY_DTYPES:
        raise FormatError(f"unknown PTA dtype code {code}")
    if pad != 0 or ndim < 1:
        raise FormatError(f"malformed PTA header (ndim={ndim}, pad={pad})")

    offset = _HEADER.size + 8 * ndim
    if len(blob) < offset:
        raise FormatError("PTA file ends inside its dimension list")
    dims = struct.unpack_from(f"<{ndim}Q", blob, _HEADER.size)
    dtype = _NUMPY_DTYPES[code]
    expected = int(np.prod(dims, dtype=object)) * dtype.itemsize
    if len(blob) - offset != expected:
        raise FormatError(f"PTA payload is {len(blob) - offset} bytes, dims {dims} need {expected}")
    return np.frombuffer(blob, dtype=dtype, offset=offset).reshape(dims).copy()


def write_pta(path: Path, array: np.ndarray) -> None:
    write_bytes(path, encode_pta(array))


def read_pta(path: Path) -> np.ndarray:
    return decode_pta(read_bytes(path))
