"""
PTD diffraction stack container.

Layout (all little-endian):
    magic  b"PTYD"
    u16    version (1)
    u32    S
    u64    record count
    per record:
        i32 row, i32 col, u8 provenance (0 real, 1 simulated), 3 pad bytes,
        S*S float64 intensities, row-major
"""

import struct
from pathlib import Path

import numpy as np

from ptyremix.exceptions import DataError, DimensionError, FormatError, NumericalError
from ptyremix.models import DiffractionRecord, DiffractionStack, Position, Provenance
from ptyremix.tools.storage import read_bytes, write_bytes

MAGIC = b"PTYD"
VERSION = 1

_HEADER = struct.Struct("<4sHIQ")
_RECORD = struct.Struct("<iiB3x")


def encode_ptd(stack: DiffractionStack) -> bytes:
    size = stack.probe_size
    parts = [_HEADER.pack(MAGIC, VERSION, size, len(stack))]
    for record in stack.records:
        parts.append(_RECORD.pack(record.position.row, record.position.col, record.provenance.code))
        parts.append(np.ascontiguousarray(record.intensity, dtype="<f8").tobytes())
    return b"".join(parts)


def decode_ptd(blob: bytes) -> DiffractionStack:
    if len(blob) < _HEADER.size:
        raise FormatError("PTD file is shorter than its header")
    magic, version, size, count = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise FormatError(f"bad PTD magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported PTD version {version}")
    if size < 1:
        raise FormatError("PTD pattern size must be positive")

    pattern_bytes = 8 * size * size
    record_bytes = _RECORD.size + pattern_bytes
    if len(blob) != _HEADER.size + count * record_bytes:
        raise FormatError(f"PTD file length does not match {count} records of {size}x{size}")

    records = []
    offset = _HEADER.size
    for index in range(count):
        row, col, code = _RECORD.unpack_from(blob, offset)
        offset += _RECORD.size
        intensity = np.frombuffer(blob, dtype="<f8", count=size * size, offset=offset).reshape(size, size)
        offset += pattern_bytes
        try:
            records.append(DiffractionRecord(Position(row, col), Provenance.from_code(code), intensity))
        except (ValueError, DataError, DimensionError, NumericalError) as exc:
            raise FormatError(f"PTD record {index}: {exc}") from exc
    return DiffractionStack(size, tuple(records))


def write_ptd(path: Path, stack: DiffractionStack) -> None:
    write_bytes(path, encode_ptd(stack))


def read_ptd(path: Path) -> DiffractionStack:
    return decode_ptd(read_bytes(path))
