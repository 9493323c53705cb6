# models.py
"""
Core domain types: scan geometry, diffraction records and stacks.

Complex fields (objects, probes, exit waves) are plain 2-D complex128 numpy
arrays, made read-only by `utils.validators.as_complex_field`.
"""

import enum
import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterator, NamedTuple

import numpy as np

from ptyremix.exceptions import DataError, DimensionError, GeometryError
from ptyremix.utils.validators import require_finite


class Provenance(str, enum.Enum):
    real = "real"
    simulated = "simulated"

    @property
    def code(self) -> int:
        return 0 if self is Provenance.real else 1

    @classmethod
    def from_code(cls, code: int) -> "Provenance":
        if code == 0:
            return cls.real
        if code == 1:
            return cls.simulated
        raise ValueError(f"unknown provenance code {code}")


class ScanOrder(str, enum.Enum):
    raster = "raster"
    random_shuffle = "random_shuffle"


class Position(NamedTuple):
    row: int
    col: int


@dataclass(frozen=True)
class ScanGeometry:
    object_size: int
    probe_size: int
    step: int
    positions: tuple[Position, ...] = ()

    def __post_init__(self):
        if self.probe_size < 1 or self.object_size < 1:
            raise DimensionError(
                f"sizes must be positive: object_size={self.object_size}, probe_size={self.probe_size}"
            )
        if self.probe_size > self.object_size:
            raise DimensionError(f"probe_size {self.probe_size} exceeds object_size {self.object_size}")
        if self.step < 1:
            raise DimensionError(f"step must be >= 1, got {self.step}")

        positions = tuple(Position(int(r), int(c)) for r, c in self.positions)
        limit = self.object_size - self.probe_size
        for pos in positions:
            if not (0 <= pos.row <= limit and 0 <= pos.col <= limit):
                raise GeometryError(f"window at {tuple(pos)} leaves the {self.object_size}x{self.object_size} object")
        if len(set(positions)) != len(positions):
            raise GeometryError("scan positions must be unique")
        object.__setattr__(self, "positions", positions)

    def __len__(self) -> int:
        return len(self.positions)

    def __iter__(self) -> Iterator[Position]:
        return iter(self.positions)

    @property
    def overlap(self) -> float:
        return overlap_percent(self.probe_size, self.step)


@dataclass(frozen=True, eq=False)
class DiffractionRecord:
    position: Position
    provenance: Provenance
    intensity: np.ndarray

    def __post_init__(self):
        intensity = np.array(self.intensity, dtype=np.float64)
        if intensity.ndim != 2 or intensity.shape[0] != intensity.shape[1] or intensity.shape[0] < 1:
            raise DimensionError(f"intensity must be a square 2-D array, got shape {intensity.shape}")
        require_finite(intensity, "intensity")
        if np.any(intensity < 0):
            raise DataError(f"intensity at {tuple(self.position)} has negative values")
        intensity.flags.writeable = False
        object.__setattr__(self, "intensity", intensity)
        object.__setattr__(self, "position", Position(int(self.position[0]), int(self.position[1])))
        object.__setattr__(self, "provenance", Provenance(self.provenance))

    @property
    def size(self) -> int:
        return self.intensity.shape[0]


@dataclass(frozen=True, eq=False)
class DiffractionStack:
    probe_size: int
    records: tuple[DiffractionRecord, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.probe_size < 1:
            raise DimensionError(f"probe_size must be positive, got {self.probe_size}")
        records = tuple(self.records)
        for record in records:
            if record.size != self.probe_size:
                raise DimensionError(
                    f"record at {tuple(record.position)} is {record.size}x{record.size}, "
                    f"stack is {self.probe_size}x{self.probe_size}"
                )
        object.__setattr__(self, "records", records)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[DiffractionRecord]:
        return iter(self.records)

    def __getitem__(self, index: int) -> DiffractionRecord:
        return self.records[index]

    @property
    def positions(self) -> list[Position]:
        return [record.position for record in self.records]

    def count(self, provenance: Provenance) -> int:
        return sum(1 for record in self.records if record.provenance is provenance)

    def select(self, provenance: Provenance) -> "DiffractionStack":
        """Sub-stack holding only records of one provenance, order preserved."""
        return DiffractionStack(
            self.probe_size, tuple(r for r in self.records if r.provenance is provenance)
        )


def raster_geometry(object_size: int, probe_size: int, step: int) -> ScanGeometry:
    """Row-major raster of windows at multiples of `step` that stay inside the object."""
    if probe_size < 1 or probe_size > object_size or step < 1:
        raise DimensionError(
            f"invalid raster: object_size={object_size}, probe_size={probe_size}, step={step}"
        )
    axis = range(0, object_size - probe_size + 1, step)
    positions = tuple(Position(r, c) for r in axis for c in axis)
    return ScanGeometry(object_size, probe_size, step, positions)


def overlap_percent(probe_size: int, step: int) -> float:
    """Linear overlap between neighbouring windows; negative when they leave gaps."""
    if probe_size < 1:
        raise DimensionError(f"probe_size must be positive, got {probe_size}")
    return 100.0 * (probe_size - step) / probe_size


def infer_geometry(stack: DiffractionStack, object_size: int, step: int | None = None) -> ScanGeometry:
    """
    Rebuild the scan geometry of a stack.

    When `step` is not given it is the gcd of all position coordinates, which
    recovers the raster step for any raster scan that includes a non-origin
    window; a lone (0, 0) window falls back to the largest legal step.
    """
    if step is None:
        coords = [v for pos in stack.positions for v in pos if v != 0]
        step = reduce(math.gcd, coords) if coords else max(1, object_size - stack.probe_size + 1)
    return ScanGeometry(object_size, stack.probe_size, step, tuple(stack.positions))
