import numpy as np

from ptyremix.models import DiffractionRecord, DiffractionStack, Position, Provenance


def random_field(rng: np.random.Generator, rows: int, cols: int | None = None) -> np.ndarray:
    cols = rows if cols is None else cols
    return rng.normal(size=(rows, cols)) + 1j * rng.normal(size=(rows, cols))


def unit_field(rng: np.random.Generator, size: int) -> np.ndarray:
    """Random phase-only field."""
    return np.exp(1j * rng.uniform(-1.0, 1.0, size=(size, size)))


def smooth_bump(size: int, amplitude: float, width: float | None = None) -> np.ndarray:
    """Centred Gaussian phase bump, used to corrupt initial estimates."""
    width = size / 5.0 if width is None else width
    rows, cols = np.indices((size, size), dtype=np.float64)
    center = (size - 1) / 2.0
    return amplitude * np.exp(-((rows - center) ** 2 + (cols - center) ** 2) / (2.0 * width ** 2))


def random_stack(rng: np.random.Generator, size: int, count: int) -> DiffractionStack:
    records = []
    for index in range(count):
        provenance = Provenance.real if rng.integers(2) == 0 else Provenance.simulated
        position = Position(int(rng.integers(-1000, 1000)), index)
        records.append(DiffractionRecord(position, provenance, rng.exponential(size=(size, size))))
    return DiffractionStack(size, tuple(records))
