import csv
import io
from pathlib import Path

from ptyremix.exceptions import FormatError
from ptyremix.models import Position, ScanGeometry
from ptyremix.tools.storage import read_bytes, write_text

HEADER = ["index", "row", "col"]


def positions_to_csv(geometry: ScanGeometry) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(HEADER)
    for index, (row, col) in enumerate(geometry.positions):
        writer.writerow([index, row, col])
    return buffer.getvalue()


def write_positions_csv(path: Path, geometry: ScanGeometry) -> None:
    write_text(path, positions_to_csv(geometry))


def read_positions_csv(path: Path) -> list[Position]:
    """Positions in file order; the index column must count up from 0."""
    try:
        text = read_bytes(path).decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"{path}: not UTF-8 text: {exc}") from exc
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    if not rows or [cell.strip() for cell in rows[0]] != HEADER:
        raise FormatError(f"{path}: expected header {','.join(HEADER)}")
    positions = []
    for line, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            index, r, c = (int(cell) for cell in row)
        except ValueError as exc:
            raise FormatError(f"{path}:{line}: {exc}") from exc
        if index != len(positions):
            raise FormatError(f"{path}:{line}: index {index} out of sequence")
        positions.append(Position(r, c))
    return positions
