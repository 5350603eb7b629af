"""Export utilities for result files and convergence records."""

import csv
import io
import math
import sys
from pathlib import Path
from typing import Optional, Union

from src.core.harness import ConvergenceRecord
from src.utils.formats import ResultFile, parse_result, serialize_model

CSV_COLUMNS = (
    "n",
    "moment_error",
    "entropy_gap",
    "relative_entropy",
    "trace_distance",
    "pinsker_mixed_bound",
    "identity_residual",
)


def export_result(result: ResultFile, output_path: Optional[Union[str, Path]] = None) -> str:
    """Write a result file, or print it when no path is given.

    Args:
        result: ResultFile to serialize
        output_path: Destination file (default: standard output)

    Returns:
        The serialized JSON text

    Raises:
        OSError: If the file cannot be written
    """
    text = serialize_model(result)
    if output_path is None:
        sys.stdout.write(text)
    else:
        path = Path(output_path) if isinstance(output_path, str) else output_path
        path.write_text(text, encoding="utf-8")
    return text


def read_result(path: Union[str, Path]) -> ResultFile:
    path = Path(path) if isinstance(path, str) else path
    return parse_result(path.read_text(encoding="utf-8"))


def convergence_csv(record: ConvergenceRecord) -> str:
    """Render a convergence record as CSV text with a header row."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in record.rows:
        writer.writerow([_format_value(getattr(row, column)) for column in CSV_COLUMNS])
    return buffer.getvalue()


def export_convergence_csv(record: ConvergenceRecord, output_path: Optional[Union[str, Path]] = None) -> str:
    """Write a convergence record as CSV, or print it when no path is given.

    Raises:
        OSError: If the file cannot be written
    """
    text = convergence_csv(record)
    if output_path is None:
        sys.stdout.write(text)
    else:
        path = Path(output_path) if isinstance(output_path, str) else output_path
        path.write_text(text, encoding="utf-8")
    return text


def _format_value(value: Optional[Union[int, float]]) -> str:
    """Format a cell so that float(cell) restores the value exactly.

    Args:
        value: Number, or None for an unavailable entry

    Returns:
        repr of the number, 'inf' / '-inf' for infinities, 'nan' for None
    """
    if value is None:
        return "nan"
    if isinstance(value, int):
        return str(value)
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return repr(float(value))
