# dyadlab/emit.py
"""
Bit-stable writers for everything the experiments emit.

- fixed column order (the caller's header)
- exact rationals as strings, floats at 17 significant digits
- LF line endings, UTF-8
"""
from __future__ import annotations

import csv
import json
import logging
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)


def format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    return str(value)


def jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        # round-trips through 17 significant digits, same as the CSV cells
        return float(format(float(value), ".17g"))
    if isinstance(value, Path):
        return str(value)
    if value is None or isinstance(value, str):
        return value
    return str(value)


def write_csv(
    path: str | Path,
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    preamble: Sequence[str] = (),
) -> Path:
    """Write rows under `header`; `preamble` lines go first, prefixed with '#'."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        for line in preamble:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(header))
        count = 0
        for row in rows:
            writer.writerow([format_cell(c) for c in row])
            count += 1
    logger.info("wrote %s (%d rows)", path, count)
    return path


def dumps_json(data: Any) -> str:
    return json.dumps(jsonable(data), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_json(path: str | Path, data: Any) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_json(data))
    logger.info("wrote %s", path)
    return path


def emit(data: Any, fmt: str, path: str | Path) -> Path:
    """
    Route `data` to the right writer.
    CSV expects an object with `csv_header()` and `csv_rows()` (optionally `csv_preamble()`);
    JSON expects anything `to_dict()`-able or plain JSON data.
    """
    if fmt == "csv":
        preamble = data.csv_preamble() if hasattr(data, "csv_preamble") else ()
        return write_csv(path, data.csv_header(), data.csv_rows(), preamble)
    if fmt == "json":
        payload = data.to_dict() if hasattr(data, "to_dict") else data
        return write_json(path, payload)
    raise ValueError(f"unknown format {fmt!r}")
