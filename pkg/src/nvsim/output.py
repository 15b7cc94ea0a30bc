"""Result tables and their CSV/JSON serialization."""

from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import dataclass, field

import numpy as np

_HEADER_RE = re.compile(r"^(?P<name>.*)\((?P<unit>[^()]*)\)$")


@dataclass
class ResultTable:
    columns: list[str]
    units: list[str]
    rows: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=float).reshape(-1, len(self.columns))
        if len(self.units) != len(self.columns):
            raise ValueError("one unit string is required per column")
        if any(not u for u in self.units):
            raise ValueError("unit strings must be non-empty")

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self.columns.index(name)]

    def __len__(self):
        return self.rows.shape[0]


def _fmt(x: float) -> str:
    return format(x, ".12g")


def to_csv(table: ResultTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"{n}({u})" for n, u in zip(table.columns, table.units)])
    for row in table.rows:
        w.writerow([_fmt(float(x)) for x in row])
    return buf.getvalue()


def _json_number(x: float):
    x = float(x)
    if math.isfinite(x):
        return float(_fmt(x))
    return None  # JSON has no inf/nan


def to_json(table: ResultTable) -> str:
    doc = {
        "metadata": table.metadata,
        "columns": [{"name": n, "unit": u} for n, u in zip(table.columns, table.units)],
        "rows": [[_json_number(x) for x in row] for row in table.rows],
    }
    return json.dumps(doc, sort_keys=True, indent=1, allow_nan=False) + "\n"


def emit(table: ResultTable, fmt: str = "csv") -> bytes:
    """Serialize ``table`` as UTF-8 bytes in ``csv`` or ``json`` format."""
    if fmt == "csv":
        return to_csv(table).encode("utf-8")
    if fmt == "json":
        return to_json(table).encode("utf-8")
    raise ValueError(f"unknown output format {fmt!r}")


def read_csv(data: bytes | str) -> ResultTable:
    """Inverse of :func:`to_csv` (metadata is not stored in CSV)."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    reader = csv.reader(io.StringIO(data))
    header = next(reader)
    names, units = [], []
    for h in header:
        m = _HEADER_RE.match(h)
        if m is None:
            raise ValueError(f"malformed column header {h!r}")
        names.append(m["name"])
        units.append(m["unit"])
    rows = [[float(x) for x in r] for r in reader if r]
    return ResultTable(names, units, np.array(rows, dtype=float).reshape(-1, len(names)))
