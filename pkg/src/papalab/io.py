"""Result records and CSV/JSON writers with byte-stable output."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence, Union

import numpy as np


class OutputError(OSError):
    """Writing a result failed; carries the offending path."""

    def __init__(self, path, cause):
        super().__init__(f"cannot write {path}: {cause}")
        self.path = str(path)


FORMAT_VERSION = "papalab-results/1"


@dataclass
class Metric:
    """One reported quantity.

    ``threshold`` is the gate it is compared against (a KS critical value or
    an allowed deviation from ``reference``); ``passed`` is ``None`` for
    metrics that are reported but not gated.
    """

    name: str
    value: float
    std_error: Optional[float] = None
    reference: Optional[float] = None
    threshold: Optional[float] = None
    passed: Optional[bool] = None

    def __post_init__(self):
        self.value = float(self.value)
        for name in ("std_error", "reference", "threshold"):
            v = getattr(self, name)
            if v is not None:
                setattr(self, name, float(v))
        if self.passed is not None:
            self.passed = bool(self.passed)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "std_error": self.std_error,
            "reference": self.reference,
            "threshold": self.threshold,
            "passed": self.passed,
        }


@dataclass
class ResultRecord:
    experiment: str
    config_hash: str
    metrics: list = field(default_factory=list)
    wall_time: float = 0.0
    format_version: str = FORMAT_VERSION
    # plot-ready data (curve, path) written by the CSV format; not part of the JSON payload
    table: Any = None

    @property
    def passed(self) -> bool:
        """False if any gated metric failed."""
        return all(m.passed is not False for m in self.metrics)

    def to_dict(self) -> dict:
        # wall time stays out of the payload so reruns are byte-identical
        return {
            "experiment": self.experiment,
            "config_hash": self.config_hash,
            "format_version": self.format_version,
            "metrics": [m.to_dict() for m in self.metrics],
            "passed": self.passed,
        }

    def columns(self) -> list:
        return ["name", "value", "std_error", "reference", "threshold", "passed"]

    def rows(self):
        for m in self.metrics:
            yield ["" if v is None else v for v in m.to_dict().values()]


def _cell(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v) or math.isinf(v):
            return repr(v)
        if v == int(v) and abs(v) < 2**53:
            # keep integral floats recognisable as floats
            return f"{v:.1f}"
        return f"{v:.17g}"
    return str(v)


def csv_text(columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def emit_csv(data, destination: Union[str, Path]) -> Path:
    """Write anything exposing ``columns()`` and ``rows()`` as CSV (17 significant digits)."""
    text = csv_text(data.columns(), data.rows())
    return _write(destination, text)


def read_csv(source: Union[str, Path]) -> tuple:
    """``(header, rows)`` with every cell left as a string."""
    with open(source, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader]


def _jsonable(v: Any):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    return v


def json_text(payload: dict) -> str:
    return json.dumps(_jsonable(payload), sort_keys=True, indent=2) + "\n"


def emit_json(record, destination: Union[str, Path]) -> Path:
    """Write ``record.to_dict()`` (or a plain dict) as JSON with sorted keys."""
    payload = record.to_dict() if hasattr(record, "to_dict") else record
    return _write(destination, json_text(payload))


def _write(destination, text: str) -> Path:
    path = Path(destination)
    try:
        path.write_text(text)
    except OSError as exc:
        raise OutputError(path, exc.strerror or exc) from exc
    return path


def read_moment_curve(source: Union[str, Path]):
    """Inverse of :func:`emit_csv` for a :class:`~papalab.stats.MomentCurve`."""
    from .stats import MomentCurve

    header, rows = read_csv(source)
    expected = ["n", "q", "estimate", "std_error", "replicas"]
    if header != expected:
        raise ValueError(f"not a moment curve file: header {header}, expected {expected}")
    return MomentCurve.from_rows(rows)
