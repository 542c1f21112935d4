"""Run reports: deterministic JSON with 17 significant digits and CSV helpers."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__


def _plain(obj):
    """Convert numpy scalars/arrays and tuples to JSON-native types."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, indent, level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return "null"
        return format(obj, ".17g")
    return json.dumps(obj)


def dumps(obj, indent: int = 2) -> str:
    """JSON text with every float written to 17 significant digits."""
    return _encode(_plain(obj), indent, 0) + "\n"


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


@dataclass
class RunReport:
    command: str
    spec_hash: str
    numerics: dict
    results: dict
    warnings: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    seed: int | None = None

    def body(self) -> dict:
        return {
            "tool": "hamindex",
            "version": __version__,
            "command": self.command,
            "spec_sha256": self.spec_hash,
            "seed": self.seed,
            "numerics": self.numerics,
            "results": self.results,
            "warnings": self.warnings,
        }

    def to_dict(self, timings: bool = True) -> dict:
        body = self.body()
        body["results_sha256"] = sha256_text(dumps(body))
        if timings:
            body["timings"] = self.timings
        return body

    def write(self, path, timings: bool = True) -> str:
        text = dumps(self.to_dict(timings))
        if path is None or str(path) == "-":
            sys.stdout.write(text)
        else:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def write_csv(path, header, rows) -> None:
    """Comma-separated with a header row and CRLF line ends."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format(v, ".17g") if isinstance(v, float) else v for v in row])


def write_trajectories(path, points, t: np.ndarray) -> None:
    """One row per (point, t) with columns ``t, point, x1 .. xd``."""
    rows = []
    d = None
    for cp in points:
        x = cp.point.trajectory(t)
        d = x.shape[1]
        for tk, xk in zip(t, x):
            rows.append([float(tk), cp.distinct_id, *map(float, xk)])
    d = d or 0
    write_csv(path, ["t", "point"] + [f"x{i + 1}" for i in range(d)], rows)
