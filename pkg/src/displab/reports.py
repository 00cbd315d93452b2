"""Report persistence: JSON with stable key order, CSV tables, field manifests."""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field, is_dataclass
from enum import Enum
from fractions import Fraction
from pathlib import Path

import numpy as np

SCHEMA_VERSION = "1"


def jsonable(obj):
    """Convert numbers, enums, fractions, arrays and dataclasses to plain JSON values."""
    if is_dataclass(obj) and not isinstance(obj, type):
        return jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, Fraction):
        return str(obj) if obj.denominator != 1 else int(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, indent=2)


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj) + "\n")
    return path


def write_csv(path, rows: list[dict], columns: list[str] | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = [jsonable(r) for r in rows]
    columns = columns or sorted({k for r in rows for k in r})
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, quoting=csv.QUOTE_MINIMAL)
        w.writeheader()
        for r in rows:
            w.writerow({c: r.get(c, "") for c in columns})
    return path


def read_csv(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


@dataclass
class EstimateReport:
    """Outcome of one experiment; deterministic apart from ``wall_clock``."""

    name: str
    config: dict
    results: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)
    passed: bool | None = None
    warnings: list = field(default_factory=list)
    schema: str = SCHEMA_VERSION
    version: str = ""
    wall_clock: float = 0.0

    def to_json(self, *, include_clock: bool = True) -> str:
        d = jsonable(self)
        if not include_clock:
            d.pop("wall_clock")
        return json.dumps(d, sort_keys=True, indent=2)


class Stopwatch:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        return False


def write_field(directory, field_) -> Path:
    """One CSV per frame (``r, re, im``) plus ``manifest.json`` with times, dim and alpha."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = []
    for i, fr in enumerate(field_.frames):
        name = f"frame_{i:05d}.csv"
        rows = [{"r": r, "re": v.real, "im": v.imag} for r, v in zip(fr.grid.nodes, fr.values)]
        write_csv(directory / name, rows, ["r", "re", "im"])
        names.append(name)
    manifest = {"times": field_.times, "dim": field_.dim, "alpha": field_.params.alpha,
                "gamma": field_.params.gamma, "frames": names}
    return write_json(directory / "manifest.json", manifest)


def read_field_values(directory) -> tuple[dict, np.ndarray, np.ndarray]:
    """Manifest, radii and the ``[frames, r]`` complex values written by :func:`write_field`."""
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    frames = []
    r = None
    for name in manifest["frames"]:
        rows = read_csv(directory / name)
        r = np.array([float(x["r"]) for x in rows])
        frames.append(np.array([float(x["re"]) + 1j * float(x["im"]) for x in rows]))
    return manifest, r, np.stack(frames)
