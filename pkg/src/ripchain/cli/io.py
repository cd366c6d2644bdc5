"""CSV tables and JSON run manifests.

Floats are written with ``repr`` so that every value parses back to the
identical double.  Files are UTF-8 with LF line endings and a header row.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

PROFILE_COLUMNS = ("time", "p", "observable", "value")
SERIES_COLUMNS = ("time", "site_or_bond", "observable", "value")
AGGREGATE_COLUMNS = ("gamma_or_mu", "xi", "j_star", "beta", "cc0")
PAIRS_COLUMNS = ("gamma_or_mu", "p", "cross_concurrence")


def format_value(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    return repr(float(x))


def parse_value(text: str, kind=float):
    if text == "":
        return None
    return kind(text)


def write_csv(path: Path, columns, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            if len(row) != len(columns):
                raise ValueError(f"row {row!r} does not match columns {columns}")
            w.writerow([format_value(v) for v in row])
    return path


def read_csv(path: Path, kinds) -> tuple[tuple, list]:
    """Read a table written by :func:`write_csv`; ``kinds`` types each column."""
    with open(path, encoding="utf-8", newline="") as fh:
        r = csv.reader(fh)
        header = tuple(next(r))
        if len(header) != len(kinds):
            raise ValueError(f"{path}: expected {len(kinds)} columns, found {header}")
        rows = [tuple(parse_value(v, k) for v, k in zip(row, kinds)) for row in r]
    return header, rows


def read_profiles(path):
    header, rows = read_csv(path, (float, int, str, float))
    if header != PROFILE_COLUMNS:
        raise ValueError(f"{path}: unexpected header {header}")
    return rows


def read_series(path):
    header, rows = read_csv(path, (float, int, str, float))
    if header != SERIES_COLUMNS:
        raise ValueError(f"{path}: unexpected header {header}")
    return rows


def read_aggregate(path):
    header, rows = read_csv(path, (float, float, float, float, float))
    if header != AGGREGATE_COLUMNS:
        raise ValueError(f"{path}: unexpected header {header}")
    return rows


def read_pairs(path):
    header, rows = read_csv(path, (float, int, float))
    if header != PAIRS_COLUMNS:
        raise ValueError(f"{path}: unexpected header {header}")
    return rows


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


@dataclass
class RunManifest:
    mode: str
    config_digest: str
    version: str
    out_dir: str
    elapsed_s: float = 0.0
    files: dict = field(default_factory=dict)
    failed_points: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    def add(self, path: Path):
        path = Path(path)
        self.files[path.relative_to(self.out_dir).as_posix()] = file_sha256(path)

    def to_dict(self) -> dict:
        return _jsonable({
            "mode": self.mode,
            "config_digest": self.config_digest,
            "version": self.version,
            "elapsed_s": self.elapsed_s,
            "files": dict(sorted(self.files.items())),
            "failed_points": self.failed_points,
            "notes": self.notes,
        })

    def write(self) -> Path:
        path = Path(self.out_dir) / "manifest.json"
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def write_json(path: Path, payload) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
