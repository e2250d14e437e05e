"""Design files: CSV point tables with an optional JSON sidecar.

A design CSV has a header ``x1,...,xd`` and one row per point, written with
17 significant digits so values round-trip exactly.  Lines starting with
``#`` are comments.  The sidecar is a flat JSON object with keys
``type, n, d, v, delta, m, criterion, value, seed`` (unused keys are null).
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from .design_core import Design
from .errors import ValidationError
from .lattice_designs import LatticeSpec
from .rlhd import RlhdSpec

SIDECAR_KEYS = ("type", "n", "d", "v", "delta", "m", "criterion", "value", "seed")


def _fmt(x: float) -> str:
    return "%.17g" % x


def format_table(header, rows, comment: str = None) -> str:
    """CSV text with an optional leading ``# comment`` line; floats at 17 digits."""
    buf = io.StringIO()
    if comment:
        buf.write(f"# {comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


def write_text(path, text: str) -> None:
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def design_csv(points, comment: str = None) -> str:
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    header = [f"x{k + 1}" for k in range(pts.shape[1])]
    return format_table(header, ([float(x) for x in row] for row in pts), comment)


def write_design(path, design, comment: str = None) -> None:
    pts = design.points if isinstance(design, Design) else design
    write_text(path, design_csv(pts, comment))


def read_table(path) -> tuple[list[str], np.ndarray]:
    """Header and float matrix of a CSV file, skipping ``#`` lines."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from None
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ValidationError(f"{path} is empty")
    rows = list(csv.reader(lines))
    header = [h.strip() for h in rows[0]]
    try:
        data = np.array([[float(x) for x in r] for r in rows[1:]], dtype=np.float64)
    except ValueError as exc:
        raise ValidationError(f"{path}: {exc}") from None
    if data.size == 0:
        data = np.zeros((0, len(header)))
    if data.ndim != 2 or data.shape[1] != len(header):
        raise ValidationError(f"{path}: ragged rows")
    return header, data


def read_design(path) -> np.ndarray:
    header, data = read_table(path)
    expected = [f"x{k + 1}" for k in range(len(header))]
    if header != expected:
        raise ValidationError(f"{path}: header must be {','.join(expected)}")
    return data


def read_column(path) -> np.ndarray:
    """Single-column CSV (with header) as a vector."""
    _, data = read_table(path)
    if data.shape[1] != 1:
        raise ValidationError(f"{path}: expected one column, found {data.shape[1]}")
    return data[:, 0]


def sidecar_dict(spec=None, criterion=None, value=None, seed=None, **extra) -> dict:
    out = dict.fromkeys(SIDECAR_KEYS)
    if spec is not None:
        out.update(spec.to_dict())
    out["criterion"] = None if criterion is None else str(getattr(criterion, "value", criterion))
    if value is not None and math.isfinite(value):
        out["value"] = float(value)
    out["seed"] = seed
    out.update(extra)
    return out


def write_sidecar(path, meta: dict) -> None:
    Path(path).write_text(json.dumps(meta, indent=2, sort_keys=False) + "\n")


def read_sidecar(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read sidecar {path}: {exc}") from None


def spec_from_sidecar(meta: dict):
    """LatticeSpec or RlhdSpec described by a sidecar dict."""
    kind = meta.get("type")
    try:
        if kind == "rlhd":
            return RlhdSpec(int(meta["n"]), int(meta["m"]), meta["v"], meta.get("delta"))
        if kind in ("llhd", "plhd", "lattice"):
            delta = meta.get("delta")
            if delta is not None:
                delta = [Fraction(s) if isinstance(s, str) else s for s in delta]
            return LatticeSpec(int(meta["n"]), meta["v"], delta)
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"incomplete sidecar: {exc}") from None
    raise ValidationError(f"sidecar type {kind!r} does not describe a lattice design")


def config_hash(config: dict) -> str:
    """Git-style blob hash of the canonical JSON form of a configuration."""
    body = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str).encode()
    return hashlib.sha1(b"blob %d\0" % len(body) + body).hexdigest()
