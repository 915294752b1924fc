"""Deterministic CSV/JSON writers, checksums and run manifests."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from pathlib import Path

import numpy as np

SCHEMA = "singdamp/1"


def _plain(obj):
    """Convert numpy scalars, complex numbers and tuples to JSON-ready values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": _plain(obj.real), "im": _plain(obj.imag)}
    if isinstance(obj, (float, np.floating)):
        val = float(obj)
        if math.isnan(val):
            return "nan"
        if math.isinf(val):
            return "inf" if val > 0 else "-inf"
        return val
    return obj


def dumps(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2) + "\n"


def _atomic_write(path: Path, text: str):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def write_json(path, obj) -> str:
    path = Path(path)
    text = dumps(obj)
    _atomic_write(path, text)
    return sha256_text(text)


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    if isinstance(value, str):
        return value
    return repr(float(value))


def write_csv(path, header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    text = buf.getvalue()
    _atomic_write(Path(path), text)
    return sha256_text(text)


def read_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader]


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def config_hash(config: dict) -> str:
    return sha256_text(json.dumps(_plain(config), sort_keys=True))


def grid_function_rows(grid, values):
    """Rows x,re,im for a complex grid function."""
    values = np.asarray(values, dtype=complex)
    return [(x, v.real, v.imag) for x, v in zip(grid.nodes, values)]


def verify_outputs(outdir, outputs: dict) -> bool:
    """True when every recorded output exists with the recorded checksum."""
    outdir = Path(outdir)
    for name, digest in outputs.items():
        path = outdir / name
        if not path.is_file() or sha256_file(path) != digest:
            return False
    return True
