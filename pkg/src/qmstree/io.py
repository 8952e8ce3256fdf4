"""Deterministic CSV/JSON writers and the custom amplitude file reader.

Every file starts with metadata (``#`` lines in CSV, a ``meta`` key in JSON)
holding the resolved configuration and the package version.  Nothing
time- or host-dependent is written, so two runs with the same config are
byte-identical.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from . import __version__

FLOAT_FMT = "{:.15g}"


def _plain(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (complex, np.complexfloating)):
        return {"re": float(x.real), "im": float(x.imag)}
    if isinstance(x, np.ndarray):
        if np.iscomplexobj(x) and np.abs(x.imag).max(initial=0.0) == 0.0:
            x = x.real
        return [_plain(v) for v in x.tolist()] if x.ndim else _plain(x.item())
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    return x


def _cell(x) -> str:
    if isinstance(x, (float, np.floating)):
        return FLOAT_FMT.format(float(x))
    return str(x)


def meta(config: dict, **extra) -> dict:
    out = {"version": __version__, "config": _plain(config)}
    out.update(_plain(extra))
    return out


def write_csv(path, columns, rows, config: dict, **extra) -> Path:
    """Write ``rows`` (dicts or sequences) under a header of ``#`` metadata lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    info = meta(config, **extra)
    with path.open("w", newline="") as fh:
        fh.write(f"# qmstree {info['version']}\n")
        fh.write("# config " + json.dumps(info["config"], sort_keys=True) + "\n")
        for key in sorted(k for k in info if k not in ("version", "config")):
            fh.write(f"# {key} " + json.dumps(info[key], sort_keys=True) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            vals = [r.get(c, "") for c in columns] if isinstance(r, dict) else list(r)
            w.writerow([_cell(v) for v in vals])
    return path


def write_json(path, payload: dict, config: dict, **extra) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"meta": meta(config, **extra), **_plain(payload)}
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def read_csv_body(path) -> list:
    """Rows of a file written by :func:`write_csv` with metadata lines dropped."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def read_amplitude(path):
    """Parse a custom amplitude file.

    Format: a header comment ``# k=<k> d=<d>`` followed by d^(k+1) rows of
    d^(k+1) whitespace-separated Python complex literals (``1``, ``0.5-2j``).
    Returns ``(matrix, k, d)``.
    """
    k = d = None
    rows = []
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            for tok in line[1:].split():
                if "=" in tok:
                    key, val = tok.split("=", 1)
                    if key == "k":
                        k = int(val)
                    elif key == "d":
                        d = int(val)
            continue
        rows.append([complex(t) for t in line.split()])
    if k is None or d is None:
        raise ValueError(f"{path}: missing '# k=.. d=..' header")
    n = d ** (k + 1)
    m = np.array(rows, dtype=complex)
    if m.shape != (n, n):
        raise ValueError(f"{path}: expected {n}x{n} entries for k={k}, d={d}, got {m.shape}")
    return m, k, d


def write_amplitude(path, matrix: np.ndarray, k: int, d: int) -> Path:
    path = Path(path)
    lines = [f"# k={k} d={d}"]
    for row in np.asarray(matrix):
        lines.append(" ".join(repr(complex(v)) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path
