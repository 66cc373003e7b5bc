"""Deterministic report and artifact serialization.

All JSON is written with sorted keys and shortest-roundtrip floats and no
timestamps, so identical configurations produce byte-identical reports.
Kernel tables go to a small binary block format; node-indexed tables to CSV.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

_MAGIC = b"LVKB"
_VERSION = 1
_KINDS = {"k": 0, "c": 1, "b": 2, "b_segment": 3, "omega_tilde": 4, "pi": 5,
          "omega": 6, "identity": 7}
_KIND_NAMES = {v: k for k, v in _KINDS.items()}


def _default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o)}")


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_default) + "\n"


def write_json(path, obj):
    Path(path).write_text(canonical_json(obj))


def content_hash(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()[:16]


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(v) if isinstance(v, float) else str(v)
                              for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_node_table(path, domain, columns: dict):
    """CSV with node index, coordinates, and the given named value columns."""
    names = list(columns)
    rows = []
    for i in range(domain.nx):
        rows.append([i, float(domain.xs[i]), float(domain.s_y[i])]
                    + [float(columns[n][i]) for n in names])
    write_csv(path, ["node", "x", "y"] + names, rows)


def write_kernel_binary(path, kernel):
    """Row-major float64 block with a small self-describing header."""
    n = kernel.entries.shape[0]
    meta = kernel.meta or {}
    seg = meta.get("segment")
    y = meta.get("y", 0.0)
    lo, hi = (seg if seg else (y, y))
    eps = meta.get("eps", 0.0)
    head = struct.pack("<4sBBI3d", _MAGIC, _VERSION,
                       _KINDS.get(kernel.kind, 255), n,
                       float(lo), float(hi), float(eps))
    with open(path, "wb") as f:
        f.write(head)
        f.write(np.ascontiguousarray(kernel.entries, dtype="<f8").tobytes())


def read_kernel_binary(path):
    """Returns (entries, kind, (lo, hi), eps)."""
    raw = Path(path).read_bytes()
    head = struct.Struct("<4sBBI3d")
    magic, version, kind, n, lo, hi, eps = head.unpack_from(raw)
    if magic != _MAGIC or version != _VERSION:
        raise ValueError(f"not a kernel block: {path}")
    entries = np.frombuffer(raw, dtype="<f8", offset=head.size).reshape(n, n).copy()
    return entries, _KIND_NAMES.get(kind, "unknown"), (lo, hi), eps


def write_kernel_csv(path, kernel):
    n = kernel.entries.shape[0]
    lines = ["i,j,value"]
    for i in range(n):
        row = kernel.entries[i]
        lines.extend(f"{i},{j},{row[j]!r}" for j in range(n))
    Path(path).write_text("\n".join(lines) + "\n")
