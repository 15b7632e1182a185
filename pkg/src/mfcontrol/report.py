"""Deterministic report serialization.

Reports must be byte-identical across runs with the same (config, seed,
version), so everything here is order-stable: keys sorted, floats through
repr, no wall-clock content.  Wall time is a stderr note only.
"""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import numpy as np


def sanitize(obj):
    """Coerce numpy scalars/arrays and tuples into plain JSON types."""
    if isinstance(obj, dict):
        return {str(k): sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [sanitize(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        obj = obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        raise ValueError(f"non-finite value {obj!r} in report; refuse to serialize")
    return obj


def canonical_json(doc: dict) -> str:
    """Stable text form: sorted keys, two-space indent, trailing newline."""
    return json.dumps(sanitize(doc), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(doc: dict, path: Path) -> None:
    path.write_text(canonical_json(doc))


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def _cell(v):
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        v = v.item()
    if isinstance(v, float):
        return repr(v)
    return v


def stderr_note(message: str) -> None:
    print(message, file=sys.stderr)
