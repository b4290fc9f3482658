"""Deterministic, schema-checked JSON reports.

Reports are serialized with sorted keys, floats rounded to 12 significant
digits and no timestamps, so the same inputs give byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
import math
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

SCHEMA_VERSION = "1.0"
FLOAT_DIGITS = 12


def normalize(value):
    """Convert numpy values and tuples to plain JSON types with rounded floats."""
    if isinstance(value, dict):
        return {str(k): normalize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [normalize(v) for v in value]
    if isinstance(value, np.ndarray):
        return normalize(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        x = float(value)
        if not math.isfinite(x):
            return None
        return float(f"{x:.{FLOAT_DIGITS}g}")
    return value


def dumps(report: dict) -> str:
    return json.dumps(normalize(report), sort_keys=True, indent=2) + "\n"


def schema() -> dict:
    text = resources.files("rsaudit").joinpath("schemas/report.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def validate(report: dict) -> None:
    """Raise ``jsonschema.ValidationError`` if ``report`` does not match the schema."""
    jsonschema.validate(normalize(report), schema())


def write(report: dict, path) -> Path:
    report = dict(report, schema_version=SCHEMA_VERSION)
    validate(report)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(report), encoding="utf-8")
    return path


def digest(vectors) -> str:
    """Short stable fingerprint of a list of integer vectors."""
    h = hashlib.sha256()
    for v in vectors:
        h.update((",".join(str(int(x)) for x in np.ravel(v)) + ";").encode())
    return h.hexdigest()[:16]
