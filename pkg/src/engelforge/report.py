"""Deterministic report emission: canonical JSON, config hashes, CSV.

Reports must be byte-identical across runs with the same configuration and
seed, so all floating-point values are rendered with a fixed 17-significant-
digit format and JSON object keys are emitted in sorted order.
"""

from __future__ import annotations

import hashlib
import json
import math

import numpy as np

TOOL_VERSION = "0.1.0"


def format_float(x: float) -> str:
    """Render a float with 17 significant digits (round-trip exact)."""
    x = float(x)
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return f"{x:.17g}"


def dumps(obj) -> str:
    """Canonical JSON: sorted keys, fixed float formatting, no whitespace."""
    return _serialize(obj)


def _serialize(obj) -> str:
    if isinstance(obj, dict):
        items = sorted(obj.items(), key=lambda kv: str(kv[0]))
        body = ",".join(
            f"{json.dumps(str(k))}:{_serialize(v)}" for k, v in items
        )
        return "{" + body + "}"
    if isinstance(obj, np.ndarray):
        return _serialize(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_serialize(v) for v in obj) + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def config_hash(config: dict) -> str:
    """SHA-256 of the canonical serialization of a configuration."""
    return hashlib.sha256(dumps(config).encode("utf-8")).hexdigest()


def write_report(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(payload))
        fh.write("\n")


def _cell(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    x = float(value)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def write_csv(path, header, rows, comment: str | None = None) -> None:
    """Delimited output with the same fixed float formatting as reports.

    ``comment`` is an optional provenance line (seed, config hash) written
    before the header, prefixed with '#'.
    """
    with open(path, "w", encoding="utf-8") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write(",".join(header))
        fh.write("\n")
        for row in rows:
            fh.write(",".join(_cell(v) for v in row))
            fh.write("\n")
