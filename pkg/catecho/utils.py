"""Utility helpers for catecho."""

from __future__ import annotations

import json
import math
import os
import re
import tempfile
from pathlib import Path
from typing import Any

_SLUG_PATTERN = re.compile(r"[^a-zA-Z0-9_.-]+")


def slugify(value: str) -> str:
    """Return a filesystem-friendly slug for run directories."""
    slug = _SLUG_PATTERN.sub("-", value.lower()).strip("-")
    return slug or "run"


def format_float(value: float) -> str:
    """Shortest round-tripping text for a float; locale independent."""
    return repr(float(value))


def atomic_write_text(path: Path, text: str) -> Path:
    """Write ``text`` through a temp file in the same directory, then rename over ``path``."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return path


def json_safe(value: Any) -> Any:
    """Replace non-finite floats with None so the document stays strict JSON."""
    if isinstance(value, dict):
        return {key: json_safe(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(item) for item in value]
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def atomic_write_json(path: Path, payload: Any) -> Path:
    return atomic_write_text(path, json.dumps(json_safe(payload), indent=2, allow_nan=False) + "\n")
