"""
Small helpers: JSON with optional orjson, atomic file writes.

Everything here is std-lib plus the optional orjson accelerator, so the
helpers can be imported from the config layer without pulling in numpy.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path
from typing import Any

try:
    import orjson as _orjson

    def json_dumps(obj: Any, indent: bool = False) -> str:
        """Serialize with orjson."""
        option = _orjson.OPT_INDENT_2 if indent else 0
        return _orjson.dumps(obj, option=option).decode("utf-8")

    def json_loads(text: str) -> Any:
        """Parse with orjson."""
        return _orjson.loads(text)

    JSON_BACKEND = "orjson"
except ImportError:
    import json as _json

    def json_dumps(obj: Any, indent: bool = False) -> str:
        """Standard JSON serialization fallback."""
        return _json.dumps(obj, ensure_ascii=False, indent=2 if indent else None)

    def json_loads(text: str) -> Any:
        """Standard JSON parsing fallback."""
        return _json.loads(text)

    JSON_BACKEND = "json"


def ensure_dir(path: Path) -> Path:
    """Create a directory (and parents) and return it."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def atomic_write_text(path: Path, text: str) -> Path:
    """
    Write text to ``path`` through a temp file in the same directory.

    The temp file is renamed over the target with ``os.replace`` so readers
    never observe a half-written file. Newlines are written verbatim (LF).
    """
    path = Path(path)
    ensure_dir(path.parent)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise
    return path


__all__ = ["JSON_BACKEND", "atomic_write_text", "ensure_dir", "json_dumps", "json_loads"]
