"""
JSON export with fixed float formatting

Every float is written with 17 significant digits in scientific notation,
the same precision as the ``%.16e`` CSV exports, so JSON outputs diff cleanly
across runs and languages. Keys are sorted and the layout matches
``json.dump(..., indent=2, sort_keys=True)``; values are still JSON numbers.
"""

import json
import math
from numbers import Integral
from pathlib import Path
from typing import Any, Mapping, TextIO

INDENT = 2


def format_float(value: float) -> str:
    """``1.5`` becomes ``1.5000000000000000e+00``; NaN and infinities as json spells them."""
    if math.isnan(value):
        return "NaN"
    if math.isinf(value):
        return "Infinity" if value > 0 else "-Infinity"
    return format(value, ".16e")


def _encode(value: Any, level: int) -> str:
    if value is None or isinstance(value, (bool, str)):
        return json.dumps(value)
    if isinstance(value, Integral):
        return str(int(value))
    if isinstance(value, float):
        return format_float(value)

    pad = " " * (INDENT * (level + 1))
    close = " " * (INDENT * level)
    if isinstance(value, Mapping):
        if not value:
            return "{}"
        items = [
            f"{pad}{json.dumps(str(key))}: {_encode(value[key], level + 1)}"
            for key in sorted(value)
        ]
        return "{\n" + ",\n".join(items) + "\n" + close + "}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        items = [f"{pad}{_encode(item, level + 1)}" for item in value]
        return "[\n" + ",\n".join(items) + "\n" + close + "]"
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def dumps(data: Any) -> str:
    return _encode(data, 0)


def dump(data: Any, stream: TextIO) -> None:
    stream.write(dumps(data))
    stream.write("\n")


def write_json(data: Any, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        dump(data, f)
