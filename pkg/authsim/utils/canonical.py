"""
Canonical JSON encoding.

Sorted keys, compact separators, floats written with 17 significant digits.
Two equal Python values always encode to the same bytes, which is what the
determinism checks on ``metrics.json`` and the transcripts rely on.
"""

from __future__ import annotations

import json
import math
from enum import Enum
from typing import Any

import numpy as np


def _float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"Non-finite float cannot be encoded canonically: {x!r}")
    if x == 0.0:
        return "0.0"
    text = format(x, ".17g")
    if "e" not in text and "." not in text:
        text += ".0"
    return text


def _encode(obj: Any, out: list[str]) -> None:
    if obj is None or isinstance(obj, bool):
        out.append(json.dumps(obj))
    elif isinstance(obj, Enum):
        _encode(obj.value, out)
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_float(float(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=True))
    elif isinstance(obj, dict):
        out.append("{")
        for i, key in enumerate(sorted(obj, key=str)):
            if i:
                out.append(",")
            out.append(json.dumps(str(key), ensure_ascii=True))
            out.append(":")
            _encode(obj[key], out)
        out.append("}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        out.append("[")
        for i, item in enumerate(obj):
            if i:
                out.append(",")
            _encode(item, out)
        out.append("]")
    else:
        raise TypeError(f"Unsupported type for canonical JSON: {type(obj).__name__}")


def dumps(obj: Any) -> str:
    out: list[str] = []
    _encode(obj, out)
    return "".join(out)


def dumps_bytes(obj: Any) -> bytes:
    return dumps(obj).encode("utf-8")
