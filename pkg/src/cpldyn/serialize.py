"""Deterministic text formatting for CSV/JSON outputs.

All floats are rendered with repr-faithful precision ('%.17g') so repeated
runs with identical inputs produce byte-identical files.
"""

from __future__ import annotations

import json


def fmt(x) -> str:
    """Format one scalar for CSV output (label columns pass through as-is)."""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, str)):
        return str(x)
    return "%.17g" % float(x)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, float):
        return obj
    if hasattr(obj, "tolist"):  # numpy array or scalar
        return _jsonable(obj.tolist())
    if hasattr(obj, "value") and obj.__class__.__module__.startswith("cpldyn"):
        return obj.value  # enums
    raise TypeError(f"cannot serialize {type(obj)!r}")


class _Float17Encoder(json.JSONEncoder):
    """JSON encoder that renders every float with %.17g."""

    def iterencode(self, o, _one_shot=False):
        return _iterencode(_jsonable(o), indent=self.indent)


def _iterencode(obj, indent=None, level=0):
    pad = "" if indent is None else "\n" + " " * (indent * (level + 1))
    end_pad = "" if indent is None else "\n" + " " * (indent * level)
    sep = "," if indent is None else ","
    if isinstance(obj, dict):
        if not obj:
            yield "{}"
            return
        yield "{"
        for i, (k, v) in enumerate(obj.items()):
            if i:
                yield sep
            yield pad + json.dumps(str(k)) + ": "
            yield from _iterencode(v, indent, level + 1)
        yield end_pad + "}"
    elif isinstance(obj, list):
        if not obj:
            yield "[]"
            return
        yield "["
        for i, v in enumerate(obj):
            if i:
                yield sep
            yield pad
            yield from _iterencode(v, indent, level + 1)
        yield end_pad + "]"
    elif isinstance(obj, bool):
        yield "true" if obj else "false"
    elif obj is None:
        yield "null"
    elif isinstance(obj, float):
        yield fmt(obj)
    elif isinstance(obj, int):
        yield str(obj)
    else:
        yield json.dumps(obj)


def dumps_json(obj, indent: int | None = 2) -> str:
    """Serialize to JSON with deterministic float text."""
    return "".join(_iterencode(_jsonable(obj), indent=indent)) + "\n"


def write_json(path, obj, indent: int | None = 2) -> None:
    with open(path, "w") as f:
        f.write(dumps_json(obj, indent=indent))


def write_csv(path, header: str, rows) -> None:
    """Write a CSV with a fixed header; each row is an iterable of scalars."""
    with open(path, "w") as f:
        f.write(header + "\n")
        for row in rows:
            f.write(",".join(fmt(c) for c in row) + "\n")
