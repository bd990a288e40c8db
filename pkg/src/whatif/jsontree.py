"""Canonical JSON trees and path-addressed access.

Every document this package emits (specifications, findings, experiment
results, interface descriptions, benchmark reports) goes through
``canonical_dumps`` so that equal values always serialize to identical
bytes: keys sorted, two-space indent, numbers in shortest form with at
most 12 significant digits.

Paths address nodes with the grammar ``key(.key | [index])*``, e.g.
``experiments[0].perturb[1].value``.
"""

from __future__ import annotations

import math
import re
from typing import Any

_SEGMENT_RE = re.compile(r"[^.\[\]]+|\[\d+\]")
_PATH_RE = re.compile(r"^[^.\[\]]+(\.[^.\[\]]+|\[\d+\])*$")


class PathError(Exception):
    """A spec path could not be parsed or resolved."""


def format_number(x: int | float) -> str:
    """Shortest decimal form, capped at 12 significant digits.

    Integral floats render without a fractional part so that a value
    survives a serialize/parse cycle with stable bytes (JSON has one
    number type; 230.0 and 230 are the same canonical number).
    """
    if isinstance(x, bool):  # pragma: no cover - guarded by caller
        raise TypeError("bool is not a number")
    if isinstance(x, int):
        return str(x)
    if math.isnan(x) or math.isinf(x):
        raise ValueError("non-finite numbers cannot be serialized")
    v = float(f"{x:.12g}")
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _escape(s: str) -> str:
    out = ["\""]
    for ch in s:
        if ch == "\"":
            out.append("\\\"")
        elif ch == "\\":
            out.append("\\\\")
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\r":
            out.append("\\r")
        elif ch == "\t":
            out.append("\\t")
        elif ord(ch) < 0x20:
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    out.append("\"")
    return "".join(out)


def _emit(node: Any, indent: int, pieces: list[str]) -> None:
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if node is None:
        pieces.append("null")
    elif node is True:
        pieces.append("true")
    elif node is False:
        pieces.append("false")
    elif isinstance(node, (int, float)):
        pieces.append(format_number(node))
    elif isinstance(node, str):
        pieces.append(_escape(node))
    elif isinstance(node, dict):
        if not node:
            pieces.append("{}")
            return
        pieces.append("{\n")
        keys = sorted(node.keys())
        for i, k in enumerate(keys):
            if not isinstance(k, str):
                raise TypeError(f"non-string key {k!r}")
            pieces.append(inner)
            pieces.append(_escape(k))
            pieces.append(": ")
            _emit(node[k], indent + 1, pieces)
            pieces.append(",\n" if i < len(keys) - 1 else "\n")
        pieces.append(pad + "}")
    elif isinstance(node, (list, tuple)):
        if not node:
            pieces.append("[]")
            return
        pieces.append("[\n")
        for i, item in enumerate(node):
            pieces.append(inner)
            _emit(item, indent + 1, pieces)
            pieces.append(",\n" if i < len(node) - 1 else "\n")
        pieces.append(pad + "]")
    else:
        raise TypeError(f"cannot serialize {type(node).__name__}")


def canonical_dumps(tree: Any) -> str:
    """Serialize a JSON tree deterministically (trailing newline included)."""
    pieces: list[str] = []
    _emit(tree, 0, pieces)
    pieces.append("\n")
    return "".join(pieces)


def parse_path(path: str) -> list[str | int]:
    """Split ``a.b[2].c`` into ``["a", "b", 2, "c"]``."""
    if not path or not _PATH_RE.match(path):
        raise PathError(f"malformed path: {path!r}")
    segments: list[str | int] = []
    for token in _SEGMENT_RE.findall(path):
        if token.startswith("["):
            segments.append(int(token[1:-1]))
        else:
            segments.append(token)
    return segments


def join_path(*segments: str | int) -> str:
    """Inverse of :func:`parse_path` for building paths incrementally."""
    out = ""
    for seg in segments:
        if isinstance(seg, int):
            out += f"[{seg}]"
        elif out:
            out += f".{seg}"
        else:
            out = str(seg)
    return out


def _descend(tree: Any, segments: list[str | int], path: str) -> Any:
    node = tree
    for seg in segments:
        if isinstance(seg, int):
            if not isinstance(node, list) or not 0 <= seg < len(node):
                raise PathError(f"path not found: {path!r}")
            node = node[seg]
        else:
            if not isinstance(node, dict) or seg not in node:
                raise PathError(f"path not found: {path!r}")
            node = node[seg]
    return node


def path_get(tree: Any, path: str) -> Any:
    return _descend(tree, parse_path(path), path)


def path_exists(tree: Any, path: str) -> bool:
    try:
        path_get(tree, path)
        return True
    except PathError:
        return False


def path_set(tree: Any, path: str, value: Any) -> None:
    """Set the node at ``path``; the final dict key may be new."""
    segments = parse_path(path)
    parent = _descend(tree, segments[:-1], path)
    last = segments[-1]
    if isinstance(last, int):
        if not isinstance(parent, list) or not 0 <= last < len(parent):
            raise PathError(f"path not found: {path!r}")
        parent[last] = value
    else:
        if not isinstance(parent, dict):
            raise PathError(f"path not found: {path!r}")
        parent[last] = value


def path_insert(tree: Any, path: str, value: Any) -> None:
    """Insert into the list addressed by the final ``[index]`` segment."""
    segments = parse_path(path)
    last = segments[-1]
    if not isinstance(last, int):
        raise PathError(f"insert requires a list index path: {path!r}")
    parent = _descend(tree, segments[:-1], path)
    if not isinstance(parent, list) or not 0 <= last <= len(parent):
        raise PathError(f"path not found: {path!r}")
    parent.insert(last, value)


def path_remove(tree: Any, path: str) -> None:
    segments = parse_path(path)
    parent = _descend(tree, segments[:-1], path)
    last = segments[-1]
    if isinstance(last, int):
        if not isinstance(parent, list) or not 0 <= last < len(parent):
            raise PathError(f"path not found: {path!r}")
        del parent[last]
    else:
        if not isinstance(parent, dict) or last not in parent:
            raise PathError(f"path not found: {path!r}")
        del parent[last]


def is_under(path: str, root: str) -> bool:
    """True when ``path`` equals ``root`` or addresses a node inside it."""
    if path == root:
        return True
    return path.startswith(root) and path[len(root)] in ".["
