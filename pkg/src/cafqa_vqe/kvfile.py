"""Flat key-value text files, a YAML-compatible scalar subset.

One ``key: value`` pair per line.  Keys may be dotted (``counts.0101``) to
express one level of nesting.  Values are

* double-quoted strings (JSON escaping, which YAML accepts),
* bare integers, floats, ``true``/``false``, ``null``,
* block strings introduced by ``|`` and indented by two spaces (used for
  multi-line text such as QASM; other strings are written quoted).

Unquoted values that are not numbers or keywords are read back as strings,
so hand-written config files can say ``init: cafqa``.  The writer always
quotes strings, so ``job_id: "00000007"`` survives a round trip.
"""

from __future__ import annotations

import json
import math
import os
import re
import tempfile
from pathlib import Path
from typing import Any, Mapping

_KEY_RE = re.compile(r"^[A-Za-z0-9_][A-Za-z0-9_.\-]*$")
_INT_RE = re.compile(r"^[-+]?\d+$")
_INDENT = "  "


class KVFormatError(ValueError):
    """Malformed key-value text; carries the 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _format_scalar(value: Any) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return ".nan"
        if math.isinf(value):
            return ".inf" if value > 0 else "-.inf"
        text = repr(value)
        # YAML 1.1 resolvers only treat exponent forms with a dot as floats
        return text.replace("e", ".0e") if "e" in text and "." not in text else text
    return _quote(str(value))


# Characters JSON leaves raw but YAML rejects or folds inside double quotes.
_YAML_UNSAFE = re.compile("[\x7f-\x9f\u2028\u2029\ufffe\uffff]")


def _quote(s: str) -> str:
    """Double-quoted string readable by both ``json.loads`` and YAML."""
    return _YAML_UNSAFE.sub(lambda m: f"\\u{ord(m.group()):04x}", json.dumps(s, ensure_ascii=False))


def _block_safe(s: str) -> bool:
    """True when a literal block reproduces ``s`` exactly under YAML and :func:`loads`."""
    body = s[:-1] if s.endswith("\n") else s
    if "\n" not in s or not body or body.endswith("\n"):
        return False
    lines = body.split("\n")
    first = next((ln for ln in lines if ln), "")
    if not first or first[0].isspace():
        return False
    return all(ln.isprintable() and (not ln or not ln.isspace()) for ln in lines)


def dumps(data: Mapping[str, Any]) -> str:
    """Serialize a flat mapping.  Multi-line strings become block strings."""
    lines = []
    for key, value in data.items():
        if not _KEY_RE.match(key):
            raise ValueError(f"invalid key {key!r}")
        if isinstance(value, str) and _block_safe(value):
            body = value[:-1] if value.endswith("\n") else value
            indicator = "|" if value.endswith("\n") else "|-"
            lines.append(f"{key}: {indicator}")
            lines.extend(_INDENT + ln if ln else "" for ln in body.split("\n"))
        else:
            lines.append(f"{key}: {_format_scalar(value)}")
    return "\n".join(lines) + "\n"


def _parse_scalar(raw: str, lineno: int) -> Any:
    if raw.startswith('"'):
        try:
            value = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise KVFormatError(f"bad quoted string: {exc.msg}", lineno) from None
        if not isinstance(value, str):
            raise KVFormatError("bad quoted string", lineno)
        return value
    if raw in ("null", "~", ""):
        return None
    if raw == "true":
        return True
    if raw == "false":
        return False
    if raw in (".nan", ".NaN"):
        return math.nan
    if raw in (".inf", "+.inf"):
        return math.inf
    if raw == "-.inf":
        return -math.inf
    if _INT_RE.match(raw):
        return int(raw)
    try:
        return float(raw)
    except ValueError:
        return raw


def loads(text: str) -> dict[str, Any]:
    """Parse text produced by :func:`dumps` (or written by hand)."""
    out: dict[str, Any] = {}
    lines = text.split("\n")
    i = 0
    while i < len(lines):
        line = lines[i]
        lineno = i + 1
        i += 1
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if line[0].isspace():
            raise KVFormatError("unexpected indentation", lineno)
        key, sep, rest = line.partition(":")
        key = key.strip()
        if not sep or not _KEY_RE.match(key):
            raise KVFormatError(f"expected 'key: value', got {line!r}", lineno)
        if key in out:
            raise KVFormatError(f"duplicate key {key!r}", lineno)
        rest = rest.strip()
        if rest in ("|", "|-"):
            block = []
            while i < len(lines) and (lines[i].startswith(_INDENT) or lines[i] == ""):
                block.append(lines[i][len(_INDENT):])
                i += 1
            while block and block[-1] == "":
                block.pop()
            value = "\n".join(block)
            if rest == "|" and block:
                value += "\n"
            out[key] = value
        else:
            out[key] = _parse_scalar(rest, lineno)
    return out


def subkeys(data: Mapping[str, Any], prefix: str) -> dict[str, Any]:
    """Collect ``prefix.*`` entries as a dict keyed by the suffix."""
    head = prefix + "."
    return {k[len(head):]: v for k, v in data.items() if k.startswith(head)}


def flatten(prefix: str, mapping: Mapping[str, Any]) -> dict[str, Any]:
    return {f"{prefix}.{k}": v for k, v in mapping.items()}


def atomic_write_text(path: Path | str, text: str, fsync: bool = True) -> None:
    """Write ``text`` to ``path`` so readers only ever see the whole file.

    The temp file lives in the same directory (rename must not cross
    filesystems) and starts with a dot so directory scanners skip it.
    """
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
            if fsync:
                fh.flush()
                os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def dump_file(path: Path | str, data: Mapping[str, Any]) -> None:
    atomic_write_text(path, dumps(data))


def load_file(path: Path | str) -> dict[str, Any]:
    return loads(Path(path).read_text(encoding="utf-8"))
