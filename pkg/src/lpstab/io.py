"""The JSON matrix interchange format and atomic report writing."""
from __future__ import annotations

import json
import math
import os
import re
import tempfile
from pathlib import Path

import numpy as np

from .errors import FormatError, LpstabError
from .opmat import IndexedMatrix
from .space import make_space


def matrix_to_dict(A: IndexedMatrix) -> dict:
    return {
        "space": A.col_space.to_json(),
        "rows": "same" if A.same else A.n_rows,
        "entries": [[r, c, v] for r, c, v in A.entries],
    }


def _num(v: float) -> str:
    return "%.17g" % v


def dumps_matrix(A: IndexedMatrix) -> str:
    """Canonical text: sorted entries, one per line, values in %.17g."""
    if A.col_space is None:
        raise FormatError("only matrices with a column space can be written")
    space = json.dumps(A.col_space.to_json(), separators=(", ", ": "))
    rows = json.dumps("same" if A.same else A.n_rows)
    r, c, v = A.coo
    lines = [f"    [{int(ri)}, {int(ci)}, {_num(float(vi))}]" for ri, ci, vi in zip(r, c, v)]
    body = ",\n".join(lines)
    entries = "[\n" + body + "\n  ]" if lines else "[]"
    return "{\n" + f'  "space": {space},\n  "rows": {rows},\n  "entries": {entries}\n' + "}\n"


def _entry_line(text: str, k: int) -> int | None:
    """Line of the k-th entry triple, when the layout makes it findable."""
    pos = text.find('"entries"')
    if pos < 0:
        return None
    for i, m in enumerate(re.finditer(r"\[[^\[\]]*\]", text[pos:])):
        if i == k:
            return text.count("\n", 0, pos + m.start()) + 1
    return None


def _key_line(text: str, key: str) -> int | None:
    pos = text.find(f'"{key}"')
    return None if pos < 0 else text.count("\n", 0, pos) + 1


def loads_matrix(text: str) -> IndexedMatrix:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg} (column {exc.colno})", line=exc.lineno) from exc
    if not isinstance(doc, dict):
        raise FormatError("matrix file must be a JSON object", line=1)
    for key in ("space", "rows", "entries"):
        if key not in doc:
            raise FormatError(f"missing key {key!r}", line=1)
    try:
        space = make_space(doc["space"])
    except FormatError as exc:
        raise FormatError(str(exc), line=_key_line(text, "space")) from exc
    rows = doc["rows"]
    if not (rows == "same" or (isinstance(rows, int) and not isinstance(rows, bool) and rows >= 0)):
        raise FormatError("rows must be \"same\" or a non-negative integer", line=_key_line(text, "rows"))
    n_rows = space.n if rows == "same" else rows
    entries = doc["entries"]
    if not isinstance(entries, list):
        raise FormatError("entries must be an array", line=_key_line(text, "entries"))
    seen = set()
    for k, e in enumerate(entries):
        msg = _entry_problem(e, n_rows, space.n)
        if msg is None:
            key = (e[0], e[1])
            if key in seen:
                msg = f"duplicate entry ({e[0]}, {e[1]})"
            seen.add(key)
        if msg:
            raise FormatError(f"entry {k}: {msg}", line=_entry_line(text, k))
    return IndexedMatrix.from_entries(space, rows, entries)


def _entry_problem(e, n_rows, n_cols) -> str | None:
    if not isinstance(e, list) or len(e) != 3:
        return "expected [row, col, value]"
    r, c, v = e
    for name, x, bound in (("row", r, n_rows), ("col", c, n_cols)):
        if isinstance(x, bool) or not isinstance(x, int):
            return f"{name} index must be an integer"
        if not 0 <= x < bound:
            return f"{name} index {x} out of range [0, {bound})"
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        return "value must be a finite number"
    return None


def read_matrix(path) -> IndexedMatrix:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc.strerror}") from exc
    return loads_matrix(text)


def write_text_atomic(path, text: str) -> Path:
    """Write through a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_matrix(path, A: IndexedMatrix) -> Path:
    return write_text_atomic(path, dumps_matrix(A))


def jsonable(obj):
    """Recursively convert numpy scalars/arrays and non-finite floats for JSON output."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, LpstabError):
        return str(obj)
    return obj


def dumps_report(obj) -> str:
    return json.dumps(jsonable(obj), indent=2) + "\n"


def write_report(path, obj) -> Path:
    return write_text_atomic(path, dumps_report(obj))
