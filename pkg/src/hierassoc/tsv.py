"""TSV triple files: ``row<TAB>col<TAB>value<LF>``, UTF-8, no header, no escaping."""
from __future__ import annotations

import os
import re

import numpy as np

from .assoc import MalformedKeyError, TripleBatch, _key_problem, as_batch

__all__ = ["TsvParseError", "save_tsv", "load_tsv", "load_many"]

_INT = re.compile(r"-?[0-9]+\Z")
_I64 = (-(2**63), 2**63 - 1)


class TsvParseError(ValueError):
    def __init__(self, path, line: int, reason: str):
        super().__init__(f"{path}:{line}: {reason}")
        self.path = path
        self.line = line
        self.reason = reason


def save_tsv(triples, path) -> int:
    """Write triples in input order; returns the number of lines written."""
    if isinstance(triples, TripleBatch):
        rows, cols, vals = triples.rows.tolist(), triples.cols.tolist(), triples.vals.tolist()
    else:
        try:
            batch = as_batch(triples)
        except MalformedKeyError as exc:
            raise MalformedKeyError(exc.index, f"line {exc.index + 1}: {exc.reason}") from None
        rows, cols, vals = batch.rows.tolist(), batch.cols.tolist(), batch.vals.tolist()
    lines = [f"{r}\t{c}\t{v}\n" for r, c, v in zip(rows, cols, vals)]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("".join(lines))
    return len(lines)


def load_tsv(path) -> TripleBatch:
    """Parse a TSV triple file; a trailing CR on any line is dropped."""
    with open(path, encoding="utf-8", newline="") as fh:
        text = fh.read()
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    rows, cols, vals = [], [], []
    for lineno, line in enumerate(lines, start=1):
        if line.endswith("\r"):
            line = line[:-1]
        fields = line.split("\t")
        if len(fields) != 3:
            raise TsvParseError(path, lineno, f"expected 3 tab-separated fields, found {len(fields)}")
        r, c, v = fields
        problem = _key_problem(r) or _key_problem(c)
        if problem:
            raise TsvParseError(path, lineno, problem)
        if not _INT.match(v):
            raise TsvParseError(path, lineno, f"value {v!r} is not an integer")
        n = int(v)
        if not _I64[0] <= n <= _I64[1]:
            raise TsvParseError(path, lineno, f"value {v} outside the int64 range")
        rows.append(r)
        cols.append(c)
        vals.append(n)
    if not rows:
        return as_batch([])
    return TripleBatch._trusted(np.array(rows), np.array(cols), np.array(vals, dtype=np.int64))


def _tsv_files(path) -> list[str]:
    if os.path.isdir(path):
        return sorted(
            os.path.join(path, name) for name in os.listdir(path) if name.endswith(".tsv")
        )
    return [path]


def load_many(paths) -> list[TripleBatch]:
    """Load files and directories (every ``*.tsv`` inside, sorted by name), one batch per file."""
    if isinstance(paths, (str, os.PathLike)):
        paths = [paths]
    return [load_tsv(f) for p in paths for f in _tsv_files(p)]
