"""Associative arrays: sparse, string-keyed 2-D arrays with semiring algebra.

An :class:`AssociativeArray` is an immutable value. Row and column keys are
kept as sorted, unique numpy unicode arrays (code-point order, which is the
same as byte-wise order on UTF-8). Entries are stored row-major in compressed
form (``indptr``/``indices``/``vals``) with sorted column indices per row.
The implicit value is 0; explicit zeros are never stored, and a key exists
only while at least one entry uses it.
"""
from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from typing import Callable, Iterable, NamedTuple

import numpy as np

from ._checked import INT64_MAX, apply, checked_add, normalize_op, reduce_groups

__all__ = [
    "Triple",
    "TripleBatch",
    "MalformedKeyError",
    "ValueSemiring",
    "PLUS_TIMES",
    "MAX_MIN",
    "AssociativeArray",
    "as_batch",
    "from_triples",
    "add",
    "elementwise_multiply",
    "semiring_matmul",
    "row_query",
    "transpose",
    "nnz",
    "to_triples",
]

_EMPTY_KEYS = np.array([], dtype="<U1")


class MalformedKeyError(ValueError):
    """A triple carries an empty key or one containing TAB, LF or NUL."""

    def __init__(self, index: int, reason: str):
        super().__init__(f"triple {index}: {reason}")
        self.index = index
        self.reason = reason


class Triple(NamedTuple):
    row: str
    col: str
    val: int


def _as_key_array(keys) -> np.ndarray:
    arr = np.asarray(keys)
    if arr.ndim != 1:
        raise ValueError("key columns must be one-dimensional")
    if arr.dtype.kind != "U":
        if len(arr) == 0:
            return _EMPTY_KEYS
        if arr.dtype.kind == "O" and all(isinstance(k, str) for k in arr.tolist()):
            arr = arr.astype(str)
        else:
            raise TypeError(f"keys must be strings, got dtype {arr.dtype}")
    return np.ascontiguousarray(arr)


def _bad_key_mask(keys: np.ndarray) -> np.ndarray:
    """True where a key is empty or contains TAB, LF or an interior NUL."""
    n = len(keys)
    if n == 0:
        return np.zeros(0, dtype=bool)
    width = keys.dtype.itemsize // 4
    codes = keys.view(np.uint32).reshape(n, width)
    nonzero = codes != 0
    bad = ~nonzero[:, 0]
    bad |= ((codes == 9) | (codes == 10)).any(axis=1)
    if width > 1:
        # numpy strips trailing NULs, so any zero before the last character is interior
        length = width - np.argmax(nonzero[:, ::-1], axis=1)
        bad |= (~nonzero & (np.arange(width) < length[:, None])).any(axis=1)
    return bad


def _packed_words(keys: np.ndarray) -> list[np.ndarray]:
    """Order-preserving uint64 encoding of a unicode key array.

    Code points are packed big-endian, 8 per word when all are below 256 and
    3 per word (21 bits each) otherwise. Comparing the word tuples
    lexicographically matches comparing the strings.
    """
    n = len(keys)
    width = keys.dtype.itemsize // 4
    codes = keys.view(np.uint32).reshape(n, width)
    if codes.max(initial=0) < 256:
        padded = np.zeros((n, -(-width // 8) * 8), dtype=np.uint8)
        padded[:, :width] = codes
        big = padded.view(">u8")
        return [big[:, k].astype(np.uint64) for k in range(big.shape[1])]
    per, bits = 3, 21
    words = []
    for start in range(0, width, per):
        chunk = codes[:, start : start + per].astype(np.uint64)
        w = np.zeros(n, dtype=np.uint64)
        for j in range(per):
            w <<= np.uint64(bits)
            if j < chunk.shape[1]:
                w |= chunk[:, j]
        words.append(w)
    return words


def _single_word(keys: np.ndarray):
    """Packed uint64 form of ``keys`` when every key is at most 8 code points
    below 256, else None. Only this packing is comparable across arrays."""
    if keys.dtype.itemsize > 32:
        return None
    keys = np.ascontiguousarray(keys)
    if keys.view(np.uint32).max(initial=0) >= 256:
        return None
    return _packed_words(keys)[0]


def _unique_inverse(keys: np.ndarray):
    """``np.unique(keys, return_inverse=True)`` for unicode keys, via integer sorts."""
    n = len(keys)
    if n == 0:
        return keys, np.zeros(0, np.int64)
    words = _packed_words(np.ascontiguousarray(keys))
    order = np.argsort(words[0]) if len(words) == 1 else np.lexsort(words[::-1])
    new = np.zeros(n, dtype=bool)
    new[0] = True
    for w in words:
        ws = w[order]
        new[1:] |= ws[1:] != ws[:-1]
    group = np.cumsum(new) - 1
    inverse = np.empty(n, dtype=np.int64)
    inverse[order] = group
    return keys[order[new]], inverse


def _key_problem(key) -> str | None:
    if not isinstance(key, str):
        return f"key {key!r} is not a string"
    if not key:
        return "empty key"
    for ch, name in (("\t", "TAB"), ("\n", "newline"), ("\x00", "NUL")):
        if ch in key:
            return f"key {key!r} contains {name}"
    return None


class TripleBatch(Sequence):
    """Columnar, validated block of triples.

    Behaves as a read-only sequence of :class:`Triple` while keeping the three
    columns as numpy arrays, which is what the block-update paths consume.
    """

    __slots__ = ("rows", "cols", "vals")

    def __init__(self, rows, cols, vals):
        rows = _as_key_array(rows)
        cols = _as_key_array(cols)
        try:
            vals = np.asarray(vals, dtype=np.int64)
        except OverflowError as exc:
            raise OverflowError(f"value outside the int64 range: {exc}") from None
        if vals.ndim != 1 or not (len(rows) == len(cols) == len(vals)):
            raise ValueError("rows, cols and vals must be 1-D and of equal length")
        bad = _bad_key_mask(rows) | _bad_key_mask(cols)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            reason = _key_problem(str(rows[i])) or _key_problem(str(cols[i])) or "malformed key"
            raise MalformedKeyError(i, reason)
        self.rows = rows
        self.cols = cols
        self.vals = vals

    @classmethod
    def _trusted(cls, rows, cols, vals) -> TripleBatch:
        self = cls.__new__(cls)
        self.rows, self.cols, self.vals = rows, cols, vals
        return self

    @classmethod
    def concat(cls, batches: Iterable[TripleBatch]) -> TripleBatch:
        batches = list(batches)
        if not batches:
            return cls._trusted(_EMPTY_KEYS, _EMPTY_KEYS, np.zeros(0, np.int64))
        return cls._trusted(
            np.concatenate([b.rows for b in batches]),
            np.concatenate([b.cols for b in batches]),
            np.concatenate([b.vals for b in batches]),
        )

    def __len__(self) -> int:
        return len(self.vals)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return TripleBatch._trusted(self.rows[i], self.cols[i], self.vals[i])
        return Triple(str(self.rows[i]), str(self.cols[i]), int(self.vals[i]))

    def __iter__(self):
        return map(Triple._make, zip(self.rows.tolist(), self.cols.tolist(), self.vals.tolist()))

    def __eq__(self, other):
        if isinstance(other, TripleBatch):
            return (
                len(self) == len(other)
                and np.array_equal(self.rows, other.rows)
                and np.array_equal(self.cols, other.cols)
                and np.array_equal(self.vals, other.vals)
            )
        if isinstance(other, Sequence):
            return list(self) == [tuple(t) for t in other]
        return NotImplemented

    def __repr__(self):
        return f"TripleBatch(len={len(self)})"


def as_batch(triples) -> TripleBatch:
    """Validate any sequence of (row, col, val) records into a TripleBatch."""
    if isinstance(triples, TripleBatch):
        return triples
    triples = list(triples)
    rows, cols, vals = [], [], []
    for i, t in enumerate(triples):
        try:
            r, c, v = t
        except (TypeError, ValueError):
            raise MalformedKeyError(i, f"not a (row, col, val) record: {t!r}") from None
        problem = _key_problem(r) or _key_problem(c)
        if problem:
            raise MalformedKeyError(i, problem)
        if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
            raise TypeError(f"triple {i}: value {v!r} is not an integer")
        rows.append(r)
        cols.append(c)
        vals.append(int(v))
    if not triples:
        return TripleBatch._trusted(_EMPTY_KEYS, _EMPTY_KEYS, np.zeros(0, np.int64))
    try:
        v = np.array(vals, dtype=np.int64)
    except OverflowError:
        raise OverflowError("triple value outside the int64 range") from None
    return TripleBatch._trusted(np.array(rows), np.array(cols), v)


@dataclass(frozen=True)
class ValueSemiring:
    """A (plus, times) pair over int64 values.

    Arrays store 0 implicitly, so ``zero`` must be 0; ``plus`` and ``times``
    are numpy ufuncs or plain binary callables on ints.
    """

    name: str
    plus: Callable
    times: Callable
    zero: int = 0
    one: int = 1

    def __post_init__(self):
        if self.zero != 0:
            raise ValueError("semiring zero must be 0, the implicit value of an associative array")
        object.__setattr__(self, "plus", normalize_op(self.plus))
        object.__setattr__(self, "times", normalize_op(self.times))


PLUS_TIMES = ValueSemiring("plus.times", np.add, np.multiply, 0, 1)
# Union/intersection on non-negative counts: max joins, min meets.
MAX_MIN = ValueSemiring("max.min", np.maximum, np.minimum, 0, INT64_MAX)


def _freeze(*arrays):
    for a in arrays:
        a.flags.writeable = False


class AssociativeArray:
    """Immutable sparse array indexed by (row key, column key)."""

    __slots__ = ("_rows", "_cols", "_indptr", "_indices", "_vals", "_words")
    __hash__ = None

    @classmethod
    def _make(cls, rows, cols, indptr, indices, vals) -> AssociativeArray:
        self = cls.__new__(cls)
        self._rows = rows
        self._cols = cols
        self._indptr = indptr
        self._indices = indices
        self._vals = vals
        # packed row/col key words, filled lazily; False when keys don't fit one word
        self._words = [None, None]
        _freeze(rows, cols, indptr, indices, vals)
        return self

    def _key_words(self, axis):
        w = self._words[axis]
        if w is None:
            w = _single_word(self._cols if axis else self._rows)
            self._words[axis] = False if w is None else w
        return w if w is not False else None

    @classmethod
    def empty(cls) -> AssociativeArray:
        return cls._make(
            _EMPTY_KEYS.copy(),
            _EMPTY_KEYS.copy(),
            np.zeros(1, np.int64),
            np.zeros(0, np.int64),
            np.zeros(0, np.int64),
        )

    @classmethod
    def from_triples(cls, triples, collision=np.add) -> AssociativeArray:
        """Block-construct from triples; repeated (row, col) pairs are folded with ``collision``."""
        batch = as_batch(triples)
        if len(batch) == 0:
            return cls.empty()
        rows, ri = _unique_inverse(batch.rows)
        cols, ci = _unique_inverse(batch.cols)
        return _from_coo(rows, cols, ri, ci, batch.vals, collision)

    # -- read-only views -------------------------------------------------

    @property
    def row_keys(self) -> np.ndarray:
        return self._rows

    @property
    def col_keys(self) -> np.ndarray:
        return self._cols

    @property
    def nnz(self) -> int:
        return len(self._vals)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self._rows), len(self._cols)

    @property
    def T(self) -> AssociativeArray:
        return transpose(self)

    def _coo(self):
        counts = np.diff(self._indptr)
        return np.repeat(np.arange(len(self._rows), dtype=np.int64), counts), self._indices

    def _find(self, keys, key) -> int:
        i = int(np.searchsorted(keys, key))
        if i < len(keys) and keys[i] == key:
            return i
        return -1

    def __getitem__(self, rc) -> int:
        r, c = rc
        i = self._find(self._rows, r)
        if i < 0:
            return 0
        lo, hi = self._indptr[i], self._indptr[i + 1]
        cols = self._indices[lo:hi]
        j = self._find(self._cols, c)
        if j < 0:
            return 0
        k = int(np.searchsorted(cols, j))
        if k < len(cols) and cols[k] == j:
            return int(self._vals[lo + k])
        return 0

    def to_columns(self) -> TripleBatch:
        ri, ci = self._coo()
        return TripleBatch._trusted(self._rows[ri], self._cols[ci], self._vals.copy())

    def to_triples(self) -> list[Triple]:
        return list(self.to_columns())

    def row(self, key: str) -> AssociativeArray:
        return row_query(self, key)

    def __eq__(self, other):
        if not isinstance(other, AssociativeArray):
            return NotImplemented
        return (
            np.array_equal(self._rows, other._rows)
            and np.array_equal(self._cols, other._cols)
            and np.array_equal(self._indptr, other._indptr)
            and np.array_equal(self._indices, other._indices)
            and np.array_equal(self._vals, other._vals)
        )

    def __add__(self, other):
        if not isinstance(other, AssociativeArray):
            return NotImplemented
        return add(self, other)

    def __mul__(self, other):
        if not isinstance(other, AssociativeArray):
            return NotImplemented
        return elementwise_multiply(self, other)

    def __matmul__(self, other):
        if not isinstance(other, AssociativeArray):
            return NotImplemented
        return semiring_matmul(self, other)

    def __repr__(self):
        if self.nnz <= 6:
            body = ", ".join(f"({r!r}, {c!r})->{v}" for r, c, v in self.to_triples())
            return f"AssociativeArray({{{body}}})"
        return f"AssociativeArray(shape={self.shape}, nnz={self.nnz})"


# -- construction kernels ------------------------------------------------------


def _assemble(rows, cols, ri, ci, vals, prune=True) -> AssociativeArray:
    """Build from row-major-sorted unique coordinates; drops zeros and unused keys."""
    keep = vals != 0
    if not keep.all():
        ri, ci, vals = ri[keep], ci[keep], vals[keep]
        prune = True
    if len(vals) == 0:
        return AssociativeArray.empty()
    if prune:
        used = np.zeros(len(rows), dtype=bool)
        used[ri] = True
        if not used.all():
            ri = (np.cumsum(used) - 1)[ri]
            rows = rows[used]
        used = np.zeros(len(cols), dtype=bool)
        used[ci] = True
        if not used.all():
            ci = (np.cumsum(used) - 1)[ci]
            cols = cols[used]
    indptr = np.zeros(len(rows) + 1, dtype=np.int64)
    np.cumsum(np.bincount(ri, minlength=len(rows)), out=indptr[1:])
    return AssociativeArray._make(
        np.ascontiguousarray(rows),
        np.ascontiguousarray(cols),
        indptr,
        np.ascontiguousarray(ci, dtype=np.int64),
        np.ascontiguousarray(vals, dtype=np.int64),
    )


def _stable_argsort(x: np.ndarray, bound: int):
    """Stable argsort of non-negative ints below ``bound``; returns ``(order, x[order])``.

    When value and position fit together in 63 bits this is a plain integer
    sort of ``x << k | position``, which is several times faster than argsort.
    """
    n = len(x)
    shift = max(n - 1, 1).bit_length()
    if max(bound - 1, 1).bit_length() + shift > 63:
        order = np.argsort(x, kind="stable")
        return order, x[order]
    key = x.astype(np.int64) << shift
    key |= np.arange(n, dtype=np.int64)
    key.sort()
    return key & ((1 << shift) - 1), key >> shift


def _from_coo(rows, cols, ri, ci, vals, collision) -> AssociativeArray:
    """Sort-then-merge unordered coordinates, folding duplicates with ``collision``."""
    ncols = len(cols)
    lin = ri.astype(np.int64) * ncols + ci
    # stable, so duplicates fold in input order (matters for non-commutative ops)
    order, lin = _stable_argsort(lin, len(rows) * ncols)
    vals = np.asarray(vals, dtype=np.int64)[order]
    if len(lin) > 1:
        starts = np.flatnonzero(np.concatenate(([True], lin[1:] != lin[:-1])))
        vals = reduce_groups(collision, vals, starts)
        lin = lin[starts]
    ri, ci = np.divmod(lin, ncols)
    return _assemble(rows, cols, ri, ci, vals)


def _scatter_insert(base, pos, items):
    """``np.insert(base, pos, items)`` for non-decreasing ``pos``; also returns the slots ``base`` landed in."""
    at = pos + np.arange(len(pos))
    kept = np.ones(len(base) + len(pos), dtype=bool)
    kept[at] = False
    out = np.empty(len(kept), dtype=np.result_type(base, items))
    out[at] = items
    out[kept] = base
    return out, at, kept


def _union_keys(a: np.ndarray, b: np.ndarray, wa=None, wb=None):
    """Merge sorted unique key arrays.

    Returns ``(union, map_a, map_b, words)`` where ``map_x[i]`` is the position
    of ``x[i]`` in ``union``; a map of ``None`` means the identity. ``wa`` and
    ``wb`` are optional single-word packings of the keys, used for the search;
    ``words`` is the matching packing of ``union`` when both were given.
    """
    if len(a) == len(b) and np.array_equal(a, b):
        return b, None, None, wb
    if len(b) == 0:
        return a, None, np.zeros(0, np.int64), wa
    if wa is not None and wb is not None:
        pos = np.searchsorted(wb, wa)
        found = pos < len(b)
        found[found] = wb[pos[found]] == wa[found]
    else:
        wa = wb = None
        pos = np.searchsorted(b, a)
        found = pos < len(b)
        found[found] = b[pos[found]] == a[found]
    if found.all():
        return b, pos, None, wb
    fresh = ~found
    new_pos = pos[fresh]
    union, at, kept = _scatter_insert(b, new_pos, a[fresh])
    words = None if wb is None else _scatter_insert(wb, new_pos, wa[fresh])[0]
    map_b = np.flatnonzero(kept)
    map_a = np.empty(len(a), dtype=np.int64)
    map_a[fresh] = at
    map_a[found] = map_b[pos[found]]
    return union, map_a, map_b, words


# -- algebra -------------------------------------------------------------------


def from_triples(triples, collision=np.add) -> AssociativeArray:
    return AssociativeArray.from_triples(triples, collision)


def nnz(A: AssociativeArray) -> int:
    return A.nnz


def to_triples(A: AssociativeArray) -> list[Triple]:
    return A.to_triples()


def add(A: AssociativeArray, B: AssociativeArray) -> AssociativeArray:
    """Element-wise union, summing values present in both (overflow-checked)."""
    if A.nnz == 0:
        return B
    if B.nnz == 0:
        return A
    # merge the smaller array into the larger one
    if A.nnz > B.nnz:
        A, B = B, A
    rows, a_r, b_r, rw = _union_keys(A._rows, B._rows, A._key_words(0), B._key_words(0))
    cols, a_c, b_c, cw = _union_keys(A._cols, B._cols, A._key_words(1), B._key_words(1))
    ncols = len(cols)

    b_counts = np.diff(B._indptr)
    b_rows = np.arange(len(B._rows), dtype=np.int64) if b_r is None else b_r
    b_ci = B._indices if b_c is None else b_c[B._indices]
    b_lin = np.repeat(b_rows, b_counts) * ncols + b_ci

    a_ri, a_ci = A._coo()
    if a_r is not None:
        a_ri = a_r[a_ri]
    if a_c is not None:
        a_ci = a_c[a_ci]
    a_lin = a_ri * ncols + a_ci

    pos = np.searchsorted(b_lin, a_lin)
    hit = pos < len(b_lin)
    hit[hit] = b_lin[pos[hit]] == a_lin[hit]
    miss = ~hit

    vals = B._vals.copy()
    hp = pos[hit]
    summed = checked_add(vals[hp], A._vals[hit])
    vals[hp] = summed
    mp = pos[miss]
    ci, at, kept = _scatter_insert(b_ci, mp, a_ci[miss])
    merged = np.empty(len(ci), dtype=np.int64)
    merged[at] = A._vals[miss]
    merged[kept] = vals
    vals = merged

    row_counts = np.zeros(len(rows), dtype=np.int64)
    row_counts[b_rows] = b_counts
    row_counts += np.bincount(a_ri[miss], minlength=len(rows))

    if (summed == 0).any():
        ri = np.repeat(np.arange(len(rows), dtype=np.int64), row_counts)
        return _assemble(rows, cols, ri, ci, vals)
    indptr = np.zeros(len(rows) + 1, dtype=np.int64)
    np.cumsum(row_counts, out=indptr[1:])
    out = AssociativeArray._make(np.ascontiguousarray(rows), np.ascontiguousarray(cols), indptr, ci, vals)
    out._words = [rw, cw]
    return out


def elementwise_multiply(A: AssociativeArray, B: AssociativeArray, times=np.multiply) -> AssociativeArray:
    """Element-wise intersection, combining values present in both with ``times``."""
    if A.nnz == 0 or B.nnz == 0:
        return AssociativeArray.empty()
    rows, ia, ib = np.intersect1d(A._rows, B._rows, assume_unique=True, return_indices=True)
    cols, ja, jb = np.intersect1d(A._cols, B._cols, assume_unique=True, return_indices=True)
    if len(rows) == 0 or len(cols) == 0:
        return AssociativeArray.empty()
    ncols = len(cols)

    def restrict(X, i_map, j_map):
        rmap = np.full(len(X._rows), -1, dtype=np.int64)
        rmap[i_map] = np.arange(len(i_map))
        cmap = np.full(len(X._cols), -1, dtype=np.int64)
        cmap[j_map] = np.arange(len(j_map))
        ri, ci = X._coo()
        ri, ci = rmap[ri], cmap[ci]
        keep = (ri >= 0) & (ci >= 0)
        return ri[keep] * ncols + ci[keep], X._vals[keep]

    a_lin, a_vals = restrict(A, ia, ja)
    b_lin, b_vals = restrict(B, ib, jb)
    common, xa, xb = np.intersect1d(a_lin, b_lin, assume_unique=True, return_indices=True)
    vals = apply(times, a_vals[xa], b_vals[xb])
    ri, ci = np.divmod(common, ncols)
    return _assemble(rows, cols, ri, ci, vals)


def semiring_matmul(A: AssociativeArray, B: AssociativeArray, sr: ValueSemiring = PLUS_TIMES) -> AssociativeArray:
    """Array product over ``sr``: C[r, c] = plus-fold over k of times(A[r, k], B[k, c]).

    Expand-sort-compress: every contributing product is generated, then
    grouped by output coordinate and folded with ``sr.plus``.
    """
    if A.nnz == 0 or B.nnz == 0:
        return AssociativeArray.empty()
    _, ka, kb = np.intersect1d(A._cols, B._rows, assume_unique=True, return_indices=True)
    if len(ka) == 0:
        return AssociativeArray.empty()
    to_b_row = np.full(len(A._cols), -1, dtype=np.int64)
    to_b_row[ka] = kb
    a_ri, a_ci = A._coo()
    k = to_b_row[a_ci]
    keep = k >= 0
    a_ri, k, a_vals = a_ri[keep], k[keep], A._vals[keep]

    counts = B._indptr[k + 1] - B._indptr[k]
    total = int(counts.sum())
    if total == 0:
        return AssociativeArray.empty()
    ends = np.cumsum(counts)
    offsets = np.arange(total, dtype=np.int64) - np.repeat(ends - counts, counts)
    pos = np.repeat(B._indptr[k], counts) + offsets

    out_r = np.repeat(a_ri, counts)
    out_c = B._indices[pos]
    prod = apply(sr.times, np.repeat(a_vals, counts), B._vals[pos])
    return _from_coo(A._rows, B._cols, out_r, out_c, prod, sr.plus)


def row_query(A: AssociativeArray, row: str) -> AssociativeArray:
    """Single-row sub-array; its column keys are the neighbours of ``row``."""
    i = A._find(A._rows, row)
    if i < 0:
        return AssociativeArray.empty()
    lo, hi = A._indptr[i], A._indptr[i + 1]
    n = hi - lo
    return AssociativeArray._make(
        A._rows[i : i + 1].copy(),
        A._cols[A._indices[lo:hi]],
        np.array([0, n], dtype=np.int64),
        np.arange(n, dtype=np.int64),
        A._vals[lo:hi].copy(),
    )


def transpose(A: AssociativeArray) -> AssociativeArray:
    if A.nnz == 0:
        return A
    ri, ci = A._coo()
    order = np.argsort(ci, kind="stable")
    return _assemble(A._cols, A._rows, ci[order], ri[order], A._vals[order], prune=False)
