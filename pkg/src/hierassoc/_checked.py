"""Overflow-checked int64 kernels.

numpy integer arithmetic wraps silently; a counting store must refuse to do
that, so every add/multiply on stored values goes through here.
"""
import functools
import operator

import numpy as np

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1

# Group sums whose float64 magnitude bound stays below this cannot overflow.
_SAFE = 2.0**62

_ALIASES = {
    operator.add: np.add,
    operator.mul: np.multiply,
    max: np.maximum,
    min: np.minimum,
}


class ValueOverflowError(OverflowError):
    """A value operation left the 64-bit signed range."""


def normalize_op(op):
    """Map builtin/operator callables onto the equivalent numpy ufunc."""
    return _ALIASES.get(op, op)


def _check_int(x):
    if not INT64_MIN <= x <= INT64_MAX:
        raise ValueOverflowError(f"value {x} outside the int64 range")
    return x


def checked_add(a, b):
    s = a + b
    if ((a ^ s) & (b ^ s)).min(initial=0) < 0:
        raise ValueOverflowError("int64 overflow in add")
    return s


def checked_multiply(a, b):
    p = a * b
    approx = np.abs(a.astype(np.float64) * b.astype(np.float64))
    suspect = np.flatnonzero(approx >= _SAFE)
    for i in suspect:
        _check_int(int(a[i]) * int(b[i]))
    return p


def apply(op, a, b):
    """Element-wise ``op(a, b)`` on int64 arrays, raising on overflow."""
    op = normalize_op(op)
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if op is np.add:
        return checked_add(a, b)
    if op is np.multiply:
        return checked_multiply(a, b)
    if isinstance(op, np.ufunc):
        return op(a, b).astype(np.int64, copy=False)
    out = [_check_int(int(op(x, y))) for x, y in zip(a.tolist(), b.tolist())]
    return np.array(out, dtype=np.int64)


def reduce_groups(op, vals, starts):
    """Fold ``vals[starts[k]:starts[k+1]]`` with ``op`` for every group k.

    ``starts`` must be strictly increasing and begin at 0.
    """
    op = normalize_op(op)
    vals = np.asarray(vals, dtype=np.int64)
    if len(starts) == len(vals):
        return vals.copy()
    if op is np.add:
        out = np.add.reduceat(vals, starts)
        bound = np.add.reduceat(np.abs(vals.astype(np.float64)), starts)
        for g in np.flatnonzero(bound >= _SAFE):
            lo = starts[g]
            hi = starts[g + 1] if g + 1 < len(starts) else len(vals)
            # wrapped result is exact whenever the true sum fits
            _check_int(sum(vals[lo:hi].tolist()))
        return out
    if isinstance(op, np.ufunc) and op is not np.multiply:
        return op.reduceat(vals, starts).astype(np.int64, copy=False)
    if op is np.multiply:
        fold = lambda x, y: _check_int(x * y)  # noqa: E731
    else:
        fold = lambda x, y: _check_int(int(op(x, y)))  # noqa: E731
    bounds = np.append(starts, len(vals)).tolist()
    flat = vals.tolist()
    out = [functools.reduce(fold, flat[lo:hi]) for lo, hi in zip(bounds[:-1], bounds[1:])]
    return np.array(out, dtype=np.int64)
