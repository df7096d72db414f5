"""Seedable power-law edge streams.

Source and destination vertices are drawn independently from a bounded Zipf
distribution over ``[1, vertex_count]``. Each batch has its own PRNG stream,
seeded from ``(seed, batch_index)``, so batches can be produced in any order
or in parallel and always come out identical.
"""
from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .assoc import TripleBatch, as_batch

__all__ = [
    "KEY_FORMATS",
    "StreamConfig",
    "ZipfSampler",
    "TooFewSamplesError",
    "DegenerateStreamError",
    "mix_seed",
    "gen_batch",
    "iter_batches",
    "format_key",
    "format_keys",
    "degree_check",
]

KEY_FORMATS = ("decimal", "dotted-quad")
MIN_DEGREE_SAMPLES = 100_000

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def mix_seed(seed: int, index: int) -> int:
    """Derive an independent 64-bit seed for sub-stream ``index`` of ``seed``."""
    return _splitmix64(_splitmix64(seed & _MASK64) ^ (index & _MASK64))


@dataclass(frozen=True)
class StreamConfig:
    total_entries: int = 100_000_000
    batch_size: int = 100_000
    num_batches: int = 1_000
    vertex_count: int = 2**24
    alpha: float = 1.2
    seed: int = 0
    key_format: str = "decimal"

    def __post_init__(self):
        for name in ("total_entries", "batch_size", "num_batches"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.total_entries != self.batch_size * self.num_batches:
            raise ValueError(
                f"total_entries ({self.total_entries}) != batch_size ({self.batch_size})"
                f" x num_batches ({self.num_batches})"
            )
        if not self.alpha > 0:
            raise ValueError("alpha must be > 0")
        if self.vertex_count < 2:
            raise ValueError("vertex_count must be at least 2")
        if self.key_format not in KEY_FORMATS:
            raise ValueError(f"key_format must be one of {KEY_FORMATS}")
        if self.key_format == "dotted-quad" and self.vertex_count >= 2**32:
            raise ValueError("dotted-quad keys need vertex_count < 2**32")

    @classmethod
    def sized(cls, total_entries: int, batch_size: int, **kw) -> StreamConfig:
        """Config with ``num_batches`` derived; the total must divide evenly."""
        if batch_size < 1 or total_entries < 1:
            raise ValueError("total_entries and batch_size must be positive")
        if total_entries % batch_size:
            raise ValueError(f"total_entries ({total_entries}) is not a multiple of batch_size ({batch_size})")
        return cls(total_entries, batch_size, total_entries // batch_size, **kw)

    def with_seed(self, seed: int) -> StreamConfig:
        return replace(self, seed=seed)


class ZipfSampler:
    """Bounded Zipf sampler, P(k) proportional to k**-alpha for k in [1, n].

    Rejection-inversion (Hoermann & Derflinger), vectorised: constant memory
    and valid for any alpha > 0, including alpha == 1 and alpha -> 0.
    """

    def __init__(self, n: int, alpha: float):
        self.n = int(n)
        self.alpha = float(alpha)
        self._hx1 = self._hint(np.float64(1.5)) - 1.0
        self._hn = self._hint(np.float64(self.n + 0.5))
        self._s = 2.0 - self._hint_inv(self._hint(np.float64(2.5)) - self._h(np.float64(2.0)))

    @staticmethod
    def _log1p_over_x(x):
        small = np.abs(x) <= 1e-8
        safe = np.where(small, 1.0, x)
        return np.where(small, 1.0 - x * (0.5 - x * (1.0 / 3.0 - 0.25 * x)), np.log1p(safe) / safe)

    @staticmethod
    def _expm1_over_x(x):
        small = np.abs(x) <= 1e-8
        safe = np.where(small, 1.0, x)
        return np.where(small, 1.0 + x * 0.5 * (1.0 + x / 3.0 * (1.0 + 0.25 * x)), np.expm1(safe) / safe)

    def _h(self, x):
        return np.exp(-self.alpha * np.log(x))

    def _hint(self, x):
        log_x = np.log(x)
        return self._expm1_over_x((1.0 - self.alpha) * log_x) * log_x

    def _hint_inv(self, x):
        t = np.maximum(x * (1.0 - self.alpha), -1.0)
        return np.exp(self._log1p_over_x(t) * x)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        out = np.empty(size, dtype=np.int64)
        filled = 0
        while filled < size:
            want = size - filled
            # acceptance is high; oversample a little to usually finish in one round
            u = self._hn + rng.random(want + want // 8 + 16) * (self._hx1 - self._hn)
            x = self._hint_inv(u)
            k = np.clip(np.floor(x + 0.5), 1, self.n)
            ok = (k - x <= self._s) | (u >= self._hint(k + 0.5) - self._h(k))
            got = k[ok][:want].astype(np.int64)
            out[filled : filled + len(got)] = got
            filled += len(got)
        return out


@functools.lru_cache(maxsize=16)
def _sampler(n: int, alpha: float) -> ZipfSampler:
    return ZipfSampler(n, alpha)


def format_key(vertex_id: int, key_format: str = "decimal") -> str:
    return str(format_keys(np.array([vertex_id], dtype=np.int64), key_format)[0])


def format_keys(ids: np.ndarray, key_format: str = "decimal") -> np.ndarray:
    """Vectorised vertex-id to key conversion (decimal or dotted-quad)."""
    ids = np.asarray(ids, dtype=np.int64)
    if len(ids) and ids.min() < 1:
        raise ValueError("vertex ids start at 1")
    if key_format == "decimal":
        width = len(str(int(ids.max()))) if len(ids) else 1
        return ids.astype(f"<U{width}")
    if key_format == "dotted-quad":
        if len(ids) and ids.max() >= 2**32:
            raise ValueError(f"vertex id {int(ids.max())} does not fit in a dotted quad")
        octets = [((ids >> shift) & 0xFF).astype("<U3") for shift in (24, 16, 8, 0)]
        out = octets[0]
        for o in octets[1:]:
            out = np.strings.add(np.strings.add(out, "."), o)
        return out
    raise ValueError(f"unknown key format {key_format!r}")


def gen_batch(cfg: StreamConfig, batch_index: int) -> TripleBatch:
    """Batch ``batch_index`` of the stream: ``cfg.batch_size`` unit-valued edges."""
    if not 0 <= batch_index < cfg.num_batches:
        raise IndexError(f"batch_index {batch_index} outside [0, {cfg.num_batches})")
    rng = np.random.Generator(np.random.PCG64(mix_seed(cfg.seed, batch_index)))
    sampler = _sampler(cfg.vertex_count, cfg.alpha)
    src = sampler.sample(rng, cfg.batch_size)
    dst = sampler.sample(rng, cfg.batch_size)
    return TripleBatch._trusted(
        format_keys(src, cfg.key_format),
        format_keys(dst, cfg.key_format),
        np.ones(cfg.batch_size, dtype=np.int64),
    )


def iter_batches(cfg: StreamConfig):
    for i in range(cfg.num_batches):
        yield gen_batch(cfg, i)


class TooFewSamplesError(ValueError):
    pass


class DegenerateStreamError(ValueError):
    pass


def degree_check(triples, alpha: float | None = None, min_degree: int = 5) -> float:
    """Slope of log(out-degree) against log(rank) over the top decades.

    Sources are ranked by out-degree (triple count). The fit uses ranks from 1
    up to one decade short of the number of sources with at least
    ``min_degree`` triples; a Zipf(alpha) stream gives a slope near -alpha.
    """
    batch = as_batch(triples)
    if len(batch) < MIN_DEGREE_SAMPLES:
        raise TooFewSamplesError(f"need at least {MIN_DEGREE_SAMPLES} triples, got {len(batch)}")
    _, counts = np.unique(batch.rows, return_counts=True)
    degrees = np.sort(counts)[::-1]
    degrees = degrees[degrees >= min_degree]
    if len(degrees) < 100:
        raise DegenerateStreamError(
            f"only {len(degrees)} sources with out-degree >= {min_degree}; need 100 for a two-decade fit"
        )
    top = 10 ** (int(math.log10(len(degrees))) - 1)
    ranks = np.arange(1, top + 1)
    slope = float(np.polyfit(np.log(ranks), np.log(degrees[:top]), 1)[0])
    if alpha is not None and abs(slope + alpha) > 0.5:
        warnings.warn(f"fitted degree slope {slope:.3f} is far from -alpha = {-alpha:.3f}", stacklevel=2)
    return slope
