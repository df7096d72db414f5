"""Hierarchical associative arrays.

Updates land in the smallest layer. When layer ``i`` holds more than
``cuts[i]`` non-zero entries after a batch, it is added into layer ``i + 1``
and cleared; the check runs bottom-up so one batch can cascade through several
layers. The last layer is unbounded. Queries sum every layer.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .assoc import AssociativeArray, add, as_batch, row_query

__all__ = ["DEFAULT_CUTS", "CutSchedule", "HierStats", "HierarchicalArray"]

DEFAULT_CUTS = (2**15, 2**19, 2**23)


@dataclass(frozen=True)
class CutSchedule:
    """Non-zero thresholds for every layer but the last."""

    cuts: tuple[int, ...] = DEFAULT_CUTS

    def __post_init__(self):
        cuts = tuple(self.cuts)
        for c in cuts:
            if isinstance(c, bool) or not isinstance(c, int):
                raise TypeError(f"cut values must be integers, got {c!r}")
            if c <= 0:
                raise ValueError(f"cut values must be positive, got {c}")
        for lo, hi in zip(cuts, cuts[1:]):
            if hi <= lo:
                raise ValueError(f"cut values must be strictly increasing, got {list(cuts)}")
        object.__setattr__(self, "cuts", cuts)

    @classmethod
    def parse(cls, text: str) -> CutSchedule:
        """Parse ``"4,16"``; an empty string or ``"flat"`` gives a single layer."""
        text = text.strip()
        if text in ("", "flat"):
            return cls(())
        return cls(tuple(int(part) for part in text.split(",")))

    @property
    def n_layers(self) -> int:
        return len(self.cuts) + 1


@dataclass(frozen=True)
class HierStats:
    layer_nnz: tuple[int, ...]
    cascades: tuple[int, ...]
    lifetime_updates: int


class HierarchicalArray:
    """Layered write buffer of associative arrays. Single owner; not thread-safe."""

    def __init__(self, schedule: CutSchedule | Sequence[int] | None = None):
        if schedule is None:
            schedule = CutSchedule()
        elif not isinstance(schedule, CutSchedule):
            schedule = CutSchedule(tuple(schedule))
        self.schedule = schedule
        self._layers = [AssociativeArray.empty() for _ in range(schedule.n_layers)]
        self._cascades = [0] * schedule.n_layers
        self.lifetime_updates = 0

    @property
    def layers(self) -> tuple[AssociativeArray, ...]:
        return tuple(self._layers)

    def insert_batch(self, triples) -> HierarchicalArray:
        """Fold a block of triples into layer 1 and cascade as needed.

        Nothing is mutated until the whole batch has been validated and every
        merge has succeeded, so a bad batch leaves the hierarchy untouched.
        """
        batch = as_batch(triples)
        if len(batch) == 0:
            return self
        layers = list(self._layers)
        cascades = list(self._cascades)
        layers[0] = add(layers[0], AssociativeArray.from_triples(batch))
        for i, cut in enumerate(self.schedule.cuts):
            if layers[i].nnz > cut:
                layers[i + 1] = add(layers[i + 1], layers[i])
                layers[i] = AssociativeArray.empty()
                cascades[i] += 1
        self._layers = layers
        self._cascades = cascades
        self.lifetime_updates += len(batch)
        return self

    def materialize(self) -> AssociativeArray:
        """Sum of all layers; the hierarchy itself is left unchanged."""
        total = AssociativeArray.empty()
        for layer in self._layers:
            total = add(total, layer)
        return total

    def compact(self) -> HierarchicalArray:
        """Sum every layer into the last one and clear the others."""
        total = self.materialize()
        self._layers = [AssociativeArray.empty() for _ in self._layers[:-1]] + [total]
        return self

    def query_neighbors(self, row: str) -> AssociativeArray:
        out = AssociativeArray.empty()
        for layer in self._layers:
            out = add(out, row_query(layer, row))
        return out

    def stats(self) -> HierStats:
        return HierStats(
            layer_nnz=tuple(layer.nnz for layer in self._layers),
            cascades=tuple(self._cascades),
            lifetime_updates=self.lifetime_updates,
        )

    def __repr__(self):
        return f"HierarchicalArray(cuts={list(self.schedule.cuts)}, layer_nnz={list(self.stats().layer_nnz)})"
