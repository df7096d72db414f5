"""Hierarchical in-memory associative arrays for streaming graph updates."""
from ._checked import ValueOverflowError
from .assoc import (
    MAX_MIN,
    PLUS_TIMES,
    AssociativeArray,
    MalformedKeyError,
    Triple,
    TripleBatch,
    ValueSemiring,
    add,
    as_batch,
    elementwise_multiply,
    from_triples,
    nnz,
    row_query,
    semiring_matmul,
    to_triples,
    transpose,
)
from .hier import DEFAULT_CUTS, CutSchedule, HierarchicalArray, HierStats

__version__ = "0.1.0"
