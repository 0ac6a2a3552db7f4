"""Shared helpers: deterministic seed fan-out and scoring-cost instrumentation."""

from __future__ import annotations

import hashlib

import numpy as np


def child_seed(root_seed: int, *labels: object) -> int:
    """Derive a stable sub-seed from a root seed and a label path.

    Same (root_seed, labels) always yields the same value, across runs and
    platforms, so every randomized component can own an independent stream.
    """
    h = hashlib.sha256()
    h.update(str(int(root_seed)).encode())
    for label in labels:
        h.update(b"/")
        h.update(str(label).encode())
    return int.from_bytes(h.digest()[:8], "big")


def rng_for(root_seed: int, *labels: object) -> np.random.Generator:
    return np.random.default_rng(child_seed(root_seed, *labels))


class OpCounter:
    """Counts reference rows scanned while scoring, for complexity checks.

    Learners add the number of stored model rows (centroids, observers,
    neurons, tree nodes, ...) they compare a query against. Index-backed
    lookups are counted separately since tree traversal is sub-linear.
    """

    def __init__(self) -> None:
        self.rows_scanned = 0
        self.index_queries = 0

    def add_rows(self, n: int) -> None:
        self.rows_scanned += int(n)

    def add_index_query(self, n: int = 1) -> None:
        self.index_queries += int(n)
