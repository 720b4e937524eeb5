"""Adjacency construction from dependency parses.

A parse tree over n words becomes an (n, n) float64 matrix with a 1 for
every head-dependent pair in both directions plus a 1 on the diagonal, so
each node aggregates from its parent, its children, and itself.
"""

from __future__ import annotations

import numpy as np

from .data_model import DependencyGraph, validate_heads
from .errors import GraphError


def build_graph(heads, n: int | None = None) -> DependencyGraph:
    """Build the symmetric self-loop adjacency for 1-based heads (0 = root)."""
    heads = tuple(int(h) for h in heads)
    if n is None:
        n = len(heads)
    violations = validate_heads(heads, n)
    if violations:
        raise GraphError("; ".join(violations))
    adjacency = np.eye(n, dtype=np.float64)
    for child, head in enumerate(heads):
        if head == 0:
            continue
        parent = head - 1
        adjacency[child, parent] = 1.0
        adjacency[parent, child] = 1.0
    adjacency.flags.writeable = False
    return DependencyGraph(n=n, adjacency=adjacency)


def normalize_adjacency(graph: DependencyGraph, mode: str = "none") -> np.ndarray:
    """Return the adjacency, optionally row-normalized by node degree.

    Degree counts the self-loop, so every row sum is >= 1 and division is safe.
    """
    if mode == "none":
        return graph.adjacency
    if mode == "degree":
        degrees = graph.adjacency.sum(axis=1, keepdims=True)
        out = graph.adjacency / degrees
        out.flags.writeable = False
        return out
    raise GraphError(f"unknown adjacency normalization: {mode!r}")
