"""Directed weighted graphs and their Laplacian matrices.

The Laplacian follows the restoring-force law ``F_ij = -w_ij (x_i - x_j)``,
which gives ``L_ii = sum_j w_ij`` and ``L_ij = -w_ij`` (out-weight form).
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as _cc

Edge = tuple[int, int, float]


@dataclass(frozen=True)
class WeightedDigraph:
    """Node count plus directed weighted edges ``(source, target, weight)``.

    Duplicate ``(i, j)`` pairs are merged by summing their weights and the
    edge tuple is kept sorted, so two graphs with the same couplings compare
    equal regardless of input order.
    """

    n: int
    edges: tuple[Edge, ...] = ()

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"node count must be a positive integer, got {self.n!r}")
        merged: dict[tuple[int, int], list[float]] = defaultdict(list)
        for edge in self.edges:
            i, j, w = edge
            if int(i) != i or int(j) != j:
                raise ValueError(f"node indices must be integers: {edge!r}")
            i, j, w = int(i), int(j), float(w)
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge {edge!r} has an endpoint outside [0, {self.n})")
            if i == j:
                raise ValueError(f"self-loop {i} -> {i} is not allowed")
            if not math.isfinite(w) or w < 0:
                raise ValueError(f"edge weight must be finite and non-negative: {edge!r}")
            merged[(i, j)].append(w)
        canonical = tuple(
            (i, j, math.fsum(ws)) for (i, j), ws in sorted(merged.items())
        )
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "edges", canonical)

    def weight_matrix(self) -> np.ndarray:
        """Dense ``W`` with ``W[i, j] = w_ij``."""
        W = np.zeros((self.n, self.n))
        for i, j, w in self.edges:
            W[i, j] = w
        return W

    def is_symmetric(self) -> bool:
        W = self.weight_matrix()
        return bool(np.array_equal(W, W.T))


def build_laplacian(g: WeightedDigraph) -> np.ndarray:
    """Return the (read-only) Laplacian of ``g``.

    Off-diagonals are ``-w_ij``; each diagonal entry is the correctly rounded
    sum of the row's weights (``math.fsum``). Row sums are therefore exactly
    zero whenever the weight sum is representable (integer or dyadic weights)
    and within half an ulp of the diagonal otherwise.
    """
    L = np.zeros((g.n, g.n))
    rows: dict[int, list[float]] = defaultdict(list)
    for i, j, w in g.edges:
        L[i, j] = -w
        rows[i].append(w)
    for i, ws in rows.items():
        L[i, i] = math.fsum(ws)
    L.flags.writeable = False
    return L


def connected_components(g: WeightedDigraph) -> list[list[int]]:
    """Components of the undirected support graph.

    Nodes ``i`` and ``j`` are linked if ``w_ij > 0`` or ``w_ji > 0``.
    Components are returned as sorted node lists, ordered by their smallest
    node.
    """
    support = [(i, j) for i, j, w in g.edges if w > 0]
    rows = [i for i, _ in support]
    cols = [j for _, j in support]
    adj = coo_matrix((np.ones(len(support)), (rows, cols)), shape=(g.n, g.n))
    _, labels = _cc(adj, directed=True, connection="weak")
    groups: dict[int, list[int]] = defaultdict(list)
    for node, label in enumerate(labels):
        groups[int(label)].append(node)
    return sorted(groups.values(), key=lambda c: c[0])


def add_weak_ties(g: WeightedDigraph, ties: Iterable[Edge]) -> WeightedDigraph:
    """Return a new graph with ``ties`` appended to the edges of ``g``."""
    ties = list(ties)
    for tie in ties:
        if tie[2] < 0:
            raise ValueError(f"weak tie weight must be non-negative: {tie!r}")
    return WeightedDigraph(g.n, g.edges + tuple(ties))


def read_graph(path) -> WeightedDigraph:
    """Parse a graph file.

    Format: a header line ``n <count>``, then one ``i j w`` edge per line.
    Blank lines and lines starting with ``#`` are ignored.
    """
    n = None
    edges = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if n is None:
                if len(parts) != 2 or parts[0] != "n":
                    raise ValueError(f"{path}:{lineno}: expected header 'n <count>'")
                n = int(parts[1])
                continue
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 'i j w', got {line!r}")
            edges.append((int(parts[0]), int(parts[1]), float(parts[2])))
    if n is None:
        raise ValueError(f"{path}: missing 'n <count>' header")
    return WeightedDigraph(n, tuple(edges))


def write_graph(g: WeightedDigraph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"n {g.n}\n")
        for i, j, w in g.edges:
            fh.write(f"{i} {j} {w!r}\n")
