"""Dependence matrix -> unweighted graph: MST, PMFG and winner-take-all thresholding."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .dependence import DependenceMatrix
from .errors import DataError, ValidationError
from .planarity import lr_planar


@dataclass(frozen=True)
class UnweightedGraph:
    adjacency: np.ndarray
    tickers: tuple[str, ...]

    def __post_init__(self):
        a = np.array(self.adjacency, dtype=bool, copy=True)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] != len(self.tickers):
            raise DataError(f"adjacency shape {a.shape} does not match {len(self.tickers)} labels")
        if not np.array_equal(a, a.T):
            raise DataError("adjacency must be symmetric")
        if a.diagonal().any():
            raise DataError("self-loops are not allowed")
        a.setflags(write=False)
        object.__setattr__(self, "adjacency", a)
        object.__setattr__(self, "tickers", tuple(self.tickers))

    @classmethod
    def from_edges(cls, n: int, edges, tickers: Sequence[str] | None = None) -> "UnweightedGraph":
        a = np.zeros((n, n), dtype=bool)
        for i, j in edges:
            a[i, j] = a[j, i] = True
        return cls(a, tuple(tickers) if tickers is not None else tuple(str(i) for i in range(n)))

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_edges(self) -> int:
        return int(np.triu(self.adjacency, 1).sum())

    @property
    def density(self) -> float:
        return 2.0 * self.n_edges / (self.n * (self.n - 1)) if self.n > 1 else 0.0

    @property
    def degree(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    def edges(self) -> list[tuple[int, int]]:
        i, j = np.nonzero(np.triu(self.adjacency, 1))
        return list(zip(i.tolist(), j.tolist()))

    def edge_set(self) -> set[tuple[int, int]]:
        return set(self.edges())

    def neighbours(self) -> list[list[int]]:
        return [np.flatnonzero(row).tolist() for row in self.adjacency]

    def to_edge_csv(self, path: str | Path, header_comment: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["ticker_i", "ticker_j"])
            for i, j in self.edges():
                w.writerow([self.tickers[i], self.tickers[j]])

    def to_adjacency_csv(self, path: str | Path, header_comment: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["", *self.tickers])
            for t, row in zip(self.tickers, self.adjacency):
                w.writerow([t, *row.astype(int).tolist()])


def edge_order(m: DependenceMatrix) -> np.ndarray:
    """Pairs (i, j), i < j, strongest first; ties by (i, j).

    Distances rank ascending, every other kind descending.
    """
    n = m.n
    iu, ju = np.triu_indices(n, 1)
    w = m.values[iu, ju]
    if not np.all(np.isfinite(w)):
        raise DataError(f"{m.kind} matrix has non-finite entries")
    key = w if m.kind == "distance" else -w
    idx = np.lexsort((ju, iu, key))
    return np.stack([iu[idx], ju[idx]], axis=1)


class _DisjointSet:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        p = self.parent
        while p[a] != a:
            p[a] = p[p[a]]
            a = p[a]
        return a

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[rb] = ra
        return True


def mst(m: DependenceMatrix, similarity: bool = False) -> UnweightedGraph:
    """Kruskal spanning tree.

    A distance matrix is minimized. With ``similarity=True`` a similarity
    matrix (correlation, MI) is accepted and the tree maximizes it, which is
    the same tree as for any strictly decreasing distance transform.
    """
    if m.kind != "distance" and not similarity:
        raise ValidationError(f"MST needs a distance matrix (got {m.kind}); pass similarity=True to rank by similarity")
    if m.kind == "distance" and similarity:
        raise ValidationError("similarity=True given for a distance matrix")
    n = m.n
    if n < 2:
        raise DataError("MST needs at least 2 nodes")
    ds = _DisjointSet(n)
    edges = []
    for i, j in edge_order(m).tolist():
        if ds.union(i, j):
            edges.append((i, j))
            if len(edges) == n - 1:
                break
    return UnweightedGraph.from_edges(n, edges, m.tickers)


def pmfg(m: DependenceMatrix) -> UnweightedGraph:
    """Greedy planar filtering: add edges strongest first, keep each one iff the graph stays planar."""
    n = m.n
    if n < 3:
        raise DataError("PMFG needs at least 3 nodes")
    target = 3 * (n - 2)
    ds = _DisjointSet(n)
    edges: list[tuple[int, int]] = []
    for i, j in edge_order(m).tolist():
        # joining two components can never break planarity
        if ds.find(i) != ds.find(j) or lr_planar(n, edges + [(i, j)]):
            edges.append((i, j))
            ds.union(i, j)
            if len(edges) == target:
                break
    return UnweightedGraph.from_edges(n, edges, m.tickers)


def n_edges_for_density(density: float, n: int) -> int:
    if not 0.0 <= density < 1.0:
        raise ValidationError(f"density must lie in [0, 1), got {density}")
    total = n * (n - 1) // 2
    # guard against 0.29 * 100 = 28.999999999999996
    return min(total, math.floor(density * total + 1e-9))


def wta(m: DependenceMatrix, density: float) -> UnweightedGraph:
    """Keep the floor(density * N(N-1)/2) strongest edges."""
    k = n_edges_for_density(density, m.n)
    return UnweightedGraph.from_edges(m.n, edge_order(m)[:k].tolist(), m.tickers)


def wta_threshold(m: DependenceMatrix, threshold: float) -> UnweightedGraph:
    """Keep every edge whose weight is >= threshold (<= for distances)."""
    keep = m.values <= threshold if m.kind == "distance" else m.values >= threshold
    keep = keep & ~np.eye(m.n, dtype=bool)
    return UnweightedGraph(keep, m.tickers)


def wta_sequence(m: DependenceMatrix, densities: Sequence[float]) -> list[UnweightedGraph]:
    """WTA graphs for many densities sharing one edge ordering."""
    order = edge_order(m).tolist()
    return [UnweightedGraph.from_edges(m.n, order[:n_edges_for_density(d, m.n)], m.tickers)
            for d in densities]


FILTERS = ("mst", "pmfg", "wta")


def apply_filter(m: DependenceMatrix, kind: str, density: float | None = None) -> UnweightedGraph:
    if kind == "mst":
        return mst(m, similarity=m.kind != "distance")
    if kind == "pmfg":
        return pmfg(m)
    if kind == "wta":
        if density is None:
            raise ValidationError("WTA filter needs a density")
        return wta(m, density)
    raise ValidationError(f"filter must be one of {FILTERS}, got {kind!r}")
