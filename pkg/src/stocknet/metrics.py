"""Local and global characteristics of unweighted graphs.

Conventions for disconnected graphs: distance averages run over reachable
pairs only; closeness of node v is |R(v)| / sum of distances to its reachable
set R(v) (0 when isolated); nodes of degree < 2 have clustering 0. Undefined
values are NaN in per-node arrays and ``None`` for global scalars.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import NumericError, ValidationError
from .filtering import UnweightedGraph

GLOBAL_METRICS = ("degree", "clustering", "char_path_length", "betweenness",
                  "closeness", "eccentricity", "eigenvector", "assortativity")
# average degree is fixed by the filter for MST/PMFG/WTA, so it is not tested by default
TEST_METRICS = ("closeness", "clustering", "eccentricity", "char_path_length",
                "assortativity", "eigenvector", "betweenness")
CONVENTIONS = {
    "distances": "unweighted hop counts; unreachable pairs excluded from all averages",
    "char_path_length": "mean over reachable ordered pairs",
    "node_shortest_path": "mean distance to reachable nodes; undefined for isolated nodes",
    "closeness": "|R(v)| / sum of distances to reachable set R(v); 0 for isolated nodes",
    "eccentricity": "max distance to a reachable node; undefined for isolated nodes",
    "clustering": "nodes with degree < 2 contribute 0 to the average",
    "betweenness": "unnormalized, unordered pairs, unreachable pairs contribute 0",
    "eigenvector": "unit-norm leading eigenvector of the component with the largest leading eigenvalue",
    "assortativity": "Newman degree correlation over edges; undefined for zero variance",
    "global_reduction": "global centralities are per-node averages over defined nodes",
}


def _adj(g) -> np.ndarray:
    return np.asarray(getattr(g, "adjacency", g), dtype=bool)


def shortest_paths(g) -> tuple[np.ndarray, np.ndarray]:
    """Hop distances (-1 = unreachable) and shortest-path counts for all pairs.

    Level-synchronous BFS from every source at once.
    """
    a = _adj(g)
    n = a.shape[0]
    af = a.astype(float)
    dist = np.full((n, n), -1, dtype=np.int64)
    sigma = np.zeros((n, n))
    np.fill_diagonal(dist, 0)
    np.fill_diagonal(sigma, 1.0)
    frontier = np.eye(n)
    d = 0
    while True:
        d += 1
        counts = frontier @ af
        new = (counts > 0) & (dist < 0)
        if not new.any():
            break
        dist[new] = d
        frontier = np.where(new, counts, 0.0)
        sigma += frontier
    return dist, sigma


def all_pairs_distances(g) -> np.ma.MaskedArray:
    """Distance table with unreachable pairs masked."""
    dist, _ = shortest_paths(g)
    return np.ma.masked_less(dist, 0)


def _reach(dist: np.ndarray) -> np.ndarray:
    r = dist > 0
    return r


def node_shortest_path(g, dist: np.ndarray | None = None) -> np.ndarray:
    dist = shortest_paths(g)[0] if dist is None else dist
    r = _reach(dist)
    cnt = r.sum(axis=1)
    tot = np.where(r, dist, 0).sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(cnt > 0, tot / np.maximum(cnt, 1), np.nan)


def char_path_length(g, dist: np.ndarray | None = None) -> float | None:
    dist = shortest_paths(g)[0] if dist is None else dist
    r = _reach(dist)
    if not r.any():
        return None
    return float(dist[r].sum() / r.sum())


def clustering(g) -> tuple[np.ndarray, float]:
    a = _adj(g).astype(float)
    k = a.sum(axis=1)
    links = ((a @ a) * a).sum(axis=1) / 2.0
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.where(k >= 2, 2.0 * links / (k * (k - 1)), 0.0)
    return c, float(c.mean()) if c.size else 0.0


def betweenness(g, dist: np.ndarray | None = None, sigma: np.ndarray | None = None) -> np.ndarray:
    """Sum over unordered pairs {u, w} not containing v of sigma_uw(v) / sigma_uw."""
    if dist is None or sigma is None:
        dist, sigma = shortest_paths(g)
    n = dist.shape[0]
    out = np.zeros(n)
    if n < 3:
        return out
    with np.errstate(invalid="ignore", divide="ignore"):
        inv = np.where(sigma > 0, 1.0 / sigma, 0.0)
    for v in range(n):
        dv_from = dist[:, v]
        dv_to = dist[v, :]
        ok_s = dv_from > 0
        ok_t = dv_to > 0
        through = (dv_from[:, None] + dv_to[None, :] == dist) & ok_s[:, None] & ok_t[None, :]
        through &= dist > 0
        out[v] = (np.outer(sigma[:, v], sigma[v, :]) * inv * through).sum() / 2.0
    return out


def closeness(g, dist: np.ndarray | None = None) -> np.ndarray:
    dist = shortest_paths(g)[0] if dist is None else dist
    r = _reach(dist)
    cnt = r.sum(axis=1)
    tot = np.where(r, dist, 0).sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(cnt > 0, cnt / np.maximum(tot, 1), 0.0)


def eccentricity(g, dist: np.ndarray | None = None) -> np.ndarray:
    dist = shortest_paths(g)[0] if dist is None else dist
    r = _reach(dist)
    ecc = np.where(r, dist, -1).max(axis=1).astype(float)
    ecc[~r.any(axis=1)] = np.nan
    return ecc


def components(g) -> list[np.ndarray]:
    dist, _ = shortest_paths(g)
    n = dist.shape[0]
    seen = np.zeros(n, dtype=bool)
    out = []
    for v in range(n):
        if not seen[v]:
            comp = np.flatnonzero(dist[v] >= 0)
            seen[comp] = True
            out.append(comp)
    return out


def _power_iteration(a: np.ndarray, tol: float, max_iter: int) -> tuple[np.ndarray, float]:
    # shift by I so bipartite components (eigenvalues +/- lambda) still converge
    m = a + np.eye(a.shape[0])
    x = np.full(a.shape[0], 1.0 / np.sqrt(a.shape[0]))
    for it in range(1, max_iter + 1):
        y = m @ x
        y /= np.linalg.norm(y)
        if np.max(np.abs(y - x)) <= tol * np.max(np.abs(y)):
            return y, float(y @ a @ y)
        x = y
    raise NumericError(f"eigenvector centrality did not converge in {max_iter} iterations")


def eigenvector_centrality(g, tol: float = 1e-10, max_iter: int = 100_000,
                           comps: list[np.ndarray] | None = None) -> np.ndarray:
    """Leading adjacency eigenvector, unit norm, non-negative; NaN everywhere for an edgeless graph."""
    a = _adj(g).astype(float)
    n = a.shape[0]
    if not a.any():
        return np.full(n, np.nan)
    best = None
    for comp in comps if comps is not None else components(g):
        if comp.size < 2:
            continue
        vec, lam = _power_iteration(a[np.ix_(comp, comp)], tol, max_iter)
        if best is None or lam > best[1] + 1e-9:
            best = (comp, lam, vec)
    out = np.zeros(n)
    out[best[0]] = np.abs(best[2])
    return out / np.linalg.norm(out)


def assortativity(g) -> float | None:
    """Newman's degree assortativity; integer arithmetic so degeneracy is detected exactly."""
    a = _adj(g)
    k = a.sum(axis=1).astype(np.int64)
    i, j = np.nonzero(np.triu(a, 1))
    m = i.size
    if m < 2:
        return None
    ki, kj = k[i], k[j]
    s_prod = int((ki * kj).sum())
    s_sum = int((ki + kj).sum())
    s_sq = int((ki * ki + kj * kj).sum())
    num = 4 * m * s_prod - s_sum * s_sum
    den = 2 * m * s_sq - s_sum * s_sum
    if den == 0:
        return None
    return num / den


def _nanmean(x: np.ndarray) -> float | None:
    x = np.asarray(x, dtype=float)
    ok = ~np.isnan(x)
    return float(x[ok].mean()) if ok.any() else None


@dataclass
class MetricsReport:
    node: dict[str, np.ndarray]
    globals: dict[str, float | None]
    tickers: tuple[str, ...] = ()
    conventions: dict = field(default_factory=lambda: dict(CONVENTIONS))

    def to_dict(self) -> dict:
        def clean(v):
            return [None if np.isnan(x) else float(x) for x in v]
        return {"tickers": list(self.tickers),
                "node": {k: clean(v) for k, v in self.node.items()},
                "global": self.globals,
                "conventions": self.conventions}

    def to_json(self, path: str | Path | None = None, **extra) -> str:
        text = json.dumps({**self.to_dict(), **extra}, sort_keys=True)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text


def graph_metrics(g: UnweightedGraph, names: Iterable[str] = GLOBAL_METRICS) -> MetricsReport:
    """Compute the requested characteristics (per-node where they exist, plus globals)."""
    names = tuple(names)
    unknown = set(names) - set(GLOBAL_METRICS)
    if unknown:
        raise ValidationError(f"unknown metrics: {sorted(unknown)}; choose from {GLOBAL_METRICS}")
    a = _adj(g)
    node: dict[str, np.ndarray] = {}
    glob: dict[str, float | None] = {}
    need_dist = set(names) & {"char_path_length", "betweenness", "closeness", "eccentricity", "eigenvector"}
    dist = sigma = None
    if need_dist:
        dist, sigma = shortest_paths(a)
    if "degree" in names:
        k = a.sum(axis=1).astype(float)
        node["degree"] = k
        glob["degree"] = float(k.mean())
    if "clustering" in names:
        node["clustering"], glob["clustering"] = clustering(a)
    if "char_path_length" in names:
        node["node_shortest_path"] = node_shortest_path(a, dist)
        glob["char_path_length"] = char_path_length(a, dist)
    if "betweenness" in names:
        node["betweenness"] = betweenness(a, dist, sigma)
        glob["betweenness"] = float(node["betweenness"].mean())
    if "closeness" in names:
        node["closeness"] = closeness(a, dist)
        glob["closeness"] = float(node["closeness"].mean())
    if "eccentricity" in names:
        node["eccentricity"] = eccentricity(a, dist)
        glob["eccentricity"] = _nanmean(node["eccentricity"])
    if "eigenvector" in names:
        comps = []
        seen = np.zeros(a.shape[0], dtype=bool)
        for v in range(a.shape[0]):
            if not seen[v]:
                c = np.flatnonzero(dist[v] >= 0)
                seen[c] = True
                comps.append(c)
        node["eigenvector"] = eigenvector_centrality(a, comps=comps)
        glob["eigenvector"] = _nanmean(node["eigenvector"])
    if "assortativity" in names:
        glob["assortativity"] = assortativity(a)
    tickers = tuple(getattr(g, "tickers", ()))
    return MetricsReport(node, {k: glob[k] for k in names}, tickers)


def global_metrics(g, names: Iterable[str] = TEST_METRICS) -> dict[str, float | None]:
    return graph_metrics(g, names).globals
