"""Planarity testing.

``lr_planar`` is a boolean-only left-right planarity test on integer-labelled
edge lists, written for the PMFG inner loop where it runs once per candidate
edge. ``is_planar`` wraps networkx's left-right implementation to also return
a combinatorial embedding or a Kuratowski subgraph.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass
from typing import Sequence

import networkx as nx
import numpy as np


def lr_planar(n: int, edges: Sequence[tuple[int, int]]) -> bool:
    """True iff the simple graph on nodes 0..n-1 with ``edges`` is planar."""
    m = len(edges)
    if m < 9:
        return True
    if n > 2 and m > 3 * n - 6:
        return False
    adj: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    if n + 50 > sys.getrecursionlimit():
        sys.setrecursionlimit(n + 1000)

    height = [-1] * n
    parent_edge: list = [None] * n
    lowpt: dict = {}
    lowpt2: dict = {}
    nesting: dict = {}
    out: list[list[int]] = [[] for _ in range(n)]
    seen: set = set()

    def orient(v):
        e = parent_edge[v]
        hv = height[v]
        for w in adj[v]:
            key = (v, w) if v < w else (w, v)
            if key in seen:
                continue
            seen.add(key)
            vw = (v, w)
            out[v].append(w)
            lowpt[vw] = hv
            lowpt2[vw] = hv
            if height[w] < 0:
                parent_edge[w] = vw
                height[w] = hv + 1
                orient(w)
            else:
                lowpt[vw] = height[w]
            nesting[vw] = 2 * lowpt[vw] + (1 if lowpt2[vw] < hv else 0)
            if e is not None:
                le, lv = lowpt[e], lowpt[vw]
                if lv < le:
                    lowpt2[e] = min(le, lowpt2[vw])
                    lowpt[e] = lv
                elif lv > le:
                    lowpt2[e] = min(lowpt2[e], lv)
                else:
                    lowpt2[e] = min(lowpt2[e], lowpt2[vw])

    roots = []
    for v in range(n):
        if height[v] < 0:
            height[v] = 0
            roots.append(v)
            orient(v)

    ordered = [sorted(out[v], key=lambda w, v=v: nesting[(v, w)]) for v in range(n)]

    # conflict pair = [left_low, left_high, right_low, right_high]
    S: list[list] = []
    stack_bottom: dict = {}
    lowpt_edge: dict = {}
    ref: dict = {}

    def conflicting(low, high, b):
        return not (low is None and high is None) and lowpt[high] > lowpt[b]

    def lowest(P):
        if P[0] is None and P[1] is None:
            return lowpt[P[2]]
        if P[2] is None and P[3] is None:
            return lowpt[P[0]]
        return min(lowpt[P[0]], lowpt[P[2]])

    def add_constraints(ei, e):
        P = [None, None, None, None]
        while True:
            Q = S.pop()
            if not (Q[0] is None and Q[1] is None):
                Q[0], Q[1], Q[2], Q[3] = Q[2], Q[3], Q[0], Q[1]
            if not (Q[0] is None and Q[1] is None):
                return False
            if lowpt[Q[2]] > lowpt[e]:
                if P[2] is None and P[3] is None:
                    P[3] = Q[3]
                else:
                    ref[P[2]] = Q[3]
                P[2] = Q[2]
            else:
                ref[Q[2]] = lowpt_edge[e]
            if (S[-1] if S else None) is stack_bottom[ei]:
                break
        while S and (conflicting(S[-1][0], S[-1][1], ei) or conflicting(S[-1][2], S[-1][3], ei)):
            Q = S.pop()
            if conflicting(Q[2], Q[3], ei):
                Q[0], Q[1], Q[2], Q[3] = Q[2], Q[3], Q[0], Q[1]
            if conflicting(Q[2], Q[3], ei):
                return False
            ref[P[2]] = Q[3]
            if Q[2] is not None:
                P[2] = Q[2]
            if P[0] is None and P[1] is None:
                P[1] = Q[1]
            else:
                ref[P[0]] = Q[1]
            P[0] = Q[0]
        if not (P[0] is None and P[1] is None and P[2] is None and P[3] is None):
            S.append(P)
        return True

    def remove_back_edges(e):
        u = e[0]
        hu = height[u]
        while S and lowest(S[-1]) == hu:
            S.pop()
        if S:
            P = S.pop()
            while P[1] is not None and P[1][1] == u:
                P[1] = ref.get(P[1])
            if P[1] is None and P[0] is not None:
                ref[P[0]] = P[2]
                P[0] = None
            while P[3] is not None and P[3][1] == u:
                P[3] = ref.get(P[3])
            if P[3] is None and P[2] is not None:
                ref[P[2]] = P[0]
                P[2] = None
            S.append(P)
        if lowpt[e] < hu:
            hl, hr = S[-1][1], S[-1][3]
            if hl is not None and (hr is None or lowpt[hl] > lowpt[hr]):
                ref[e] = hl
            else:
                ref[e] = hr

    def test(v):
        e = parent_edge[v]
        hv = height[v]
        first = ordered[v][0] if ordered[v] else None
        for w in ordered[v]:
            ei = (v, w)
            stack_bottom[ei] = S[-1] if S else None
            if ei == parent_edge[w]:
                if not test(w):
                    return False
            else:
                lowpt_edge[ei] = ei
                S.append([None, None, ei, ei])
            if lowpt[ei] < hv:
                if w == first:
                    lowpt_edge[e] = lowpt_edge[ei]
                elif not add_constraints(ei, e):
                    return False
        if e is not None:
            remove_back_edges(e)
        return True

    return all(test(r) for r in roots)


@dataclass(frozen=True)
class PlanarityResult:
    planar: bool
    embedding: dict | None = None        # node -> neighbours in clockwise order
    kuratowski_edges: tuple | None = None
    kuratowski_type: str | None = None   # "K5" or "K3,3"

    def __bool__(self) -> bool:
        return self.planar


def _kuratowski_type(sub: nx.Graph) -> str:
    branch = sorted(d for _, d in sub.degree() if d > 2)
    if branch == [4] * 5:
        return "K5"
    if branch == [3] * 6:
        return "K3,3"
    return "unknown"


def is_planar(graph) -> PlanarityResult:
    """Planarity with an auditable witness.

    Accepts an ``UnweightedGraph``, a boolean adjacency matrix or a networkx graph.
    """
    if isinstance(graph, nx.Graph):
        G = graph
    else:
        adj = np.asarray(getattr(graph, "adjacency", graph), dtype=bool)
        G = nx.Graph()
        G.add_nodes_from(range(adj.shape[0]))
        G.add_edges_from(zip(*np.nonzero(np.triu(adj, 1))))
    planar, cert = nx.check_planarity(G, counterexample=True)
    if planar:
        return PlanarityResult(True, embedding={v: list(cert.neighbors_cw_order(v)) for v in cert})
    edges = tuple(sorted(tuple(sorted(e)) for e in cert.edges()))
    return PlanarityResult(False, kuratowski_edges=edges, kuratowski_type=_kuratowski_type(cert))


def euler_faces_ok(embedding: dict) -> bool:
    """Euler check for a rotation system: face walks counted per component give V - E + F = 2C."""
    G = nx.Graph()
    for v, nbrs in embedding.items():
        G.add_node(v)
        G.add_edges_from((v, w) for w in nbrs)
    pos = {v: {w: i for i, w in enumerate(nbrs)} for v, nbrs in embedding.items()}
    seen = set()
    faces = 0
    for v, nbrs in embedding.items():
        for w in nbrs:
            if (v, w) in seen:
                continue
            faces += 1
            a, b = v, w
            while (a, b) not in seen:
                seen.add((a, b))
                # next half-edge: at b, take the neighbour clockwise after a
                nb = embedding[b]
                c = nb[(pos[b][a] + 1) % len(nb)]
                a, b = b, c
    comps = nx.number_connected_components(G)
    # an isolated vertex has no face walk but bounds one face
    faces += sum(1 for v in G if G.degree(v) == 0)
    return G.number_of_nodes() - G.number_of_edges() + faces == 2 * comps
