"""Independent reference implementations used only by the tests."""

from __future__ import annotations

import csv
import itertools
from functools import lru_cache
from pathlib import Path

import networkx as nx
import numpy as np

DATA = Path(__file__).parent / "data"


def _substitute(graph: nx.Graph, replace) -> nx.Graph:
    counter = itertools.count(graph.number_of_nodes())
    out = nx.Graph()
    out.add_nodes_from(graph.nodes)
    for u, v in graph.edges:
        replace(out, u, v, lambda: next(counter))
    return out


def _hk_edge(g, u, v, fresh):
    for _ in range(2):
        m = fresh()
        g.add_edge(u, m)
        g.add_edge(m, v)


def _lp_edge(g, u, v, fresh):
    a, b = fresh(), fresh()
    g.add_edge(u, a)
    g.add_edge(b, v)
    for _ in range(2):
        m = fresh()
        g.add_edge(a, m)
        g.add_edge(m, b)


def recursive_diamond(family: str, level: int) -> nx.Graph:
    """Edge-substitution definition; node 0 is the left end, node 1 the right end."""
    g = nx.Graph([(0, 1)])
    rule = {"hk": _hk_edge, "lp": _lp_edge}[family]
    for _ in range(level):
        g = _substitute(g, rule)
    return g


def bfs_layers(g: nx.Graph, sources) -> dict:
    dist = nx.multi_source_dijkstra_path_length(g, set(sources))
    return dist


def naive_lift(vertices, edges, layer_of, B, J) -> np.ndarray:
    """Entry-by-entry lift written directly from the degree formulas."""
    idx = {v: i for i, v in enumerate(vertices)}
    nbrs = {v: set() for v in vertices}
    for a, b in edges:
        nbrs[a].add(b)
        nbrs[b].add(a)
    H = np.zeros((len(vertices), len(vertices)))
    for x in vertices:
        n = layer_of[x]
        up = [y for y in nbrs[x] if layer_of[y] == n + 1]
        down = [y for y in nbrs[x] if layer_of[y] == n - 1]
        same = [y for y in nbrs[x] if layer_of[y] == n]
        H[idx[x], idx[x]] = B[n] / (len(same) + 1)
        for y in up:
            H[idx[x], idx[y]] = J[n] / len(up)
        for y in down:
            H[idx[x], idx[y]] = J[n - 1] / len(down)
        for y in same:
            H[idx[x], idx[y]] = B[n] / (len(same) + 1)
    return H


def krawtchouk_couplings(N: int) -> list[float]:
    return [np.sqrt(n * (N + 1 - n)) / 2 for n in range(1, N + 1)]


def load_rows(name: str) -> list[dict]:
    with open(DATA / f"{name}.csv", newline="") as fh:
        return list(csv.DictReader(fh))


@lru_cache(maxsize=None)
def built(family: str, level: int):
    """Cached (sequence, Hamiltonian) for the Krawtchouk lift."""
    from fractal_pqst import krawtchouk_chain, lift_hamiltonian, sequence_for

    seq = sequence_for(family, level)
    return seq, lift_hamiltonian(seq.final, krawtchouk_chain(seq.N))


@lru_cache(maxsize=None)
def inductive(family: str, level: int, vectors: bool = True):
    from fractal_pqst import spectrum_inductive

    seq, H = built(family, level)
    return spectrum_inductive(seq, H, eigenvectors=vectors)


@lru_cache(maxsize=None)
def dense(family: str, level: int):
    from fractal_pqst import spectrum_dense

    return spectrum_dense(built(family, level)[1])
