"""Word-addressed finite graphs with a transversal (geodesic) layering.

A vertex is addressed by a radial coordinate ``n`` and a branch word
``w_1 ... w_k``; the canonical string form is ``"n"`` or ``"n.w1.w2"``.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np


class GraphError(ValueError):
    """Raised for malformed graphs (disconnected, self-loops, parallel edges, ...)."""


_ADDRESS_RE = re.compile(r"^(\d+)((?:\.w\d+)*)$")


@dataclass(frozen=True, order=True)
class VertexAddress:
    radial: int
    word: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.radial < 0:
            raise GraphError(f"negative radial coordinate {self.radial}")
        if any(letter < 1 for letter in self.word):
            raise GraphError(f"letters are 1-based, got word {self.word}")

    def __str__(self) -> str:
        return ".".join([str(self.radial), *(f"w{letter}" for letter in self.word)])

    def __repr__(self) -> str:
        return f"VertexAddress({self})"

    @classmethod
    def parse(cls, text: str | int | VertexAddress) -> VertexAddress:
        if isinstance(text, VertexAddress):
            return text
        if isinstance(text, int):
            return cls(text)
        m = _ADDRESS_RE.match(text.strip())
        if m is None:
            raise GraphError(f"cannot parse vertex address {text!r}")
        word = tuple(int(tok[1:]) for tok in m.group(2).split(".")[1:])
        return cls(int(m.group(1)), word)

    def extend(self, letter: int) -> VertexAddress:
        return VertexAddress(self.radial, self.word + (letter,))


Edge = tuple[VertexAddress, VertexAddress]


def _normalize_edge(a: VertexAddress, b: VertexAddress) -> Edge:
    return (a, b) if a <= b else (b, a)


def geodesic_layers(
    vertices: Iterable[VertexAddress],
    edges: Iterable[Edge],
    reference_set: Iterable[VertexAddress],
) -> dict[int, frozenset[VertexAddress]]:
    """Split the vertex set by graph distance to ``reference_set``.

    Returns ``{n: {x : d(x; A) = n}}``. Raises :class:`GraphError` for an empty
    reference set or a disconnected graph.
    """
    vertices = list(vertices)
    adjacency: dict[VertexAddress, list[VertexAddress]] = {v: [] for v in vertices}
    for a, b in edges:
        adjacency[a].append(b)
        adjacency[b].append(a)
    sources = list(dict.fromkeys(reference_set))
    if not sources:
        raise GraphError("reference set A must be non-empty")
    for s in sources:
        if s not in adjacency:
            raise GraphError(f"reference vertex {s} is not in the graph")

    dist = {s: 0 for s in sources}
    queue = deque(sources)
    while queue:
        x = queue.popleft()
        for y in adjacency[x]:
            if y not in dist:
                dist[y] = dist[x] + 1
                queue.append(y)
    if len(dist) != len(adjacency):
        missing = sorted(set(adjacency) - set(dist))
        raise GraphError(f"graph is disconnected; unreachable from A: {', '.join(map(str, missing[:5]))}")

    layers: dict[int, set[VertexAddress]] = {}
    for v, n in dist.items():
        layers.setdefault(n, set()).add(v)
    return {n: frozenset(layers[n]) for n in sorted(layers)}


@dataclass(frozen=True, eq=False)
class LayeredGraph:
    """Immutable simple graph together with its layering with respect to ``A``.

    Construct with :meth:`build`; it validates the edge list and computes the
    layers by breadth-first search.
    """

    vertices: tuple[VertexAddress, ...]
    edges: tuple[Edge, ...]
    reference_set: frozenset[VertexAddress]
    layers: tuple[tuple[VertexAddress, ...], ...]
    family: str = "custom"
    level: int | None = None

    @classmethod
    def build(
        cls,
        vertices: Iterable[VertexAddress | str],
        edges: Iterable[tuple[VertexAddress | str, VertexAddress | str]],
        reference_set: Iterable[VertexAddress | str],
        *,
        family: str = "custom",
        level: int | None = None,
    ) -> LayeredGraph:
        verts = sorted({VertexAddress.parse(v) for v in vertices})
        vset = set(verts)
        seen: set[Edge] = set()
        for a, b in edges:
            a, b = VertexAddress.parse(a), VertexAddress.parse(b)
            if a == b:
                raise GraphError(f"self-loop at {a}")
            if a not in vset or b not in vset:
                raise GraphError(f"edge ({a}, {b}) references an unknown vertex")
            e = _normalize_edge(a, b)
            if e in seen:
                raise GraphError(f"parallel edge ({a}, {b})")
            seen.add(e)
        ref = frozenset(VertexAddress.parse(v) for v in reference_set)
        layer_map = geodesic_layers(verts, seen, ref)
        layers = tuple(tuple(sorted(layer_map[n])) for n in range(len(layer_map)))
        return cls(
            vertices=tuple(verts),
            edges=tuple(sorted(seen)),
            reference_set=ref,
            layers=layers,
            family=family,
            level=level,
        )

    @property
    def N(self) -> int:
        """Index of the last layer, i.e. the length of the auxiliary chain."""
        return len(self.layers) - 1

    def __len__(self) -> int:
        return len(self.vertices)

    @cached_property
    def index(self) -> dict[VertexAddress, int]:
        return {v: i for i, v in enumerate(self.vertices)}

    @cached_property
    def layer_of(self) -> dict[VertexAddress, int]:
        return {v: n for n, layer in enumerate(self.layers) for v in layer}

    @cached_property
    def layer_index(self) -> np.ndarray:
        """Layer number of every vertex, in canonical vertex order."""
        lo = self.layer_of
        return np.array([lo[v] for v in self.vertices], dtype=np.int64)

    @cached_property
    def adjacency(self) -> dict[VertexAddress, tuple[VertexAddress, ...]]:
        adj: dict[VertexAddress, list[VertexAddress]] = {v: [] for v in self.vertices}
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        return {v: tuple(sorted(n)) for v, n in adj.items()}

    @cached_property
    def edge_index(self) -> tuple[np.ndarray, np.ndarray]:
        idx = self.index
        a = np.array([idx[e[0]] for e in self.edges], dtype=np.int64)
        b = np.array([idx[e[1]] for e in self.edges], dtype=np.int64)
        return a, b

    @cached_property
    def layer_sizes(self) -> np.ndarray:
        return np.array([len(layer) for layer in self.layers], dtype=np.int64)

    @cached_property
    def mu(self) -> np.ndarray:
        """Weights ``1/|layer(x)|`` in canonical vertex order."""
        return 1.0 / self.layer_sizes[self.layer_index]

    @cached_property
    def vertex_degrees(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per-vertex ``(deg_plus, deg_minus, deg_zero)`` arrays."""
        n = len(self.vertices)
        plus = np.zeros(n, dtype=np.int64)
        minus = np.zeros(n, dtype=np.int64)
        zero = np.zeros(n, dtype=np.int64)
        a, b = self.edge_index
        la, lb = self.layer_index[a], self.layer_index[b]
        for i, j, li, lj in zip(a, b, la, lb):
            if li == lj:
                zero[i] += 1
                zero[j] += 1
            elif lj == li + 1:
                plus[i] += 1
                minus[j] += 1
            else:
                plus[j] += 1
                minus[i] += 1
        return plus, minus, zero

    def is_connected_subset(self, subset: Iterable[VertexAddress]) -> bool:
        subset = set(subset)
        if not subset:
            return True
        start = next(iter(subset))
        seen = {start}
        stack = [start]
        while stack:
            x = stack.pop()
            for y in self.adjacency[x]:
                if y in subset and y not in seen:
                    seen.add(y)
                    stack.append(y)
        return seen == subset

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "level": self.level,
            "N": self.N,
            "vertices": [str(v) for v in self.vertices],
            "edges": [[str(a), str(b)] for a, b in self.edges],
            "reference_set": [str(v) for v in sorted(self.reference_set)],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> LayeredGraph:
        g = cls.build(
            data["vertices"],
            [tuple(e) for e in data["edges"]],
            data["reference_set"],
            family=data.get("family", "custom"),
            level=data.get("level"),
        )
        if "N" in data and data["N"] != g.N:
            raise GraphError(f"stored N={data['N']} disagrees with layering N={g.N}")
        return g


@dataclass(frozen=True)
class DegreeProfile:
    """Layer-constant degrees; index ``n`` refers to layer ``n``.

    ``deg_minus[0]`` and ``deg_plus[N]`` are 0 by convention.
    """

    deg_plus: tuple[int, ...]
    deg_minus: tuple[int, ...]
    deg_zero: tuple[int, ...]
    layer_sizes: tuple[int, ...]
    ok: bool = field(default=True, init=False)

    def matching_identity_holds(self) -> bool:
        return all(
            self.layer_sizes[n] * self.deg_plus[n] == self.layer_sizes[n + 1] * self.deg_minus[n + 1]
            for n in range(len(self.layer_sizes) - 1)
        )


@dataclass(frozen=True)
class AssumptionViolation:
    """First layer on which a degree map is not constant.

    ``degrees`` maps each vertex of that layer to ``(deg_plus, deg_minus, deg_zero)``.
    """

    layer: int
    kinds: tuple[str, ...]
    degrees: dict[VertexAddress, tuple[int, int, int]]
    ok: bool = field(default=False, init=False)

    def describe(self) -> str:
        parts = []
        for kind in self.kinds:
            slot = {"deg_plus": 0, "deg_minus": 1, "deg_zero": 2}[kind]
            values = ", ".join(f"{kind}({v})={d[slot]}" for v, d in self.degrees.items())
            parts.append(values)
        return f"layer {self.layer}: " + "; ".join(parts)

    def to_dict(self) -> dict:
        return {
            "layer": self.layer,
            "kinds": list(self.kinds),
            "degrees": {str(v): list(d) for v, d in self.degrees.items()},
        }


def degree_profile(graph: LayeredGraph) -> DegreeProfile | AssumptionViolation:
    """Return the per-layer degrees, or the first layer where they are not constant.

    A violation is a legitimate outcome, so nothing is raised.
    """
    plus, minus, zero = graph.vertex_degrees
    idx = graph.index
    dp, dm, dz = [], [], []
    for n, layer in enumerate(graph.layers):
        rows = [idx[v] for v in layer]
        kinds = tuple(
            name
            for name, arr in (("deg_plus", plus), ("deg_minus", minus), ("deg_zero", zero))
            if len(set(arr[rows].tolist())) > 1
        )
        if kinds:
            degrees = {v: (int(plus[i]), int(minus[i]), int(zero[i])) for v, i in zip(layer, rows)}
            return AssumptionViolation(layer=n, kinds=kinds, degrees=degrees)
        dp.append(int(plus[rows[0]]))
        dm.append(int(minus[rows[0]]))
        dz.append(int(zero[rows[0]]))
    return DegreeProfile(tuple(dp), tuple(dm), tuple(dz), tuple(int(s) for s in graph.layer_sizes))


def layer_weights(graph: LayeredGraph) -> dict[VertexAddress, float]:
    """``mu_A(x) = 1/|layer of x|`` as a vertex map."""
    return {v: float(m) for v, m in zip(graph.vertices, graph.mu)}


def path_graph(N: int) -> LayeredGraph:
    """The chain ``0 - 1 - ... - N`` layered from vertex 0."""
    if N < 1:
        raise GraphError("a chain needs N >= 1")
    verts = [VertexAddress(n) for n in range(N + 1)]
    edges = [(verts[n], verts[n + 1]) for n in range(N)]
    return LayeredGraph.build(verts, edges, [verts[0]], family="chain", level=0)
