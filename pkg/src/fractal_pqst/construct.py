"""Projective-limit gluing: G_0 = chain, G_i from G_{i-1} by duplicating chains.

At step ``i`` a set of retained vertices/edges ``B_i`` is kept once and every
remaining 1D chain of ``G_{i-1} - B_i`` is copied ``k_i`` times, the copies
glued to ``B_i`` at their ends. A copied vertex ``x`` becomes ``x.w1 ... x.wk``;
retained vertices keep their address.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Mapping

import numpy as np

from .graph import Edge, GraphError, LayeredGraph, VertexAddress, _normalize_edge, path_graph


class ConstructionError(ValueError):
    pass


@dataclass(frozen=True)
class Step:
    alphabet_size: int
    retain_vertices: frozenset[VertexAddress]
    retain_edges: frozenset[Edge] = frozenset()

    def __post_init__(self) -> None:
        if self.alphabet_size < 2:
            raise ConstructionError(f"an alphabet needs at least 2 letters, got {self.alphabet_size}")
        edges = frozenset(_normalize_edge(*e) for e in self.retain_edges)
        object.__setattr__(self, "retain_edges", edges)
        for a, b in edges:
            if a not in self.retain_vertices or b not in self.retain_vertices:
                raise ConstructionError(f"retained edge ({a}, {b}) has an endpoint outside the retained vertices")

    def to_dict(self) -> dict:
        return {
            "alphabet_size": self.alphabet_size,
            "retain_vertices": [str(v) for v in sorted(self.retain_vertices)],
            "retain_edges": [[str(a), str(b)] for a, b in sorted(self.retain_edges)],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> Step:
        return cls(
            int(data["alphabet_size"]),
            frozenset(VertexAddress.parse(v) for v in data["retain_vertices"]),
            frozenset(
                (VertexAddress.parse(a), VertexAddress.parse(b)) for a, b in data.get("retain_edges", [])
            ),
        )


@dataclass(frozen=True)
class ConstructionPlan:
    N: int
    steps: tuple[Step, ...] = ()

    def to_dict(self) -> dict:
        return {"N": self.N, "steps": [s.to_dict() for s in self.steps]}

    @classmethod
    def from_dict(cls, data: Mapping) -> ConstructionPlan:
        return cls(int(data["N"]), tuple(Step.from_dict(s) for s in data.get("steps", [])))


@dataclass(frozen=True)
class Chain:
    """A path component of ``G_{i-1} - B_i``.

    ``vertices`` are the copied vertices in path order; ``left``/``right`` are
    the retained vertices the two ends attach to (``None`` for an open end).
    ``layers`` lists layer indices of left, vertices..., right (``-1`` for an
    open end).
    """

    vertices: tuple[VertexAddress, ...]
    left: VertexAddress | None
    right: VertexAddress | None
    layers: tuple[int, ...]

    @property
    def span(self) -> tuple[int, int]:
        inner = [n for n in self.layers if n >= 0]
        return min(inner), max(inner)

    @property
    def is_monotone(self) -> bool:
        """Layers step by +1 along the chain, so its matrix is a segment of J."""
        return all(b - a == 1 for a, b in zip(self.layers, self.layers[1:]) if a >= 0 and b >= 0)

    def key(self, N: int, mirror: bool = False) -> tuple[int, ...]:
        fwd = self.layers
        if not mirror:
            return fwd
        rev = tuple(N - n if n >= 0 else -1 for n in reversed(fwd))
        return min(fwd, rev)


@dataclass(frozen=True, eq=False)
class LevelMaps:
    """``phi`` projects ``G_i`` onto ``G_{i-1}``; ``pi`` is its section per letter."""

    phi: dict[VertexAddress, VertexAddress]
    retained: frozenset[VertexAddress]
    alphabet_size: int

    def pi(self, x: VertexAddress, letter: int) -> VertexAddress:
        if not 1 <= letter <= self.alphabet_size:
            raise ConstructionError(f"letter w{letter} outside alphabet of size {self.alphabet_size}")
        return x if x in self.retained else x.extend(letter)


def chains_of(
    graph: LayeredGraph,
    retain_vertices: Iterable[VertexAddress],
    retain_edges: Iterable[Edge] = (),
) -> list[Chain]:
    """Decompose ``graph - B`` into chains; raise if a component is not a chain."""
    retained = frozenset(retain_vertices)
    retained_edges = frozenset(_normalize_edge(*e) for e in retain_edges)
    unknown = retained - set(graph.vertices)
    if unknown:
        raise ConstructionError(f"retained vertices not in graph: {', '.join(map(str, sorted(unknown)))}")
    edge_set = set(graph.edges)
    for e in retained_edges:
        if e not in edge_set:
            raise ConstructionError(f"retained edge ({e[0]}, {e[1]}) not in graph")
    for a, b in graph.edges:
        if a in retained and b in retained and (a, b) not in retained_edges:
            raise ConstructionError(
                f"edge ({a}, {b}) joins two retained vertices but is not retained; copying it would create parallel edges"
            )

    free = [v for v in graph.vertices if v not in retained]
    free_set = set(free)
    layer_of = graph.layer_of
    seen: set[VertexAddress] = set()
    chains: list[Chain] = []
    for start in free:
        if start in seen:
            continue
        comp = {start}
        stack = [start]
        while stack:
            x = stack.pop()
            for y in graph.adjacency[x]:
                if y in free_set and y not in comp:
                    comp.add(y)
                    stack.append(y)
        seen |= comp
        chains.append(_as_chain(graph, comp, retained, layer_of))
    chains.sort(key=lambda c: (c.vertices[0].radial, c.vertices[0].word, c.vertices))
    return chains


def _as_chain(graph, comp, retained, layer_of) -> Chain:
    inner = {v: [y for y in graph.adjacency[v] if y in comp] for v in comp}
    outer = {v: [y for y in graph.adjacency[v] if y in retained] for v in comp}
    label = ", ".join(str(v) for v in sorted(comp)[:6]) + (" ..." if len(comp) > 6 else "")
    n_edges = sum(len(n) for n in inner.values()) // 2
    if n_edges != len(comp) - 1 or any(len(n) > 2 for n in inner.values()):
        raise ConstructionError(f"component {{{label}}} of G - B is not a 1D chain")
    ends = sorted(v for v, n in inner.items() if len(n) <= 1)
    for v in comp:
        if len(inner[v]) + len(outer[v]) > 2 or (len(comp) > 1 and v not in ends and outer[v]):
            raise ConstructionError(f"component {{{label}}} of G - B is not a 1D chain (branching at {v})")

    if len(comp) == 1:
        (v,) = comp
        attach = sorted(outer[v], key=lambda y: (layer_of[y], y))
        path = [v]
        left = attach[0] if attach else None
        right = attach[1] if len(attach) > 1 else None
    else:
        a, b = ends
        start = min((a, b), key=lambda y: (layer_of[y], y))
        path = [start]
        prev = None
        while len(path) < len(comp):
            nxt = [y for y in inner[path[-1]] if y != prev][0]
            prev = path[-1]
            path.append(nxt)
        left = outer[path[0]][0] if outer[path[0]] else None
        right = outer[path[-1]][0] if outer[path[-1]] else None
    layers = tuple(
        [layer_of[left] if left is not None else -1]
        + [layer_of[v] for v in path]
        + [layer_of[right] if right is not None else -1]
    )
    return Chain(tuple(path), left, right, layers)


def distinct_chains(chains: Iterable[Chain], N: int, mode: str = "span") -> list[tuple[Chain, int]]:
    """Group chains with identical layer profiles.

    ``mode="span"`` keeps a chain and its mirror image apart; ``mode="mirror"``
    identifies a profile with its reflection ``n -> N - n``. Returns
    ``(representative, count)`` in first-seen order.
    """
    if mode not in ("span", "mirror"):
        raise ValueError(f"unknown dedupe mode {mode!r}")
    groups: dict[tuple[int, ...], list[Chain]] = {}
    for c in chains:
        groups.setdefault(c.key(N, mirror=mode == "mirror"), []).append(c)
    return [(g[0], len(g)) for g in groups.values()]


@dataclass(frozen=True, eq=False)
class GraphSequence:
    plan: ConstructionPlan
    graphs: tuple[LayeredGraph, ...]
    maps: tuple[LevelMaps, ...]
    chains: tuple[tuple[Chain, ...], ...]
    _ancestor_cache: dict = field(default_factory=dict, repr=False)

    @property
    def final(self) -> LayeredGraph:
        return self.graphs[-1]

    @property
    def N(self) -> int:
        return self.plan.N

    @property
    def depth(self) -> int:
        return len(self.maps)

    def ancestor_index(self, level: int) -> np.ndarray:
        """For every vertex of the final graph, the index of its ancestor in ``G_level``."""
        if level in self._ancestor_cache:
            return self._ancestor_cache[level]
        current = list(self.final.vertices)
        for i in range(self.depth, level, -1):
            phi = self.maps[i - 1].phi
            current = [phi[v] for v in current]
        idx = self.graphs[level].index
        out = np.array([idx[v] for v in current], dtype=np.int64)
        self._ancestor_cache[level] = out
        return out

    def radial_projection(self, vertex: VertexAddress) -> int:
        """``phi_1 o ... o phi_m`` applied to a final-graph vertex."""
        for i in range(self.depth, 0, -1):
            vertex = self.maps[i - 1].phi[vertex]
        return vertex.radial


def _apply_step(prev: LayeredGraph, step: Step, *, family: str, level: int | None) -> tuple[LayeredGraph, LevelMaps, list[Chain]]:
    chains = chains_of(prev, step.retain_vertices, step.retain_edges)
    k = step.alphabet_size
    retained = step.retain_vertices
    maps = LevelMaps({}, retained, k)
    phi: dict[VertexAddress, VertexAddress] = {}
    for x in prev.vertices:
        if x in retained:
            phi[x] = x
        else:
            for w in range(1, k + 1):
                phi[x.extend(w)] = x
    edges = list(step.retain_edges)
    for a, b in prev.edges:
        if (a, b) in step.retain_edges:
            continue
        for w in range(1, k + 1):
            edges.append((maps.pi(a, w), maps.pi(b, w)))
    reference = [y for y, x in phi.items() if x in prev.reference_set]
    try:
        graph = LayeredGraph.build(phi.keys(), edges, reference, family=family, level=level)
    except GraphError as exc:
        raise ConstructionError(f"step produced an invalid graph: {exc}") from exc
    bad = [v for v in graph.vertices if graph.layer_of[v] != v.radial]
    if bad:
        raise ConstructionError(
            f"layering disagrees with radial coordinates at {', '.join(map(str, bad[:5]))}"
        )
    return graph, LevelMaps(phi, retained, k), chains


def build_sequence(plan: ConstructionPlan, *, family: str = "plan", level: int | None = None) -> GraphSequence:
    """Build ``G_0, ..., G_m`` from an explicit plan."""
    graphs = [_chain_graph(plan.N, family)]
    maps, chains = [], []
    for i, step in enumerate(plan.steps, start=1):
        last = i == len(plan.steps)
        g, m, c = _apply_step(graphs[-1], step, family=family, level=level if last else None)
        graphs.append(g)
        maps.append(m)
        chains.append(tuple(c))
    if not plan.steps:
        graphs[0] = _chain_graph(plan.N, family, level)
    return GraphSequence(plan, tuple(graphs), tuple(maps), tuple(chains))


def _chain_graph(N: int, family: str, level: int | None = None) -> LayeredGraph:
    g = path_graph(N)
    return LayeredGraph(g.vertices, g.edges, g.reference_set, g.layers, family=family, level=level)


def _rule_sequence(
    N: int,
    steps: Iterable[tuple[int, Callable[[int], bool]]],
    *,
    family: str,
    level: int,
) -> GraphSequence:
    """Grow a sequence where ``B_i`` is every vertex whose radial passes a predicate.

    Retained edges are all edges between retained vertices.
    """
    graphs = [_chain_graph(N, family)]
    maps, chains, explicit = [], [], []
    steps = list(steps)
    for i, (k, keep) in enumerate(steps, start=1):
        prev = graphs[-1]
        retained = frozenset(v for v in prev.vertices if keep(v.radial))
        redges = frozenset(e for e in prev.edges if e[0] in retained and e[1] in retained)
        step = Step(k, retained, redges)
        g, m, c = _apply_step(prev, step, family=family, level=level if i == len(steps) else None)
        graphs.append(g)
        maps.append(m)
        chains.append(tuple(c))
        explicit.append(step)
    if not steps:
        graphs[0] = _chain_graph(N, family, level)
    return GraphSequence(ConstructionPlan(N, tuple(explicit)), tuple(graphs), tuple(maps), tuple(chains))


def hambly_kumagai_sequence(level: int) -> GraphSequence:
    """HK_level: every edge becomes two parallel branches of two edges each.

    Auxiliary chain length ``N = 2**level``; at step ``i`` the vertices with
    radial divisible by ``2**(level - i + 1)`` are retained.
    """
    if level < 0:
        raise ConstructionError("level must be >= 0")
    N = 2**level
    steps = [(2, lambda r, s=2 ** (level - i + 1): r % s == 0) for i in range(1, level + 1)]
    return _rule_sequence(N, steps, family="hk", level=level)


def lang_plaut_sequence(level: int) -> GraphSequence:
    """LP_level: every edge becomes three in series, the middle one doubled into two 2-paths.

    Auxiliary chain length ``N = 4**level``; at step ``i`` (block size
    ``s = 4**(level - i)``) the vertices strictly inside the middle half of
    each ``4s`` block are copied.
    """
    if level < 0:
        raise ConstructionError("level must be >= 0")
    N = 4**level
    steps = [(2, lambda r, s=4 ** (level - i): not (s < r % (4 * s) < 3 * s)) for i in range(1, level + 1)]
    return _rule_sequence(N, steps, family="lp", level=level)


def hambly_kumagai(level: int) -> LayeredGraph:
    return hambly_kumagai_sequence(level).final


def lang_plaut(level: int) -> LayeredGraph:
    return lang_plaut_sequence(level).final


def hk_vertex_count(level: int) -> int:
    return (2 * 4**level + 4) // 3


def counterexample_sequence() -> GraphSequence:
    """Two copies of the level-1 diamond (N=4) glued only at ``0`` and ``2.w1``."""
    v = VertexAddress
    plan = ConstructionPlan(
        4,
        (
            Step(2, frozenset({v(0), v(4)})),
            Step(2, frozenset({v(0), v(2, (1,))})),
        ),
    )
    return build_sequence(plan, family="g2tilde", level=2)


def counterexample_g2tilde() -> LayeredGraph:
    return counterexample_sequence().final


_SHORTCUT = re.compile(r"^(hk|lp):(\d+)$")


def sequence_for(family: str, level: int | None = None) -> GraphSequence:
    """Resolve ``"hk"``/``"lp"`` (with ``level``), ``"hk:3"`` style shortcuts, or ``"g2tilde"``."""
    m = _SHORTCUT.match(family)
    if m:
        family, level = m.group(1), int(m.group(2))
    if family == "g2tilde":
        return counterexample_sequence()
    if level is None:
        raise ConstructionError(f"family {family!r} needs a level")
    if family == "hk":
        return hambly_kumagai_sequence(level)
    if family == "lp":
        return lang_plaut_sequence(level)
    raise ConstructionError(f"unknown family {family!r}")
