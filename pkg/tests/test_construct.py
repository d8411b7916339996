import json

import networkx as nx
import pytest

from oracles import recursive_diamond
from fractal_pqst.construct import (
    ConstructionError,
    ConstructionPlan,
    Step,
    build_sequence,
    chains_of,
    counterexample_sequence,
    distinct_chains,
    hambly_kumagai_sequence,
    hk_vertex_count,
    lang_plaut_sequence,
    sequence_for,
)
from fractal_pqst.graph import DegreeProfile, VertexAddress, degree_profile, path_graph

V = VertexAddress.parse


def _step(k, vertices, edges=()):
    return Step(k, frozenset(map(V, vertices)), frozenset((V(a), V(b)) for a, b in edges))


def test_two_step_plan_reaches_level_two():
    plan = ConstructionPlan(4, (_step(2, ["0", "4"]), _step(2, ["0", "2.w1", "2.w2", "4"])))
    seq = build_sequence(plan)
    g1, g2 = seq.graphs[1], seq.graphs[2]
    assert len(g1) == 8
    assert sorted(map(str, g1.vertices)) == sorted(["0", "4"] + [f"{r}.w{w}" for r in (1, 2, 3) for w in (1, 2)])
    assert len(g2) == 12
    assert g2.vertices == hambly_kumagai_sequence(2).final.vertices
    assert g2.edges == hambly_kumagai_sequence(2).final.edges


@pytest.mark.parametrize("k", [2, 3, 5])
def test_single_diamond(k):
    seq = build_sequence(ConstructionPlan(2, (_step(k, ["0", "2"]),)))
    g = seq.final
    assert len(g) == k + 2 and len(g.edges) == 2 * k
    assert sorted(len(g.adjacency[v]) for v in g.vertices) == [2] * k + [k, k]


@pytest.mark.parametrize("level", range(0, 7))
def test_hk_vertex_count(level):
    g = hambly_kumagai_sequence(level).final
    assert len(g) == hk_vertex_count(level) == (2 * 4**level + 4) // 3
    assert g.N == 2**level


@pytest.mark.parametrize("level,count", [(0, 2), (1, 6), (2, 30), (3, 174)])
def test_lp_vertex_count(level, count):
    g = lang_plaut_sequence(level).final
    assert len(g) == count and g.N == 4**level


def _as_networkx(graph):
    g = nx.Graph()
    for v in graph.vertices:
        g.add_node(v, layer=graph.layer_of[v])
    g.add_edges_from(graph.edges)
    return g


@pytest.mark.parametrize("family,level", [("hk", 1), ("hk", 2), ("hk", 3), ("hk", 4), ("lp", 1), ("lp", 2), ("lp", 3)])
def test_matches_edge_substitution(family, level):
    ours = _as_networkx(sequence_for(family, level).final)
    ref = recursive_diamond(family, level)
    dist = nx.single_source_shortest_path_length(ref, 0)
    nx.set_node_attributes(ref, dist, "layer")
    assert ours.number_of_nodes() == ref.number_of_nodes()
    assert ours.number_of_edges() == ref.number_of_edges()
    assert nx.vf2pp_is_isomorphic(ours, ref, node_label="layer")


@pytest.mark.parametrize("family,level", [("hk", 3), ("lp", 2)])
def test_projection_maps(family, level):
    seq = sequence_for(family, level)
    for i, maps in enumerate(seq.maps, start=1):
        prev, cur = seq.graphs[i - 1], seq.graphs[i]
        for x in prev.vertices:
            for w in range(1, maps.alphabet_size + 1):
                assert maps.phi[maps.pi(x, w)] == x
        assert set(maps.phi) == set(cur.vertices)
        # layering of each G_i is the radial coordinate, i.e. the composed projection
        for v in cur.vertices:
            assert cur.layer_of[v] == v.radial
    for v in seq.final.vertices:
        assert seq.radial_projection(v) == seq.final.layer_of[v]


def test_retained_vertices_keep_short_words():
    seq = hambly_kumagai_sequence(3)
    for i, maps in enumerate(seq.maps, start=1):
        for v in seq.graphs[i].vertices:
            if v in maps.retained:
                assert len(v.word) <= i - 1
            else:
                assert len(v.word) == len(maps.phi[v].word) + 1


@pytest.mark.parametrize("family,level", [("hk", 1), ("hk", 4), ("lp", 1), ("lp", 3)])
def test_families_satisfy_assumptions(family, level):
    assert isinstance(degree_profile(sequence_for(family, level).final), DegreeProfile)


def test_hk_level_two_chains():
    seq = hambly_kumagai_sequence(2)
    chains = seq.chains[1]
    assert len(chains) == 4
    assert all(c.span[1] - c.span[0] == 2 for c in chains)
    assert len(distinct_chains(chains, seq.N, mode="span")) == 2
    assert len(distinct_chains(chains, seq.N, mode="mirror")) == 1


def test_lp_first_chain_span():
    seq = lang_plaut_sequence(2)
    (chain,) = seq.chains[0]
    assert chain.span == (4, 12)
    assert [v.radial for v in chain.vertices] == list(range(5, 12))
    assert chain.left == V("4") and chain.right == V("12")


def test_no_gluing_set_gives_whole_chain():
    (chain,) = chains_of(path_graph(4), [])
    assert chain.vertices == path_graph(4).vertices
    assert chain.left is None and chain.right is None


def test_non_chain_component_rejected():
    g = hambly_kumagai_sequence(2).final
    with pytest.raises(ConstructionError, match="not a 1D chain"):
        chains_of(g, [V("0")])


def test_unretained_edge_between_retained_vertices_rejected():
    with pytest.raises(ConstructionError, match="parallel"):
        chains_of(path_graph(3), [V("0"), V("1")])


def test_retained_edge_must_join_retained_vertices():
    with pytest.raises(ConstructionError):
        Step(2, frozenset({V("0")}), frozenset({(V("0"), V("1"))}))


def test_counterexample():
    seq = counterexample_sequence()
    g = seq.final
    assert len(g) == 14
    assert g.N == 4
    assert sorted(map(str, g.layers[2])) == ["2.w1", "2.w2.w1", "2.w2.w2"]


def test_plan_json_round_trip():
    plan = lang_plaut_sequence(2).plan
    again = ConstructionPlan.from_dict(json.loads(json.dumps(plan.to_dict())))
    assert again == plan
    assert build_sequence(again).final.edges == lang_plaut_sequence(2).final.edges


def test_sequence_for_errors():
    with pytest.raises(ConstructionError):
        sequence_for("hk")
    with pytest.raises(ConstructionError):
        sequence_for("xyz", 2)
    assert len(sequence_for("lp:1").final) == 6
