import pytest

from roundlab import (
    Graph, UnreachableError, RoutableError,
    build_timed_graph, max_route_flow, tau_route, extract_level_vector,
    mirror_timed_path, validate_timed_path, TimedPath,
    path_graph, clique, intro_split_graph, random_connected_graph,
    parallel_edges,
)
from oracles import timed_flow_bruteforce, tau_route_bruteforce


def test_timed_graph_edge_counts():
    single = Graph(2, ((0, 1),), (0, 1))
    assert build_timed_graph(single, 2).nonmemory_edge_count == 4
    tri = clique(3)
    assert build_timed_graph(tri, 1).nonmemory_edge_count == 6
    p = path_graph(2, terminals=(0, 2))
    assert build_timed_graph(p, 3).nonmemory_edge_count == 12


def test_timed_arcs_connect_consecutive_layers():
    tg = build_timed_graph(clique(3), 2)
    for layer, eid, u, v in tg.arcs:
        assert 0 <= layer < tg.tau


def test_single_edge_pipelines_one_bit_per_round():
    g = Graph(2, ((0, 1),), (0, 1))
    assert max_route_flow(g, 0, 1, 3).value == 3


def test_path_bottleneck():
    g = path_graph(2, terminals=(0, 2))
    assert max_route_flow(g, 0, 2, 2).value == 1


def test_intro_graph_flow_matches_bruteforce():
    g = intro_split_graph()
    # frozen from the brute-force oracle: direct edge pipelines 4 units,
    # each of the 4 long paths carries 1
    assert timed_flow_bruteforce(g, 0, 1, 4) == 8
    assert max_route_flow(g, 0, 1, 4).value == 8


def test_flow_matches_bruteforce_random():
    for seed in range(15):
        g = random_connected_graph(6, 4, seed=seed)
        a, b = g.terminals[0], g.terminals[1]
        for tau in (1, 2, 3):
            assert max_route_flow(g, a, b, tau).value == \
                timed_flow_bruteforce(g, a, b, tau)


def test_flow_monotone_in_horizon():
    g = random_connected_graph(6, 5, seed=7)
    a, b = g.terminals[0], g.terminals[1]
    vals = [max_route_flow(g, a, b, tau).value for tau in range(5)]
    assert vals == sorted(vals)


def test_flow_paths_are_valid_and_disjoint():
    g = intro_split_graph()
    sol = max_route_flow(g, 0, 1, 4)
    assert len(sol.paths) == sol.value
    assert sol.max_nonmemory_load() <= 1
    for p in sol.paths:
        validate_timed_path(g, p, 4)
        assert p.verts[0] == 0 and p.verts[-1] == 1


def test_tau_route_single_edge():
    g = Graph(2, ((0, 1),), (0, 1))
    assert tau_route(g, 0, 1, 5) == 5


def test_tau_route_path_distance():
    for length in (1, 2, 4):
        g = path_graph(length)
        assert tau_route(g, 0, length, 1) == length


def test_tau_route_intro_graph():
    g = intro_split_graph()
    # frozen via brute force: flow(tau) = tau + 4*max(tau-3, 0)
    assert tau_route_bruteforce(g, 0, 1, 16) == 6
    assert tau_route(g, 0, 1, 16) == 6


def test_tau_route_unreachable():
    g = Graph(3, ((0, 1),), (0, 1, 2))
    with pytest.raises(UnreachableError):
        tau_route(g, 0, 2, 1)


def test_tau_route_symmetry_and_subadditivity():
    for seed in range(12):
        g = random_connected_graph(6, 4, seed=100 + seed)
        a, b = g.terminals[0], g.terminals[1]
        assert tau_route(g, a, b, 3) == tau_route(g, b, a, 3)
        t1 = tau_route(g, a, b, 2)
        t2 = tau_route(g, a, b, 7)
        assert t2 <= -(-7 // 2) * t1  # ceil(7/2) * tau(2)


def test_level_vector_single_edge():
    g = Graph(2, ((0, 1),), (0, 1))
    lv = extract_level_vector(g, 0, 1, n_bits=2, horizon=1)
    assert lv.levels[0] == 0 and lv.levels[1] == 2
    assert lv.cost == 1


def test_level_vector_path_zero_cost():
    g = path_graph(2, terminals=(0, 2))
    lv = extract_level_vector(g, 0, 2, n_bits=1, horizon=1)
    assert lv.levels[0] == 0 and lv.levels[2] == 2
    assert lv.cost == 0


def test_level_vector_requires_unroutable():
    g = Graph(2, ((0, 1),), (0, 1))
    with pytest.raises(RoutableError):
        extract_level_vector(g, 0, 1, n_bits=1, horizon=3)


def test_level_vector_random_cases():
    checked = 0
    for seed in range(40):
        g = random_connected_graph(6, 5, seed=200 + seed)
        a, b = g.terminals[0], g.terminals[1]
        for horizon in (1, 2, 3):
            flow = max_route_flow(g, a, b, horizon).value
            n_bits = flow + 1 + (seed % 3)
            lv = extract_level_vector(g, a, b, n_bits, horizon)
            assert lv.levels[a] == 0
            assert lv.levels[b] == horizon + 1
            assert lv.cost < n_bits
            checked += 1
    assert checked >= 100


def test_mirror_is_involution():
    g = path_graph(3, terminals=(0, 3))
    sol = max_route_flow(g, 0, 3, 4)
    for p in sol.paths:
        m = mirror_timed_path(p, 4)
        validate_timed_path(g, m, 4)
        assert mirror_timed_path(m, 4) == p
        assert m.verts[0] == p.verts[-1] and m.verts[-1] == p.verts[0]


def test_timed_path_projection():
    p = TimedPath(0, (0, 0, 1, 1), (None, 0, None))
    verts, eids = p.base_path()
    assert verts == (0, 1) and eids == (0,)
    assert p.hops == 1


def test_parallel_edges_capacity():
    g = parallel_edges(3)
    assert max_route_flow(g, 0, 1, 1).value == 3
    assert tau_route(g, 0, 1, 6) == 2
