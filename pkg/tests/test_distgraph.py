import itertools
import math
import random

import pytest

from roundlab import Graph, clique, path_graph, random_connected_graph
from roundlab.distgraph import (
    BalanceError, DistributedGraphInput, and_disj_instance, bfs_layer_demands,
    bfs_protocol, edge_to_node_rebalance, graph_oracles, instance_from_json,
    or_disj_instance, random_pair_strings,
)
from roundlab.schedules import audit_schedule
from roundlab.sim import run_protocol

from oracles import (
    and_disj_oracle, components_unionfind, has_triangle_bruteforce,
    is_acyclic_bruteforce, is_bipartite_bruteforce, or_disj_oracle,
)


def all_pair_strings(terminals, n):
    terms = sorted(terminals)
    pairs = [(u, w) for u in terms for w in terms if u != w]
    for bits in itertools.product(
            itertools.product((0, 1), repeat=n), repeat=len(pairs)):
        yield dict(zip(pairs, bits))


# ---------------------------------------------------------------------------
# reduction soundness

def test_or_disj_figure_instance():
    # the illustrated 3-player instance: exactly one pairwise intersection,
    # between players 2 and 3 at index 2 (1-based), so the triangle is
    # {y^{2,3}, y^{3,2}, x_2^{{2,3}}} and the rest is a forest
    strings = {
        (1, 2): (1, 0, 1), (2, 1): (0, 1, 0),
        (1, 3): (1, 1, 0), (3, 1): (0, 0, 1),
        (2, 3): (0, 1, 1), (3, 2): (0, 1, 0),
    }
    inst = or_disj_instance(strings, (1, 2, 3), 3)
    assert graph_oracles(inst.num_vertices, inst.edges, "triangle")
    tri = {inst.names[("y", 2, 3)], inst.names[("y", 3, 2)],
           inst.names[("x", 2, 3, 1)]}
    adj = inst.adjacency()
    for u in tri:
        assert len(tri & set(adj[u])) == 2
    # removing the triangle's x-vertex leaves a forest
    remaining = [e for e in inst.edges
                 if inst.names[("x", 2, 3, 1)] not in e]
    assert is_acyclic_bruteforce(inst.num_vertices, remaining)


def test_or_disj_all_zero_is_forest():
    terms = (0, 1, 2)
    strings = {(u, w): (0, 0) for u in terms for w in terms if u != w}
    inst = or_disj_instance(strings, terms, 2)
    assert is_acyclic_bruteforce(inst.num_vertices, inst.edges)
    assert not graph_oracles(inst.num_vertices, inst.edges, "triangle")


def test_or_disj_exhaustive_small():
    terms = (0, 1, 2)
    n = 1
    for strings in all_pair_strings(terms, n):
        inst = or_disj_instance(strings, terms, n)
        want = or_disj_oracle(strings)
        has_tri = graph_oracles(inst.num_vertices, inst.edges, "triangle")
        assert has_tri == bool(want)
        assert has_triangle_bruteforce(inst.num_vertices, inst.edges) == \
            bool(want)
        if not want:
            assert is_acyclic_bruteforce(inst.num_vertices, inst.edges)


def test_or_disj_pair_gadget_exhaustive_n3():
    # soundness is per-pair: gadgets of distinct pairs are vertex-disjoint,
    # so exhausting one pair's 2^(2n) inputs covers every k
    terms = (0, 1)
    for strings in all_pair_strings(terms, 3):
        inst = or_disj_instance(strings, terms, 3)
        want = bool(or_disj_oracle(strings))
        assert graph_oracles(inst.num_vertices, inst.edges, "triangle") == want
        if not want:
            assert is_acyclic_bruteforce(inst.num_vertices, inst.edges)


def test_and_disj_figure_instance():
    strings = {
        (1, 2): (0, 1, 1), (2, 1): (1, 0, 0),
        (1, 3): (1, 1, 1), (3, 1): (0, 0, 1),
        (2, 3): (0, 1, 0), (3, 2): (0, 1, 1),
    }
    inst = and_disj_instance(strings, (1, 2, 3), 3)
    assert components_unionfind(inst.num_vertices, inst.edges) == 2
    # the separated component is l^{{1,2}} with x_2, x_3 of that pair
    blue = {inst.names[("l", 1, 2)], inst.names[("x", 1, 2, 1)],
            inst.names[("x", 1, 2, 2)]}
    adj = inst.adjacency()
    seen = set()
    stack = [inst.names[("l", 1, 2)]]
    while stack:
        x = stack.pop()
        if x in seen:
            continue
        seen.add(x)
        stack.extend(adj[x])
    assert seen == blue


def test_and_disj_all_intersecting_connected():
    terms = (0, 1, 2)
    strings = {(u, w): (1, 1) for u in terms for w in terms if u != w}
    inst = and_disj_instance(strings, terms, 2)
    assert graph_oracles(inst.num_vertices, inst.edges, "connected")


def test_and_disj_exhaustive_small():
    terms = (0, 1, 2)
    n = 1
    for strings in all_pair_strings(terms, n):
        inst = and_disj_instance(strings, terms, n)
        want = bool(and_disj_oracle(strings))
        assert graph_oracles(inst.num_vertices, inst.edges, "connected") == \
            want
        assert (components_unionfind(inst.num_vertices, inst.edges) == 1) == \
            want


def test_and_disj_pair_gadget_exhaustive_n3():
    terms = (0, 1)
    for strings in all_pair_strings(terms, 3):
        inst = and_disj_instance(strings, terms, 3)
        want = bool(and_disj_oracle(strings))
        assert graph_oracles(inst.num_vertices, inst.edges, "connected") == want


def test_gadget_locality_and_sizes():
    terms = (0, 1, 2, 3)
    n = 3
    strings = random_pair_strings(terms, n, seed=5)
    inst = or_disj_instance(strings, terms, n)
    k = len(terms)
    pairs = k * (k - 1) // 2
    assert inst.num_vertices == pairs * (n + 2)
    # every edge owner contributed it from its own strings
    for (u, v), owner in zip(inst.edges, inst.assignment):
        assert owner in terms
    sizes = inst.sizes()
    assert max(sizes.values()) <= n * (k - 1) + (k - 1)


def test_instance_json_roundtrip():
    terms = (0, 1, 2)
    strings = random_pair_strings(terms, 2, seed=1)
    inst = and_disj_instance(strings, terms, 2)
    again = instance_from_json(inst.to_json())
    assert again.edges == inst.edges
    assert again.assignment == inst.assignment


# ---------------------------------------------------------------------------
# oracles cross-check (dual implementations)

def test_graph_oracles_cross_check():
    rng = random.Random(2)
    for _ in range(60):
        n = rng.randint(2, 12)
        edges = []
        for u in range(n):
            for v in range(u + 1, n):
                if rng.random() < 0.25:
                    edges.append((u, v))
        edges = tuple(edges)
        assert graph_oracles(n, edges, "triangle") == \
            has_triangle_bruteforce(n, edges)
        assert graph_oracles(n, edges, "components") == \
            components_unionfind(n, edges)
        assert graph_oracles(n, edges, "connected") == \
            (components_unionfind(n, edges) <= 1)
        assert graph_oracles(n, edges, "acyclic") == \
            is_acyclic_bruteforce(n, edges)
        assert graph_oracles(n, edges, "bipartite") == \
            is_bipartite_bruteforce(n, edges)


# ---------------------------------------------------------------------------
# rebalance

def test_rebalance_moves_edge_input_to_node_input():
    g = clique(3)
    terms = g.terminals
    strings = random_pair_strings(terms, 2, seed=3)
    inst = or_disj_instance(strings, terms, 2)
    node_inp, sched = edge_to_node_rebalance(g, terms, inst, seed=0)
    assert node_inp.mode == "node"
    assert set(node_inp.assignment) == set(range(inst.num_vertices))
    audit_schedule(sched, g, legged=False, demands=None)


def test_rebalance_empty_graph():
    g = clique(3)
    inst = DistributedGraphInput(3, (), "edge", g.terminals, ())
    node_inp, sched = edge_to_node_rebalance(g, g.terminals, inst, seed=1)
    assert sched.horizon == 0


def test_rebalance_balance_concentrates():
    g = clique(4)
    rng = random.Random(9)
    for seed in range(20):
        n_h = rng.randint(6, 20)
        edges = []
        for u in range(n_h):
            for v in range(u + 1, n_h):
                if rng.random() < 0.3:
                    edges.append((u, v))
        if not edges:
            continue
        inst = DistributedGraphInput(
            n_h, tuple(edges), "edge", g.terminals,
            tuple(g.terminals[0] for _ in edges))  # everything at one player
        node_inp, _ = edge_to_node_rebalance(g, g.terminals, inst, seed=seed)
        m_h = len(edges)
        delta_h = inst.max_degree
        bound = 4 * (m_h / 4 + delta_h) * math.log2(n_h * 4 + 2)
        assert max(node_inp.sizes().values()) <= bound


# ---------------------------------------------------------------------------
# flooding protocols

def _random_node_instance(rng, n_h, terms):
    edges = []
    for u in range(n_h):
        for v in range(u + 1, n_h):
            if rng.random() < rng.choice((0.1, 0.25, 0.5)):
                edges.append((u, v))
    placement = {v: terms[rng.randrange(len(terms))] for v in range(n_h)}
    return DistributedGraphInput(n_h, tuple(edges), "node", terms, placement)


def _run_variant(g, inp, variant, seed=0):
    proto = bfs_protocol(g, g.terminals, inp, variant, seed=seed)
    tr = run_protocol(g, proto, inp.blocks(), seed=seed)
    outs = set(tr.outputs.values())
    assert len(outs) == 1
    return outs.pop(), tr


def test_bfs_single_path_connected():
    g = Graph(2, ((0, 1),), (0, 1))
    inp = DistributedGraphInput(3, ((0, 1), (1, 2)), "node", (0, 1),
                                {0: 0, 1: 1, 2: 0})
    ans, _ = _run_variant(g, inp, "connectivity")
    assert ans is True


def test_bfs_disconnected_components():
    g = clique(3)
    inp = DistributedGraphInput(4, ((0, 1), (2, 3)), "node", g.terminals,
                                {0: 0, 1: 1, 2: 2, 3: 0})
    ans, _ = _run_variant(g, inp, "connectivity")
    assert ans is False
    ans, _ = _run_variant(g, inp, "components")
    assert ans == 2


def test_bfs_cycle_detection():
    g = clique(3)
    tri = DistributedGraphInput(3, ((0, 1), (1, 2), (0, 2)), "node",
                                g.terminals, {0: 0, 1: 1, 2: 2})
    ans, _ = _run_variant(g, tri, "acyclicity")
    assert ans is False
    ans, _ = _run_variant(g, tri, "bipartiteness")
    assert ans is False
    tree = DistributedGraphInput(4, ((0, 1), (1, 2), (1, 3)), "node",
                                 g.terminals, {0: 0, 1: 1, 2: 2, 3: 0})
    ans, _ = _run_variant(g, tree, "acyclicity")
    assert ans is True
    ans, _ = _run_variant(g, tree, "bipartiteness")
    assert ans is True


def test_bfs_and_disj_connectivity_matches_oracle():
    g = clique(3)
    terms = g.terminals
    for seed in range(6):
        strings = random_pair_strings(terms, 2, seed=seed)
        inst = and_disj_instance(strings, terms, 2)
        node_inp, _ = edge_to_node_rebalance(g, terms, inst, seed=seed)
        ans, _ = _run_variant(g, node_inp, "connectivity", seed=seed)
        assert ans == bool(and_disj_oracle(strings))


def test_bfs_random_instances_all_variants():
    rng = random.Random(42)
    for case in range(25):
        n_g = rng.randint(2, 5)
        g = random_connected_graph(n_g, rng.randint(1, 4),
                                   seed=1000 + case,
                                   k=rng.randint(2, min(3, n_g)))
        inp = _random_node_instance(rng, rng.randint(2, 12), g.terminals)
        for variant, query in (("connectivity", "connected"),
                               ("components", "components"),
                               ("acyclicity", "acyclic"),
                               ("bipartiteness", "bipartite")):
            ans, _ = _run_variant(g, inp, variant, seed=case)
            want = graph_oracles(inp.num_vertices, inp.edges, query)
            assert ans == want, (case, variant)


def test_bfs_balance_rejection():
    g = clique(3)
    inp = DistributedGraphInput(4, ((0, 1), (1, 2), (2, 3)), "node",
                                g.terminals, {0: 0, 1: 0, 2: 0, 3: 0})
    with pytest.raises(BalanceError) as exc:
        bfs_protocol(g, g.terminals, inp, "connectivity", balance_bound=3)
    assert exc.value.skew == 6


def test_bfs_layer_demand_boundedness():
    rng = random.Random(7)
    for case in range(15):
        g = clique(4)
        inp = _random_node_instance(rng, rng.randint(4, 16), g.terminals)
        layers = bfs_layer_demands(inp, start=0)
        k = len(g.terminals)
        for demand in layers:
            if not demand:
                continue
            m_i = sum(demand.values())
            delta_i = inp.max_degree
            peak = max(
                max(sum(a for (s, _), a in demand.items() if s == t)
                    for t in g.terminals),
                max(sum(a for (_, d), a in demand.items() if d == t)
                    for t in g.terminals))
            log_factor = math.log2(inp.num_vertices * k + 2)
            assert peak <= (m_i / k + delta_i) * log_factor * 4
