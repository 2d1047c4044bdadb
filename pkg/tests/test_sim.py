import hashlib
import itertools

import pytest

from roundlab import (
    Graph, path_graph, extract_level_vector, max_route_flow,
    random_connected_graph,
)
from roundlab.sim import (
    ContractViolation, MaxRoundsExceeded, ProtocolSpec, PublicRandomness,
    extract_two_party, replay_matches, run_protocol,
)


def _prf_bit(*args):
    return hashlib.sha256("|".join(map(str, args)).encode()).digest()[0] & 1


def make_random_protocol(g, rounds, proto_seed):
    """Full-send protocol: every bit is a PRF of the sender's history."""

    def init(v, _g, block):
        return {"in": block, "hist": ()}

    def step(v, rnd, state, inbox, pub):
        hist = state["hist"] + (tuple(sorted(inbox.items())),)
        pubbit = pub.bits(f"round{rnd}", 1)[0]
        sends = {eid: _prf_bit(proto_seed, "s", v, eid, rnd, state["in"],
                               hist, pubbit)
                 for eid, _ in g.incidence[v]}
        out = None
        if rnd == rounds and v in g.terminals:
            out = _prf_bit(proto_seed, "out", v, state["in"], hist)
        return sends, {"in": state["in"], "hist": hist}, out

    return ProtocolSpec(f"rand-{proto_seed}", rounds, init, step)


def one_shot_protocol(g):
    """Vertex 0 sends its input bit to vertex 1 over the single edge."""

    def init(v, _g, block):
        return block

    def step(v, rnd, state, inbox, pub):
        if v == 0:
            return {0: state}, state, state
        if inbox:
            return {}, state, inbox[0]
        return {}, state, None

    return ProtocolSpec("one-shot", 2, init, step)


def test_one_round_send():
    g = Graph(2, ((0, 1),), (0, 1))
    tr = run_protocol(g, one_shot_protocol(g), {0: 1, 1: None}, seed=0)
    assert tr.outputs == {0: 1, 1: 1}
    assert tr.bits[0] == {(0, 1, 0): 1}


def test_echo_along_path():
    length = 4
    g = path_graph(length)

    def init(v, _g, block):
        return {"val": block if v == 0 else None}

    def step(v, rnd, state, inbox, pub):
        val = state["val"]
        if val is None and inbox:
            val = list(inbox.values())[0]
        sends = {}
        if val is not None:
            for eid, w in g.incidence[v]:
                if w == v + 1:
                    sends[eid] = val
        out = None
        if v == 0:
            out = state["val"]
        if v == length and val is not None:
            out = val
        return sends, {"val": val}, out

    p = ProtocolSpec("echo", 2 * length, init, step)
    tr = run_protocol(g, p, {0: 1, length: None}, seed=0)
    assert tr.outputs[length] == 1
    # the bit crosses the last edge at round `length` (store-and-forward);
    # the endpoint consumes it on the following step
    assert any(key[1] == length for key in tr.bits[length - 1])
    assert tr.rounds == length + 1


def test_determinism_and_replay():
    g = random_connected_graph(5, 4, seed=8)
    p = make_random_protocol(g, rounds=4, proto_seed=1)
    inputs = {t: (t % 2,) for t in g.terminals}
    t1 = run_protocol(g, p, inputs, seed=3)
    t2 = run_protocol(g, p, inputs, seed=3)
    assert t1.bits == t2.bits and t1.outputs == t2.outputs
    assert replay_matches(g, p, inputs, 3, t1)


def test_contract_violations():
    g = Graph(2, ((0, 1),), (0, 1))

    def bad_step(v, rnd, state, inbox, pub):
        return {5: 1}, state, None

    with pytest.raises(ContractViolation):
        run_protocol(g, ProtocolSpec("bad", 2, lambda v, g2, b: None,
                                     bad_step), {0: None, 1: None})

    def nonbit(v, rnd, state, inbox, pub):
        return {0: 2}, state, None

    with pytest.raises(ContractViolation):
        run_protocol(g, ProtocolSpec("bad2", 2, lambda v, g2, b: None,
                                     nonbit), {0: None, 1: None})


def test_max_rounds_exhaustion():
    g = Graph(2, ((0, 1),), (0, 1))

    def silent(v, rnd, state, inbox, pub):
        return {}, state, None

    with pytest.raises(MaxRoundsExceeded) as exc:
        run_protocol(g, ProtocolSpec("silent", 3, lambda v, g2, b: None,
                                     silent), {0: None, 1: None})
    assert exc.value.transcript.rounds == 3


def test_inputs_must_cover_terminals():
    g = Graph(2, ((0, 1),), (0, 1))
    p = one_shot_protocol(g)
    with pytest.raises(Exception):
        run_protocol(g, p, {0: 1})


def test_public_randomness_is_label_addressed():
    pub = PublicRandomness(7)
    assert pub.bits("x", 16) == pub.bits("x", 16)
    assert pub.bits("x", 16) != pub.bits("y", 16)


# ---------------------------------------------------------------------------
# two-party extraction

def test_extract_single_edge_one_round():
    g = Graph(2, ((0, 1),), (0, 1))
    p = make_random_protocol(g, rounds=1, proto_seed=5)
    inputs = {0: (1,), 1: (0,)}
    lv = extract_level_vector(g, 0, 1, n_bits=3, horizon=2)
    assert lv.levels == (0, 3)
    tr = run_protocol(g, p, inputs, seed=2)
    two = extract_two_party(g, p, lv, inputs, seed=2)
    # both directions cross: a' ships x^1_{0,1} and b' ships x^1_{1,0}
    assert ("a->b", tr.bits[0][(0, 1, 0)], (0, 1, 0, 1)) in two.messages
    assert ("b->a", tr.bits[0][(1, 0, 0)], (1, 0, 0, 1)) in two.messages
    assert two.total_bits <= 2 * 3 - 2
    assert two.output_a == tr.outputs[0]
    assert two.output_b == tr.outputs[1]


def test_extract_no_communication_when_cost_zero():
    g = path_graph(3, terminals=(0, 3))
    p = make_random_protocol(g, rounds=1, proto_seed=6)
    inputs = {0: (1,), 3: (1,)}
    assert max_route_flow(g, 0, 3, 2).value == 0
    lv = extract_level_vector(g, 0, 3, n_bits=1, horizon=2)
    assert lv.cost == 0
    two = extract_two_party(g, p, lv, inputs, seed=0)
    assert two.messages == ()
    tr = run_protocol(g, p, inputs, seed=0)
    assert two.output_a == tr.outputs[0] and two.output_b == tr.outputs[3]


def test_extract_random_protocols_exhaustive_inputs():
    cases = 0
    for seed in range(25):
        g = random_connected_graph(5, 3, seed=900 + seed)
        a, b = g.terminals[0], g.terminals[1]
        g = Graph(g.n, g.edges, (a, b))
        rounds = 1 + seed % 3
        p = make_random_protocol(g, rounds, proto_seed=seed)
        horizon = 2 * rounds
        flow = max_route_flow(g, a, b, horizon).value
        n_bits = flow + 1 + (seed % 2)
        lv = extract_level_vector(g, a, b, n_bits, horizon)
        for xa, xb in itertools.product((0, 1), repeat=2):
            inputs = {a: (xa,), b: (xb,)}
            tr = run_protocol(g, p, inputs, seed=seed)
            two = extract_two_party(g, p, lv, inputs, seed=seed)
            assert two.output_a == tr.outputs[a]
            assert two.output_b == tr.outputs[b]
            assert two.total_bits <= 2 * lv.cost
            assert two.total_bits <= 2 * n_bits - 2
            cases += 1
    assert cases >= 100
