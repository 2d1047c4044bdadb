"""Distributed graph computation over the simulator.

A problem graph H lives on the terminals either edge-distributed or
node-distributed (whole adjacency lists).  The reduction generators build
the pairwise-gadget instances whose triangle/connectivity structure
encodes OR/AND of two-party intersections; each player's subgraph is a
function of that player's strings only.

The flooding protocols simulate BFS over H on top of the communication
graph: token notifications travel as framed packets along fixed shortest
paths, progress is checked by aggregations up a spanning tree at
geometrically spaced checkpoints (termination, token counts, duplicate
and parity flags, next start vertex for restarts), and the final answer
rides down the same tree.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from .graphs import GraphError, bfs_tree
from .mcf import DemandMatrix, route_bounded_demand
from .sim import ProtocolSpec


class BalanceError(ValueError):
    """Input distribution exceeds the configured balance bound."""

    def __init__(self, skew, bound):
        super().__init__(f"measured skew {skew} exceeds bound {bound}")
        self.skew = skew
        self.bound = bound


@dataclass
class DistributedGraphInput:
    """H = union of per-terminal subgraphs, with its distribution mode."""

    num_vertices: int
    edges: tuple                  # global edge list of H
    mode: str                     # "node" | "edge"
    terminals: tuple
    assignment: object            # edge mode: tuple, owner per edge
                                  # node mode: dict vertex -> owner
    names: dict = field(default_factory=dict)

    def __post_init__(self):
        self.terminals = tuple(sorted(self.terminals))
        for u, v in self.edges:
            if not (0 <= u < self.num_vertices and 0 <= v < self.num_vertices):
                raise GraphError("H edge out of range")
            if u == v:
                raise GraphError("H must be loop-free")
        if self.mode == "edge":
            if len(self.assignment) != len(self.edges):
                raise GraphError("need one owner per edge")
        elif self.mode == "node":
            if set(self.assignment) != set(range(self.num_vertices)):
                raise GraphError("need one owner per vertex")
        else:
            raise GraphError(f"unknown mode {self.mode!r}")
        terms = set(self.terminals)
        vals = (self.assignment.values() if self.mode == "node"
                else self.assignment)
        if any(t not in terms for t in vals):
            raise GraphError("owner outside the terminal set")

    @property
    def num_edges(self):
        return len(self.edges)

    @property
    def max_degree(self):
        deg = [0] * self.num_vertices
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return max(deg, default=0)

    def adjacency(self):
        adj = {v: [] for v in range(self.num_vertices)}
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return {v: tuple(sorted(ws)) for v, ws in adj.items()}

    def sizes(self):
        """Per-terminal share under the mode's size measure."""
        out = {t: 0 for t in self.terminals}
        if self.mode == "edge":
            for owner in self.assignment:
                out[owner] += 1
        else:
            adj = self.adjacency()
            for v, owner in self.assignment.items():
                out[owner] += len(adj[v])
        return out

    def is_balanced(self, bound):
        return max(self.sizes().values(), default=0) <= bound

    def subgraph(self, terminal):
        if self.mode == "edge":
            return tuple(e for e, owner in zip(self.edges, self.assignment)
                         if owner == terminal)
        adj = self.adjacency()
        return {v: adj[v] for v, owner in sorted(self.assignment.items())
                if owner == terminal}

    def blocks(self):
        """Per-terminal protocol input blocks."""
        return {t: self.subgraph(t) for t in self.terminals}

    def to_json(self):
        return {
            "H": {"n": self.num_vertices, "edges": [list(e) for e in self.edges]},
            "mode": self.mode,
            "assignment": (list(self.assignment) if self.mode == "edge"
                           else {str(v): o for v, o in self.assignment.items()}),
            "terminals": list(self.terminals),
            "per_terminal_sizes": {str(t): s for t, s in self.sizes().items()},
        }


def instance_from_json(obj):
    mode = obj["mode"]
    assignment = (tuple(obj["assignment"]) if mode == "edge"
                  else {int(v): o for v, o in obj["assignment"].items()})
    return DistributedGraphInput(
        num_vertices=int(obj["H"]["n"]),
        edges=tuple(tuple(e) for e in obj["H"]["edges"]),
        mode=mode,
        terminals=tuple(obj["terminals"]),
        assignment=assignment,
    )


# ---------------------------------------------------------------------------
# reduction instance generators

def _pair_vertex_names(terminals, n, with_hub):
    """Canonical vertex numbering for the pairwise gadgets."""
    names = {}
    counter = 0
    if with_hub:
        names[("hub",)] = 0
        counter = 1
    terms = sorted(terminals)
    for i, u in enumerate(terms):
        for w in terms[i + 1:]:
            for idx in range(n):
                names[("x", u, w, idx)] = counter
                counter += 1
            if with_hub:
                names[("l", u, w)] = counter
                counter += 1
            else:
                names[("y", u, w)] = counter
                names[("y", w, u)] = counter + 1
                counter += 2
    return names, counter


def or_disj_player_edges(player, own_strings, terminals, n, names):
    """Edges player contributes to the triangle/forest instance; depends on
    the player's own strings only."""
    edges = []
    for w in sorted(terminals):
        if w == player:
            continue
        bits = own_strings[w]
        lo, hi = min(player, w), max(player, w)
        mine = names[("y", player, w)]
        for i in range(n):
            if bits[i]:
                edges.append((names[("x", lo, hi, i)], mine))
        if player < w:
            edges.append((names[("y", player, w)], names[("y", w, player)]))
    return edges


def or_disj_instance(strings, terminals, n):
    """Pairwise-intersection gadgets: the union graph has a triangle iff
    some ordered pair's strings intersect; otherwise it is a forest.

    strings: {(u, w): n-bit tuple} over ordered terminal pairs.
    """
    terms = tuple(sorted(terminals))
    names, total = _pair_vertex_names(terms, n, with_hub=False)
    edges = []
    owners = []
    for u in terms:
        own = {w: strings[(u, w)] for w in terms if w != u}
        for e in or_disj_player_edges(u, own, terms, n, names):
            edges.append((min(e), max(e)))
            owners.append(u)
    return DistributedGraphInput(total, tuple(edges), "edge", terms,
                                 tuple(owners), names=names)


def and_disj_player_edges(player, own_strings, terminals, n, names):
    edges = []
    hub = names[("hub",)]
    for w in sorted(terminals):
        if w == player:
            continue
        bits = own_strings[w]
        lo, hi = min(player, w), max(player, w)
        for i in range(n):
            x = names[("x", lo, hi, i)]
            if player < w:
                if bits[i]:
                    edges.append((x, names[("l", lo, hi)]))
                else:
                    edges.append((x, hub))
            elif bits[i]:
                edges.append((x, hub))
    return edges


def and_disj_instance(strings, terminals, n):
    """Hub-and-spoke gadgets: the union graph is connected iff every
    unordered pair's strings intersect."""
    terms = tuple(sorted(terminals))
    names, total = _pair_vertex_names(terms, n, with_hub=True)
    edges = []
    owners = []
    for u in terms:
        own = {w: strings[(u, w)] for w in terms if w != u}
        for e in and_disj_player_edges(u, own, terms, n, names):
            edges.append((min(e), max(e)))
            owners.append(u)
    return DistributedGraphInput(total, tuple(edges), "edge", terms,
                                 tuple(owners), names=names)


def random_pair_strings(terminals, n, seed):
    rng = random.Random(seed)
    terms = sorted(terminals)
    return {(u, w): tuple(rng.randint(0, 1) for _ in range(n))
            for u in terms for w in terms if u != w}


# ---------------------------------------------------------------------------
# ground-truth graph oracles

def graph_oracles(num_vertices, edges, query):
    if query == "triangle":
        adj = [set() for _ in range(num_vertices)]
        for u, v in edges:
            adj[u].add(v)
            adj[v].add(u)
        return any(adj[u] & adj[v] for u, v in edges)
    if query in ("connected", "components", "acyclic"):
        parent = list(range(num_vertices))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for u, v in edges:
            ru, rv = find(u), find(v)
            if ru != rv:
                parent[ru] = rv
        comps = len({find(x) for x in range(num_vertices)})
        if query == "components":
            return comps
        if query == "connected":
            return comps <= 1
        return comps == num_vertices - len(edges)
    if query == "bipartite":
        color = {}
        adj = [[] for _ in range(num_vertices)]
        for u, v in edges:
            adj[u].append(v)
            adj[v].append(u)
        for s in range(num_vertices):
            if s in color:
                continue
            color[s] = 0
            stack = [s]
            while stack:
                x = stack.pop()
                for y in adj[x]:
                    if y not in color:
                        color[y] = color[x] ^ 1
                        stack.append(y)
                    elif color[y] == color[x]:
                        return False
        return True
    raise GraphError(f"unknown query {query!r}")


# ---------------------------------------------------------------------------
# edge -> node rebalance

def edge_to_node_rebalance(g, terminals, inp, seed):
    """Convert an edge distribution to a uniformly random node distribution,
    shipping adjacency entries as a bounded-demand routing."""
    if inp.mode != "edge":
        raise GraphError("input must be edge-distributed")
    terms = tuple(sorted(terminals))
    rng = random.Random(f"rebalance:{seed}")
    placement = {v: terms[rng.randrange(len(terms))]
                 for v in range(inp.num_vertices)}
    demand = {}
    for (u, v), owner in zip(inp.edges, inp.assignment):
        for endpoint in (u, v):
            dst = placement[endpoint]
            if dst != owner:
                demand[(owner, dst)] = demand.get((owner, dst), 0) + 1
    matrix = DemandMatrix(terms, demand)
    n_prime = max([1] + [matrix.row_sum(t) for t in terms]
                  + [matrix.col_sum(t) for t in terms])
    schedule = route_bounded_demand(g, terms, matrix, n_prime)
    node_input = DistributedGraphInput(
        inp.num_vertices, inp.edges, "node", terms, placement,
        names=inp.names)
    return node_input, schedule


# ---------------------------------------------------------------------------
# flooding BFS protocol family

VARIANTS = ("connectivity", "components", "acyclicity", "bipartiteness")


def _encode(value, width):
    return [(value >> i) & 1 for i in range(width)]


def _decode(bits):
    return sum(b << i for i, b in enumerate(bits))


def bfs_protocol(g, terminals, inp, variant, seed=0, balance_bound=None):
    """Flooding BFS over a node-distributed H, as a bit-level protocol.

    Token notifications are framed packets (start bit + target vertex +
    source vertex + parity) relayed along fixed shortest paths between
    terminals.  Rounds alternate fixed-length transport chunks with
    aggregation checkpoints up a spanning tree of the communication graph,
    scheduled at geometrically increasing chunk indices per flood (1, 2,
    4, ...).  A checkpoint aggregates (pending traffic, token count,
    duplicate-receipt flag, parity-conflict flag, minimum untokened
    vertex) and broadcasts continue / restart-at-vertex / final-answer.
    Components, acyclicity and bipartiteness restart the flood per
    component; connectivity needs a single flood.

    The first flood starts at vertex 0, whose owner is public knowledge
    (the vertex-to-terminal map is shared); restarts are elected through
    the checkpoint aggregation itself.
    """
    if variant not in VARIANTS:
        raise GraphError(f"unknown variant {variant!r}")
    if inp.mode != "node":
        raise GraphError("flooding needs a node-distributed input")
    terms = tuple(sorted(terminals))
    if inp.terminals != terms:
        raise GraphError("input terminals do not match")
    if not g.connected():
        raise GraphError("communication graph must be connected")
    if balance_bound is not None:
        skew = max(inp.sizes().values(), default=0)
        if skew > balance_bound:
            raise BalanceError(skew, balance_bound)

    n_h = inp.num_vertices
    placement = dict(inp.assignment)
    b_v = max(1, math.ceil(math.log2(max(n_h, 2))))
    b_c = max(1, math.ceil(math.log2(n_h + 1)))
    packet_bits = 2 * b_v + 1

    # fixed shortest-path next hops toward each terminal
    next_hop = {}
    for t in terms:
        parent, depth, _ = bfs_tree(g, t)
        for v in range(g.n):
            if v != t and v in parent:
                next_hop[(v, t)] = parent[v]  # (edge_id, toward-vertex)

    # spanning sync tree
    root = terms[0]
    s_parent, s_depth, s_children = bfs_tree(g, root)
    depth_max = max(s_depth.values())

    w_up = 1 + b_c + 1 + 1 + 1 + b_v          # pending,count,dup,par,has,min
    w_down = 2 + b_v + b_c                    # code, restart vertex, answer
    chunk_len = 2 * (packet_bits + 3)
    up_len = (depth_max + 1) * w_up
    down_start = up_len + 1
    sync_len = down_start + (depth_max + 1) * w_down + 1

    cap_base = 4 * inp.num_edges + 2 * n_h + 16
    max_rounds = (cap_base + 8) * (chunk_len + sync_len) + 64

    def initial_rep():
        return {"phase": "transport", "start": 1, "flood": 1, "chunk": 0,
                "next_cp": 1, "inject": 0, "answer": None}

    def init(v, _g, block):
        state = {
            "adj": dict(block) if block else {},
            "tokens": {},
            "dup": 0, "par": 0,
            "queues": {eid: [] for eid, _ in g.incidence[v]},
            "tx": {}, "rx": {},
            "upbuf": {}, "downbits": None,
            "rep": initial_rep(),
            "agg": None,
        }
        return state

    def owned_untokened(state):
        pending = [v for v in state["adj"] if v not in state["tokens"]]
        return min(pending) if pending else None

    def process_token(state, v_self, target, source, parity, injections):
        """Handle an arriving token at the owner; returns packets to emit."""
        tokens = state["tokens"]
        if target in tokens:
            state["dup"] = 1
            if tokens[target] != parity:
                state["par"] = 1
            return
        tokens[target] = parity
        for nb in state["adj"].get(target, ()):
            if source is not None and nb == source:
                continue
            injections.append((nb, target, parity ^ 1))

    def deliver_local(state, v_self, injections):
        """Process tokens owned locally; queue the rest as frames."""
        while injections:
            target, source, parity = injections.pop(0)
            owner = placement[target]
            if owner == v_self:
                process_token(state, v_self, target, source, parity,
                              injections)
            else:
                eid, _ = next_hop[(v_self, owner)]
                payload = (_encode(target, b_v) + _encode(source, b_v)
                           + [parity])
                state["queues"][eid].append(payload)

    def handle_packet(state, v_self, payload):
        target = _decode(payload[:b_v])
        source = _decode(payload[b_v:2 * b_v])
        parity = payload[2 * b_v]
        owner = placement[target]
        if owner == v_self:
            injections = []
            process_token(state, v_self, target, source, parity, injections)
            deliver_local(state, v_self, injections)
        else:
            eid, _ = next_hop[(v_self, owner)]
            state["queues"][eid].append(payload)

    def transport_round(state, v_self, r, inbox, sends):
        # receive side: continue or start frames
        for eid, _ in g.incidence[v_self]:
            bit = inbox.get(eid)
            if eid in state["rx"]:
                state["rx"][eid].append(bit if bit is not None else 0)
                if len(state["rx"][eid]) == packet_bits:
                    handle_packet(state, v_self, state["rx"].pop(eid))
            elif bit == 1:
                state["rx"][eid] = []
        # send side
        for eid, _ in g.incidence[v_self]:
            if eid in state["tx"]:
                frame, pos = state["tx"][eid]
                sends[eid] = frame[pos]
                if pos + 1 == len(frame):
                    del state["tx"][eid]
                else:
                    state["tx"][eid] = (frame, pos + 1)
            elif state["queues"][eid] and r + packet_bits + 2 <= chunk_len - 1:
                payload = state["queues"][eid].pop(0)
                sends[eid] = 1
                state["tx"][eid] = (payload, 0)

    def local_up_record(state):
        pending = int(any(state["queues"][eid] for eid in state["queues"])
                      or bool(state["tx"]) or bool(state["rx"]))
        count = len(state["tokens"])
        untok = owned_untokened(state)
        return {
            "pending": pending, "count": count,
            "dup": state["dup"], "par": state["par"],
            "has_untok": int(untok is not None),
            "untok": untok if untok is not None else 0,
        }

    def combine(rec_a, rec_b):
        out = {
            "pending": rec_a["pending"] | rec_b["pending"],
            "count": rec_a["count"] + rec_b["count"],
            "dup": rec_a["dup"] | rec_b["dup"],
            "par": rec_a["par"] | rec_b["par"],
        }
        if rec_a["has_untok"] and rec_b["has_untok"]:
            out["has_untok"] = 1
            out["untok"] = min(rec_a["untok"], rec_b["untok"])
        else:
            pick = rec_a if rec_a["has_untok"] else rec_b
            out["has_untok"] = pick["has_untok"]
            out["untok"] = pick["untok"]
        return out

    def encode_up(rec):
        return ([rec["pending"]] + _encode(rec["count"], b_c)
                + [rec["dup"], rec["par"], rec["has_untok"]]
                + _encode(rec["untok"], b_v))

    def decode_up(bits):
        return {
            "pending": bits[0],
            "count": _decode(bits[1:1 + b_c]),
            "dup": bits[1 + b_c],
            "par": bits[2 + b_c],
            "has_untok": bits[3 + b_c],
            "untok": _decode(bits[4 + b_c:4 + b_c + b_v]),
        }

    def decide(rep, rec):
        """Root's checkpoint decision: (code, restart_vertex, answer)."""
        if rec["pending"]:
            return 0, 0, 0
        if variant == "acyclicity" and rec["dup"]:
            return 2, 0, 0
        if variant == "bipartiteness" and rec["par"]:
            return 2, 0, 0
        if variant == "connectivity":
            return 2, 0, int(rec["count"] == n_h)
        if rec["has_untok"]:
            return 1, rec["untok"], 0
        if variant == "components":
            return 2, 0, rep["flood"]
        return 2, 0, 1  # acyclic / bipartite verdicts

    def sync_round(state, v_self, r, inbox, sends):
        rep = state["rep"]
        delta = s_depth[v_self]
        # collect children's up windows
        for eid, child in s_children[v_self]:
            child_win = (depth_max - s_depth[child]) * w_up
            j = r - 1 - child_win
            if 0 <= j < w_up:
                state["upbuf"].setdefault(child, []).append(
                    inbox.get(eid, 0))
        my_win = (depth_max - delta) * w_up
        if r == my_win:
            rec = local_up_record(state)
            for child_bits in state["upbuf"].values():
                rec = combine(rec, decode_up(child_bits))
            state["agg"] = rec
            state["upbuf"] = {}
        if my_win <= r < my_win + w_up and s_parent[v_self] is not None:
            eid, _ = s_parent[v_self]
            sends[eid] = encode_up(state["agg"])[r - my_win]
        # down phase
        my_down = down_start + delta * w_down
        if v_self == root and r == down_start:
            code, restart, answer = decide(rep, state["agg"])
            state["downbits"] = (_encode(code, 2) + _encode(restart, b_v)
                                 + _encode(answer, b_c))
        if s_parent[v_self] is not None:
            eid, _ = s_parent[v_self]
            j = r - 1 - (my_down - w_down)
            if 0 <= j < w_down:
                if state["downbits"] is None:
                    state["downbits"] = []
                state["downbits"].append(inbox.get(eid, 0))
        if state["downbits"] is not None and my_down <= r < my_down + w_down:
            for eid, child in s_children[v_self]:
                sends[eid] = state["downbits"][r - my_down]

    def apply_transition(state, rnd):
        """At the last round of a phase, set up the next phase (all nodes
        run this identically)."""
        rep = state["rep"]
        r = rnd - rep["start"]
        if rep["phase"] == "transport" and r == chunk_len - 1:
            rep["chunk"] += 1
            rep["inject"] = None
            if rep["chunk"] == rep["next_cp"]:
                rep["phase"] = "sync"
            rep["start"] = rnd + 1
            return None
        if rep["phase"] == "sync" and r == sync_len - 1:
            bits = state["downbits"]
            code = _decode(bits[0:2])
            restart = _decode(bits[2:2 + b_v])
            answer = _decode(bits[2 + b_v:2 + b_v + b_c])
            state["downbits"] = None
            state["agg"] = None
            if code == 0:
                rep["next_cp"] *= 2
                rep["phase"] = "transport"
                rep["start"] = rnd + 1
                return None
            if code == 1:
                rep["flood"] += 1
                rep["chunk"] = 0
                rep["next_cp"] = 1
                rep["inject"] = restart
                rep["phase"] = "transport"
                rep["start"] = rnd + 1
                return None
            rep["phase"] = "done"
            rep["answer"] = answer
            return answer
        return None

    term_set = set(terms)

    def step(v, rnd, state, inbox, pub):
        sends = {}
        out = None
        rep = state["rep"]
        if rep["phase"] == "done":
            return sends, state, None
        r = rnd - rep["start"]
        if rep["phase"] == "transport":
            if r == 0 and rep["inject"] is not None \
                    and placement[rep["inject"]] == v:
                injections = []
                process_token(state, v, rep["inject"], None, 0, injections)
                deliver_local(state, v, injections)
            transport_round(state, v, r, inbox, sends)
        elif rep["phase"] == "sync":
            if r == 0:
                # frame tails from the last chunk round may still arrive
                for eid, _ in g.incidence[v]:
                    if eid in state["rx"] and eid in inbox:
                        state["rx"][eid].append(inbox[eid])
                        if len(state["rx"][eid]) == packet_bits:
                            handle_packet(state, v, state["rx"].pop(eid))
            sync_round(state, v, r, inbox, sends)
        answer = apply_transition(state, rnd)
        if answer is not None and v in term_set:
            if variant == "components":
                out = answer
            elif variant == "connectivity":
                out = bool(answer)
            else:
                out = bool(answer)
        return sends, state, out

    if n_h == 0:
        trivial = {"connectivity": True, "components": 0,
                   "acyclicity": True, "bipartiteness": True}[variant]

        def step0(v, rnd, state, inbox, pub):
            return {}, state, (trivial if v in term_set else None)

        return ProtocolSpec(f"bfs-{variant}-empty", 2, init, step0,
                            meta={"variant": variant})

    return ProtocolSpec(
        name=f"bfs-{variant}",
        max_rounds=max_rounds,
        init=init,
        step=step,
        meta={"variant": variant, "chunk_len": chunk_len,
              "sync_len": sync_len, "packet_bits": packet_bits,
              "vertex_bits": b_v},
    )


def bfs_layer_demands(inp, start=0):
    """Analytic per-layer notification demands of the flood over H, as
    DemandMatrix-shaped dicts per BFS layer (used by the boundedness
    checks; independent of the protocol's transport machinery)."""
    adj = inp.adjacency()
    placement = dict(inp.assignment)
    dist = {start: 0}
    frontier = [start]
    layers = []
    while frontier:
        demand = {}
        nxt = []
        for v in frontier:
            for w in adj[v]:
                src, dst = placement[v], placement[w]
                if src != dst:
                    demand[(src, dst)] = demand.get((src, dst), 0) + 1
                if w not in dist:
                    dist[w] = dist[v] + 1
                    nxt.append(w)
        layers.append(demand)
        frontier = nxt
    return layers
