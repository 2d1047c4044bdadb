"""Concrete protocols: Steiner-tree aggregation and compiled circuits.

Aggregation handles any outer function composed with per-coordinate
symmetric inner functions: coordinate blocks are pipelined up each packed
tree as bit-serial partial one-counts (low bit first, one-round latency
per hop), the common root finishes the computation, and the answer floods
back down.  The compiler maps circuit gates to random terminals (load
balanced by rejection resampling) and ships each level's wire values with
the integral timed-graph router, one window of rounds per level.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from .graphs import GraphError, bfs_tree
from .mcf import DemandMatrix, route_unit_demands, tau_mcf
from .sim import ContractViolation, ProtocolSpec


class CompileError(RuntimeError):
    """Gate placement or level routing could not be completed."""


# ---------------------------------------------------------------------------
# composed functions and reference oracles

@dataclass(frozen=True)
class ComposedFunction:
    """outer(inner_1(count_1), ..., inner_n(count_n)) where count_i is the
    number of ones among the terminals' i-th bits and each inner function
    is a (k+1)-entry count table."""

    n: int
    k: int
    outer: object
    tables: tuple

    def __post_init__(self):
        if len(self.tables) != self.n:
            raise GraphError("need one count table per coordinate")
        for t in self.tables:
            if len(t) != self.k + 1:
                raise GraphError("count tables need k+1 entries")

    def evaluate(self, inputs_by_terminal):
        xs = [inputs_by_terminal[t] for t in sorted(inputs_by_terminal)]
        if len(xs) != self.k or any(len(x) != self.n for x in xs):
            raise GraphError("input shape mismatch")
        inner = tuple(self.tables[i][sum(x[i] for x in xs)]
                      for i in range(self.n))
        return int(self.outer(inner))


def disjointness_function(k, n):
    """Output 1 iff some coordinate is held by every terminal."""
    table = tuple([0] * k + [1])
    return ComposedFunction(n, k, lambda bits: int(any(bits)), (table,) * n)


def parity_of_majorities(k, n):
    table = tuple(int(c > k / 2) for c in range(k + 1))
    return ComposedFunction(n, k, lambda bits: sum(bits) % 2, (table,) * n)


def all_unique_marks(k, n):
    """1 iff every coordinate is held by exactly one terminal."""
    table = tuple(int(c == 1) for c in range(k + 1))
    return ComposedFunction(n, k, lambda bits: int(all(bits)), (table,) * n)


def disj_oracle(xs):
    n = len(xs[0])
    return int(any(all(x[i] for x in xs) for i in range(n)))


def ed_oracle(xs):
    return int(len({tuple(x) for x in xs}) == len(xs))


def _pairwise(strings, combine):
    players = sorted({u for u, _ in strings})
    vals = []
    for i, u in enumerate(players):
        for w in players[i + 1:]:
            x, y = strings[(u, w)], strings[(w, u)]
            vals.append(int(any(a and b for a, b in zip(x, y))))
    return combine(vals)


def or_disj_oracle(strings):
    return _pairwise(strings, lambda vs: int(any(vs)))


def and_disj_oracle(strings):
    return _pairwise(strings, lambda vs: int(all(vs)))


def reference_oracles(name):
    table = {"DISJ": disj_oracle, "ED": ed_oracle,
             "OR-DISJ": or_disj_oracle, "AND-DISJ": and_disj_oracle}
    if name not in table:
        raise GraphError(f"unknown oracle {name!r}")
    return table[name]


# ---------------------------------------------------------------------------
# Steiner aggregation

def steiner_aggregate_protocol(g, terminals, packing, func):
    """Protocol computing a ComposedFunction over an integral tree packing.

    Coordinates split evenly over the trees (ceil(n/T) per tree); each
    tree pipelines per-coordinate one-counts of its non-root terminals to
    the shared root (bit-serial, ceil(log2 k) bits per coordinate), the
    root applies the inner tables and the outer function, and the answer
    is broadcast down the first tree.  Data rounds stay within
    m * ceil(log2 k) + diameter; broadcast rounds are reported separately
    in meta.
    """
    terms = tuple(sorted(terminals))
    k = len(terms)
    if func.k != k:
        raise GraphError("function arity does not match terminal count")
    trees = [tree for tree, w in packing.trees]
    if not trees:
        raise GraphError("empty packing")
    if any(w != 1 for _, w in packing.trees):
        raise GraphError("aggregation needs an integral packing")
    root = terms[0]
    n = func.n
    m = math.ceil(n / len(trees)) if n else 0
    bits_per = max(1, math.ceil(math.log2(k)))

    plans = []
    for j, tree in enumerate(trees):
        lo = j * m
        hi = min((j + 1) * m, n)
        parent, depth, children = bfs_tree(g, root, tree.edge_ids)
        height = {}
        for v in sorted(depth, key=lambda x: -depth[x]):
            kids = [w for _, w in children[v]]
            height[v] = 1 + max((height[w] for w in kids), default=-1)
        start = {v: height[v] + 1 for v in parent}
        plans.append({
            "coords": range(lo, hi),
            "parent": parent,
            "children": children,
            "start": start,
        })
    data_rounds = 0
    for plan in plans:
        width = len(plan["coords"]) * bits_per
        if width == 0:
            continue
        for _, child in plan["children"][root]:
            data_rounds = max(data_rounds, plan["start"][child] + width - 1)
    parent0, depth0, children0 = bfs_tree(g, root, trees[0].edge_ids)
    bcast_rounds = max((depth0[t] for t in terms), default=0)
    term_index = {t: i for i, t in enumerate(terms)}

    def init(v, _g, block):
        return {"in": block, "buf": {}, "carry": {}, "bcast": None}

    def step(v, rnd, state, inbox, pub):
        sends = {}
        out = None
        # absorb stream bits from children, per tree
        for j, plan in enumerate(plans):
            if v not in plan["parent"]:
                continue
            for eid, child in plan["children"][v]:
                q = rnd - 1 - plan["start"].get(child, 10 ** 9)
                width = len(plan["coords"]) * bits_per
                if 0 <= q < width and eid in inbox:
                    state["buf"].setdefault((j, child), {})[q] = inbox[eid]
        # emit own aggregated stream positions
        for j, plan in enumerate(plans):
            if v == root or v not in plan["parent"]:
                continue
            width = len(plan["coords"]) * bits_per
            q = rnd - plan["start"][v]
            if 0 <= q < width:
                coord = plan["coords"][q // bits_per]
                bitpos = q % bits_per
                total = state["carry"].get(j, 0)
                if bitpos == 0:
                    if total:
                        raise ContractViolation("carry persisted across coords")
                    if v in term_index and state["in"] is not None:
                        total += state["in"][coord]
                for _, child in plan["children"][v]:
                    total += state["buf"].get((j, child), {}).get(q, 0)
                eid, _ = plan["parent"][v]
                sends[eid] = total & 1
                state["carry"][j] = total >> 1
        # the root finishes the data phase, computes, and starts broadcast
        if rnd == data_rounds + 1:
            if v == root:
                inner = []
                for j, plan in enumerate(plans):
                    for ci, coord in enumerate(plan["coords"]):
                        count = state["in"][coord] if state["in"] is not None else 0
                        for _, child in plan["children"][root]:
                            buf = state["buf"].get((j, child), {})
                            for bp in range(bits_per):
                                count += buf.get(ci * bits_per + bp, 0) << bp
                        inner.append((coord, func.tables[coord][count]))
                inner.sort()
                answer = int(func.outer(tuple(bit for _, bit in inner)))
                state["bcast"] = answer
                out = answer
        # broadcast relay down the first tree
        if state["bcast"] is None and v in depth0 and depth0[v] > 0:
            expect = data_rounds + depth0[v]
            if rnd == expect + 1:
                eid, _ = parent0[v]
                if eid not in inbox:
                    raise ContractViolation(
                        f"broadcast bit missing at vertex {v} round {rnd}")
                state["bcast"] = inbox[eid]
                if v in term_index:
                    out = state["bcast"]
        if state["bcast"] is not None and v in children0:
            for eid, child in children0[v]:
                if rnd == data_rounds + depth0[v] + 1:
                    sends[eid] = state["bcast"]
        return sends, state, out

    return ProtocolSpec(
        name=f"aggregate-{func.n}x{func.k}",
        max_rounds=data_rounds + bcast_rounds + 2,
        init=init,
        step=step,
        meta={"data_rounds": data_rounds, "broadcast_rounds": bcast_rounds,
              "block_size": m, "bits_per_coordinate": bits_per,
              "trees": len(trees), "delta": max(t.diameter for t in trees),
              "round_bound": m * bits_per + max(t.diameter for t in trees)},
    )


# ---------------------------------------------------------------------------
# circuit compilation

def default_input_layout(terminals, n):
    terms = sorted(terminals)
    return {t: tuple(range(i * n, (i + 1) * n)) for i, t in enumerate(terms)}


def _assign_gates(circuit, terms, seed, budget=64):
    """Random gate->terminal map, resampled until every level's
    gates-plus-inputs load stays within the explicit threshold."""
    k = len(terms)
    d = max(1, circuit.depth)
    s = max(1, circuit.wire_count)
    sizes = circuit.level_sizes
    log_term = math.ceil(math.log(2 * k * d * s))
    thresholds = [3 * max(math.ceil(sz / k) * log_term, 1) for sz in sizes]
    rng = random.Random(f"assign:{seed}")
    worst = None
    for attempt in range(budget):
        assignment = [tuple(terms[rng.randrange(k)] for _ in range(sz))
                      for sz in sizes]
        ok = True
        observed = 0
        for li, level in enumerate(circuit.levels):
            loads = {t: 0 for t in terms}
            for pos, gate in enumerate(level):
                loads[assignment[li][pos]] += 1
                for a in gate.args:
                    loads[assignment[li - 1][a]] += 1
            peak = max(loads.values())
            observed = max(observed, peak)
            if peak > thresholds[li]:
                ok = False
                break
        worst = observed if worst is None else min(worst, observed)
        if ok:
            return assignment, thresholds
    raise CompileError(
        f"no balanced gate assignment in {budget} resamples "
        f"(best observed peak load {worst})")


def compile_circuit(g, terminals, circuit, seed, input_layout=None,
                    output_pos=0):
    """Compile a leveled circuit into a synchronous protocol.

    Gates are mapped to terminals at random (load-balanced by rejection);
    per level, the wire values cross the network as an integral routing of
    unit demands inside a dedicated window of rounds, starting from the
    bounded-demand horizon 2*tau_mcf and escalating one round at a time if
    the integral router needs slack.  The final gate's owner broadcasts the
    answer over a spanning tree.
    """
    terms = tuple(sorted(terminals))
    n = circuit.n
    if circuit.k != len(terms):
        raise GraphError("circuit terminal arity mismatch")
    if input_layout is None:
        input_layout = default_input_layout(terms, n)
    held = sorted(j for bits in input_layout.values() for j in bits)
    if held != list(range(n * len(terms))):
        raise GraphError("input layout must cover each input bit exactly once")
    holder = {}
    for t, bits in input_layout.items():
        for j in bits:
            holder[j] = t
    assignment, thresholds = _assign_gates(circuit, terms, seed)

    # per-level unit demands
    level_units = []
    for li, level in enumerate(circuit.levels):
        units = []
        if li == 0:
            for pos in range(len(level)):
                src, dst = holder[pos], assignment[0][pos]
                if src != dst:
                    units.append((src, dst, ("wire", 0, pos, -1)))
        else:
            for pos, gate in enumerate(level):
                for ai, a in enumerate(gate.args):
                    src = assignment[li - 1][a]
                    dst = assignment[li][pos]
                    if src != dst:
                        units.append((src, dst, ("wire", li, pos, ai)))
        level_units.append(units)

    # route each level inside its own window
    windows = []
    send_plan = {}   # (round, vertex) -> list of (edge_id, token)
    recv_plan = {}   # (round, vertex, edge_id) -> token
    offset = 0
    bounds = []
    for li, units in enumerate(level_units):
        if not units:
            windows.append(0)
            bounds.append(0)
            continue
        pairs = [(s, t) for s, t, _ in units]
        loads_out = {}
        loads_in = {}
        for s, t in pairs:
            loads_out[s] = loads_out.get(s, 0) + 1
            loads_in[t] = loads_in.get(t, 0) + 1
        n_prime = max(max(loads_out.values()), max(loads_in.values()))
        horizon = 2 * tau_mcf(g, terms, n_prime)
        cap = horizon + 4 * g.n + 8
        routed = None
        while routed is None:
            routed = route_unit_demands(g, pairs, horizon)
            if routed is None:
                horizon += 1
                if horizon > cap:
                    raise CompileError(
                        f"level {li} routing found no horizon <= {cap}")
        windows.append(horizon)
        bounds.append(2 * tau_mcf(g, terms, 3 * thresholds[li]))
        for (src, dst, token), path in zip(units, routed):
            first = True
            for layer, eid, uu, vv in path.steps():
                if eid is None:
                    continue
                rnd = offset + layer + 1
                send_plan.setdefault((rnd, uu), []).append((eid, token, first))
                recv_plan[(rnd + 1, vv, eid)] = token
                first = False
        offset += horizon
    eval_round = []
    t_cursor = 0
    for li in range(len(circuit.levels)):
        t_cursor += windows[li]
        eval_round.append(t_cursor + 1)
    answer_round = eval_round[-1]

    owner = assignment[-1][output_pos]
    parent_b, depth_b, children_b = bfs_tree(g, owner)
    for t in terms:
        if t not in depth_b:
            raise GraphError("terminals are disconnected")
    bcast_depth = max(depth_b[t] for t in terms)
    max_rounds = answer_round + bcast_depth + 2

    owned_level = {}
    for li, level in enumerate(circuit.levels):
        for pos in range(len(level)):
            owned_level.setdefault((assignment[li][pos], li), []).append(pos)
    evals_at = {}
    for li in range(1, len(circuit.levels)):
        evals_at.setdefault(eval_round[li], []).append(li)

    term_set = set(terms)

    def init(v, _g, block):
        values = {}
        if v in input_layout and block is not None:
            for idx, j in enumerate(input_layout[v]):
                values[("bit", j)] = block[idx]
        return {"vals": values, "ans": None}

    def value_of(state, li, pos):
        if li == 0:
            key = ("wire", 0, pos, -1)
            if key in state["vals"]:
                return state["vals"][key]
            return state["vals"][("bit", pos)]
        return state["vals"][("gate", li, pos)]

    def step(v, rnd, state, inbox, pub):
        sends = {}
        out = None
        for eid, bit in inbox.items():
            token = recv_plan.get((rnd, v, eid))
            if token is not None:
                state["vals"][token] = bit
            elif state["ans"] is None and rnd > answer_round:
                state["ans"] = bit
                if v in term_set:
                    out = bit
        # evaluate levels whose routing window has closed
        for li in evals_at.get(rnd, ()):
            level = circuit.levels[li]
            for pos in owned_level.get((v, li), ()):
                gate = level[pos]
                args = []
                for ai, a in enumerate(gate.args):
                    key = ("wire", li, pos, ai)
                    if key in state["vals"]:
                        args.append(state["vals"][key])
                    else:
                        args.append(value_of(state, li - 1, a))
                if gate.kind == "AND":
                    val = args[0] & args[1]
                elif gate.kind == "OR":
                    val = args[0] | args[1]
                elif gate.kind == "NOT":
                    val = args[0] ^ 1
                else:
                    val = args[0]
                state["vals"][("gate", li, pos)] = val
        if rnd == answer_round and v == owner:
            state["ans"] = value_of(state, circuit.depth, output_pos)
            if v in term_set:
                out = state["ans"]
        for eid, token, origin in send_plan.get((rnd, v), ()):
            if origin:
                _, tli, tpos, tai = token
                if tli == 0:
                    bit = value_of(state, 0, tpos)
                else:
                    src_gate = circuit.levels[tli][tpos].args[tai]
                    bit = value_of(state, tli - 1, src_gate)
            else:
                bit = state["vals"].get(token)
            if bit is None:
                raise ContractViolation(
                    f"vertex {v} must forward {token} before holding it")
            sends[eid] = bit
        if state["ans"] is not None and v in depth_b:
            if rnd == answer_round + depth_b[v]:
                for eid, child in children_b[v]:
                    sends[eid] = state["ans"]
        return sends, state, out

    data_rounds = sum(windows)
    return ProtocolSpec(
        name=f"compiled-{circuit.depth}x{circuit.wire_count}",
        max_rounds=max_rounds,
        init=init,
        step=step,
        meta={"windows": tuple(windows), "window_bounds": tuple(bounds),
              "thresholds": tuple(thresholds), "data_rounds": data_rounds,
              "broadcast_rounds": bcast_depth, "answer_round": answer_round,
              "assignment": tuple(tuple(row) for row in assignment),
              "output_owner": owner},
    )


# ---------------------------------------------------------------------------
# hashing reduction for duplicate detection

@dataclass(frozen=True)
class HashReduction:
    hashes: tuple
    bits_per_hash: int
    trials: int
    family: str

    def bitstrings(self):
        out = []
        for row in self.hashes:
            bits = []
            for h in row:
                bits.extend((h >> i) & 1 for i in range(self.bits_per_hash))
            out.append(tuple(bits))
        return tuple(out)


def _to_int(x):
    if isinstance(x, int):
        return x
    return sum(bit << i for i, bit in enumerate(x))


def ed_hash_reduce(inputs, seed, n_bits=None, trials=None):
    """Compress k inputs to tuples of short pairwise-independent hashes.

    Multiply-shift family over 2w-bit words (w = input width): hash_j(x) =
    ((a_j x + b_j) mod 2^{2w}) >> (2w - bits), bits = 2 ceil(log2 k) + 2,
    repeated ceil(log2(3 k^2)) independent times (override with `trials`;
    one trial already keeps the union-bound collision chance under 1/8).
    Equal inputs always collide on every trial; an unequal pair survives a
    single trial with probability at most 1/(4 k^2).
    """
    k = len(inputs)
    if k < 2:
        raise GraphError("need at least two inputs")
    values = [_to_int(x) for x in inputs]
    if n_bits is None:
        n_bits = max(1, max(values).bit_length())
    bits = 2 * max(1, math.ceil(math.log2(k))) + 2
    if trials is None:
        trials = max(1, math.ceil(math.log2(3 * k * k)))
    width = 2 * max(n_bits, bits)
    mask = (1 << width) - 1
    rng = random.Random(f"edhash:{seed}")
    rows = [[] for _ in range(k)]
    for j in range(trials):
        a = rng.randrange(1, 1 << width) | 1
        b = rng.randrange(0, 1 << width)
        for i, x in enumerate(values):
            rows[i].append(((a * x + b) & mask) >> (width - bits))
    return HashReduction(tuple(tuple(r) for r in rows), bits, trials,
                         family=f"multiply-shift-{width}bit:{seed}")
