"""Delay-constrained multicommodity flow on timed graphs.

The central quantity is the least horizon tau at which the uniform
all-pairs demand (n'/k per ordered terminal pair) admits a fractional
congestion-1 routing in the tau-layer expansion.  Feasibility is decided
by an exact arc-based LP (HiGHS), with the solver tolerance recorded on
every produced schedule.

Also here: the two-stage router that handles every n'-bounded demand
within twice that horizon, the balanced-partition edge-disjoint path
extractor, and a small integral unit-demand router used by the bit-level
protocol builders.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .graphs import GraphError, UnreachableError
from .schedules import RoutingSchedule, ScheduleEntry
from .timed import TimedPath, build_timed_graph, _build_network, SearchLimitError

LP_TOLERANCE = 1e-6


class BoundedDemandError(ValueError):
    """A demand matrix violates its claimed n'-bound."""


class PartitionInfeasibleError(RuntimeError):
    """The balanced-partition flow fell short; carries the achieved value."""

    def __init__(self, achieved, required):
        super().__init__(f"partition flow {achieved} < required {required}")
        self.achieved = achieved
        self.required = required


@dataclass
class DemandMatrix:
    """Directed nonnegative demand over ordered terminal pairs."""

    terminals: tuple
    amounts: dict = field(default_factory=dict)

    def __post_init__(self):
        self.terminals = tuple(sorted(self.terminals))
        terms = set(self.terminals)
        clean = {}
        for (u, v), amt in sorted(self.amounts.items()):
            if u not in terms or v not in terms:
                raise BoundedDemandError(f"pair ({u},{v}) outside terminal set")
            if u == v and amt != 0:
                raise BoundedDemandError("diagonal demands must be zero")
            if amt < 0:
                raise BoundedDemandError("negative demand")
            if amt > 0:
                clean[(u, v)] = amt
        self.amounts = clean

    def amount(self, u, v):
        return self.amounts.get((u, v), 0)

    def row_sum(self, u):
        return sum(a for (x, _), a in self.amounts.items() if x == u)

    def col_sum(self, v):
        return sum(a for (_, y), a in self.amounts.items() if y == v)

    def is_bounded(self, n_prime):
        return all(self.row_sum(u) <= n_prime and self.col_sum(u) <= n_prime
                   for u in self.terminals)

    @property
    def total(self):
        return sum(self.amounts.values())


def uniform_demand(terminals, n_prime):
    k = len(terminals)
    per_pair = Fraction(n_prime) / k
    amounts = {(u, v): per_pair for u in terminals for v in terminals if u != v}
    return DemandMatrix(tuple(terminals), amounts)


# ---------------------------------------------------------------------------
# arc-based LP

def _solve_mcf(g, tau, demands_by_source):
    """Exact-feasibility multicommodity LP on the tau-layer expansion.

    demands_by_source: {source: {dest: amount}}.  Returns per-source arc
    flows ({source: {arc_key: amount}}) or None when infeasible.  Memory
    arcs are free in the objective, so idle commodities dwell in place.
    """
    tg = build_timed_graph(g, tau)
    arcs = tg.arcs
    n_arcs = len(arcs)
    sources = sorted(demands_by_source)
    n_src = len(sources)
    if n_src == 0:
        return {}
    if tau == 0:
        ok = all(u == v or amt == 0
                 for u, d in demands_by_source.items() for v, amt in d.items())
        return {u: {} for u in sources} if ok else None

    def var(si, ai):
        return si * n_arcs + ai

    node_of = {}
    rows, cols, vals, b_eq = [], [], [], []

    def row_id(si, v, layer):
        key = (si, v, layer)
        if key not in node_of:
            node_of[key] = len(b_eq)
            b_eq.append(0.0)
        return node_of[key]

    for si, src in enumerate(sources):
        for ai, (layer, eid, u, v) in enumerate(arcs):
            r_out = row_id(si, u, layer)
            rows.append(r_out); cols.append(var(si, ai)); vals.append(1.0)
            r_in = row_id(si, v, layer + 1)
            rows.append(r_in); cols.append(var(si, ai)); vals.append(-1.0)
        supply = sum(demands_by_source[src].values())
        b_eq[row_id(si, src, 0)] += float(supply)
        for dst, amt in demands_by_source[src].items():
            b_eq[row_id(si, dst, tau)] -= float(amt)
    a_eq = sparse.coo_matrix((vals, (rows, cols)),
                             shape=(len(b_eq), n_src * n_arcs))

    ub_rows, ub_cols, ub_vals = [], [], []
    nonmem = [ai for ai, a in enumerate(arcs) if a[1] is not None]
    for r, ai in enumerate(nonmem):
        for si in range(n_src):
            ub_rows.append(r); ub_cols.append(var(si, ai)); ub_vals.append(1.0)
    a_ub = sparse.coo_matrix((ub_vals, (ub_rows, ub_cols)),
                             shape=(len(nonmem), n_src * n_arcs))

    cost = np.zeros(n_src * n_arcs)
    for ai, a in enumerate(arcs):
        if a[1] is not None:
            for si in range(n_src):
                cost[var(si, ai)] = 1.0
    res = linprog(cost, A_ub=a_ub, b_ub=np.ones(len(nonmem)),
                  A_eq=a_eq, b_eq=np.array(b_eq), bounds=(0, None),
                  method="highs")
    if res.status != 0:
        return None
    out = {}
    for si, src in enumerate(sources):
        flows = {}
        for ai, key in enumerate(arcs):
            x = res.x[var(si, ai)]
            if x > LP_TOLERANCE / 10:
                flows[key] = x
        out[src] = flows
    return out


def mcf_feasible(g, demand, tau):
    """Whether a DemandMatrix routes fractionally at horizon tau."""
    by_source = {}
    for (u, v), amt in demand.amounts.items():
        by_source.setdefault(u, {})[v] = amt
    return _solve_mcf(g, tau, by_source) is not None


_TAU_MCF_CACHE = {}


def tau_mcf(g, terminals, n_prime):
    """Least tau at which the uniform n'/k all-pairs demand is routable.

    Monotone search (doubling then bisection) over exact LP feasibility.
    """
    if n_prime <= 0:
        raise GraphError("n_prime must be positive")
    terminals = tuple(sorted(terminals))
    if len(terminals) < 2:
        raise GraphError("need at least two terminals")
    key = (g, terminals, Fraction(n_prime).limit_denominator(10 ** 9))
    if key in _TAU_MCF_CACHE:
        return _TAU_MCF_CACHE[key]
    if not g.connected(terminals):
        raise UnreachableError("terminals are disconnected")
    demand = uniform_demand(terminals, n_prime)

    def feasible(tau):
        return mcf_feasible(g, demand, tau)

    lo = 1
    for a in terminals:
        dist = g.distances_from(a)
        lo = max(lo, max(dist[b] for b in terminals))
    hi = lo
    cutoff = (int(n_prime) + 1) * g.n * len(terminals) ** 2 + g.n
    while not feasible(hi):
        hi *= 2
        if hi > 2 * cutoff:
            raise SearchLimitError(f"tau_mcf exceeded cutoff {cutoff}")
    while lo < hi:
        mid = (lo + hi) // 2
        if feasible(mid):
            hi = mid
        else:
            lo = mid + 1
    _TAU_MCF_CACHE[key] = lo
    return lo


# ---------------------------------------------------------------------------
# flow decomposition (fractional, layered)

def _decompose_flows(g, tau, flows, source, eps=1e-9):
    """Split one source's arc-flow map into (TimedPath, amount) parcels."""
    residual = dict(flows)
    arcs_order = build_timed_graph(g, tau).arcs
    by_tail = {}
    for key in arcs_order:
        if key in residual:
            by_tail.setdefault((key[2], key[0]), []).append(key)
    parcels = []
    while True:
        # find a start arc out of (source, 0) with residual flow
        start = None
        for key in by_tail.get((source, 0), ()):
            if residual.get(key, 0) > eps:
                start = key
                break
        if start is None:
            break
        verts = [source]
        eids = []
        amount = float("inf")
        node, layer = source, 0
        keys_used = []
        while layer < tau:
            chosen = None
            for key in by_tail.get((node, layer), ()):
                if residual.get(key, 0) > eps:
                    chosen = key
                    break
            if chosen is None:
                raise AssertionError("fractional decomposition stalled")
            _, eid, _, head = chosen
            amount = min(amount, residual[chosen])
            keys_used.append(chosen)
            verts.append(head)
            eids.append(eid)
            node, layer = head, layer + 1
        for key in keys_used:
            residual[key] -= amount
        parcels.append((TimedPath(0, tuple(verts), tuple(eids)), amount))
    return parcels


def route_bounded_demand(g, terminals, demand, n_prime):
    """Route any n'-bounded demand in at most twice the uniform horizon.

    Two stages of the uniform-routing horizon tau* each: first every origin
    scatters its outgoing commodity evenly over all terminals (colored by
    final destination), then every terminal forwards each color to its
    destination.  The returned schedule carries end-to-end entries tagged
    by (origin, destination) commodity.
    """
    terminals = tuple(sorted(terminals))
    k = len(terminals)
    if not demand.is_bounded(n_prime):
        raise BoundedDemandError(f"demand is not {n_prime}-bounded")
    if demand.total == 0:
        return RoutingSchedule(0, (), congestion=1, tolerance=LP_TOLERANCE)
    tau_star = tau_mcf(g, terminals, n_prime)

    rows = {u: demand.row_sum(u) for u in terminals}
    stage1 = {u: {v: rows[u] / k for v in terminals}
              for u in terminals if rows[u] > 0}
    sol1 = _solve_mcf(g, tau_star, stage1)
    if sol1 is None:
        raise AssertionError("stage-1 routing infeasible at tau_mcf horizon")
    cols = {v: demand.col_sum(v) for v in terminals}
    stage2 = {v: {w: cols[w] / k for w in terminals if cols[w] > 0}
              for v in terminals}
    stage2 = {v: d for v, d in stage2.items() if d}
    sol2 = _solve_mcf(g, tau_star, stage2)
    if sol2 is None:
        raise AssertionError("stage-2 routing infeasible at tau_mcf horizon")

    eps = 1e-9
    # stage-1 parcels split by color (= final destination), grouped by the
    # junction terminal they land on
    inflow = {}  # (junction, color) -> list of (origin, path, amount)
    for u in stage1:
        for path, amt in _decompose_flows(g, tau_star, sol1[u], u):
            junction = path.verts[-1]
            for color in terminals:
                d_uc = demand.amount(u, color)
                if d_uc <= 0:
                    continue
                share = amt * d_uc / rows[u]
                if share > eps:
                    inflow.setdefault((junction, color), []).append(
                        (u, path, share))
    outflow = {}  # (junction, color) -> list of [path, amount]
    for v in stage2:
        for path, amt in _decompose_flows(g, tau_star, sol2[v], v):
            color = path.verts[-1]
            if amt > eps:
                outflow.setdefault((v, color), []).append([path, amt])
    entries = []
    for key in sorted(inflow):
        outs = outflow.get(key, [])
        oi = 0
        for origin, path1, amt in inflow[key]:
            remaining = amt
            while remaining > eps:
                if oi >= len(outs):
                    raise AssertionError(
                        f"junction {key} under-supplied by stage 2")
                path2, avail = outs[oi]
                take = min(remaining, avail)
                entries.append(ScheduleEntry(
                    (origin, path2.verts[-1]),
                    _concat_paths(path1, path2, tau_star),
                    take))
                remaining -= take
                outs[oi][1] -= take
                if outs[oi][1] <= eps:
                    oi += 1
    return RoutingSchedule(horizon=2 * tau_star, entries=tuple(entries),
                           congestion=1, tolerance=LP_TOLERANCE,
                           meta={"tau_mcf": tau_star})


def _concat_paths(path1, path2, offset):
    assert path1.verts[-1] == path2.verts[0]
    return TimedPath(path1.start,
                     path1.verts + path2.verts[1:],
                     path1.edge_ids + path2.edge_ids)


# ---------------------------------------------------------------------------
# balanced partition paths (integral, via super source/sink)

def balanced_partition_paths(g, tau, side_a, side_b, n_prime):
    """n'*|A| edge-disjoint timed paths from A x {0} to B x {tau}, with
    out-degree exactly n' per A-vertex and in-degree exactly n' per
    B-vertex.  Raises PartitionInfeasibleError (carrying the achieved flow)
    when the super-source/super-sink flow falls short."""
    side_a, side_b = sorted(side_a), sorted(side_b)
    if len(side_a) != len(side_b) or not side_a:
        raise GraphError("sides must be nonempty and balanced")
    if set(side_a) & set(side_b):
        raise GraphError("sides overlap")
    tg = build_timed_graph(g, tau)
    net, meta = _build_network(tg, extra_nodes=2)
    base_nodes = tg.node_count
    s, t = base_nodes, base_nodes + 1
    source_arcs = {}
    for u in side_a:
        source_arcs[net.add_edge(s, tg.node(u, 0), n_prime)] = u
    sink_arcs = {}
    for v in side_b:
        sink_arcs[net.add_edge(tg.node(v, tau), t, n_prime)] = v
    required = n_prime * len(side_a)
    value = net.max_flow(s, t)
    if value < required:
        raise PartitionInfeasibleError(value, required)
    arc_by_id = {aid: info for aid, info in meta}
    paths = []
    for aid, u in source_arcs.items():
        for _ in range(net.flow_on(aid)):
            node = tg.node(u, 0)
            verts = [u]
            eids = []
            while node // g.n < tau:
                for a2 in net.head[node]:
                    if a2 % 2 == 1 or a2 not in arc_by_id:
                        continue
                    if net.flow_on(a2) <= 0:
                        continue
                    _, eid, _, head = arc_by_id[a2]
                    net.cap[a2 ^ 1] -= 1
                    net.cap[a2] += 1
                    verts.append(head)
                    eids.append(eid)
                    node = net.to[a2]
                    break
                else:
                    raise AssertionError("partition decomposition stalled")
            paths.append(TimedPath(0, tuple(verts), tuple(eids)))
    return paths


# ---------------------------------------------------------------------------
# integral unit-demand router (for bit protocols)

def route_unit_demands(g, units, horizon):
    """Route unit (src, dst) demands as edge-disjoint timed paths within
    `horizon` layers, or return None.

    Greedy sequential BFS with a few deterministic orderings; memory steps
    are free.  Exact enough at desk scale; callers escalate the horizon on
    failure.
    """
    if not units:
        return []
    dists = {}
    for idx, (src, dst) in enumerate(units):
        if src not in dists:
            dists[src] = g.distances_from(src)
        if dists[src][dst] is None:
            return None
        if dists[src][dst] > horizon:
            return None
    orderings = [
        sorted(range(len(units)),
               key=lambda i: (-dists[units[i][0]][units[i][1]], i)),
        sorted(range(len(units)),
               key=lambda i: (dists[units[i][0]][units[i][1]], i)),
        list(range(len(units))),
    ]
    for order in orderings:
        result = _route_greedy(g, units, horizon, order)
        if result is not None:
            return result
    return None


def _route_greedy(g, units, horizon, order):
    used = set()
    routed = [None] * len(units)
    for idx in order:
        src, dst = units[idx]
        path = _bfs_timed(g, src, dst, horizon, used)
        if path is None:
            return None
        for key in path.steps():
            if key[1] is not None:
                used.add(key)
        routed[idx] = path
    return routed


def _bfs_timed(g, src, dst, horizon, used):
    """Residual timed path minimizing edge crossings (0-1 BFS: memory
    steps are free), so units dwell instead of burning spare arcs."""
    from collections import deque

    if horizon == 0:
        return TimedPath(0, (src,), ()) if src == dst else None
    start = (src, 0)
    target = (dst, horizon)
    parent = {start: None}
    dist = {start: 0}
    queue = deque([start])
    while queue:
        state = queue.popleft()
        if state == target:
            break
        v, layer = state
        if layer == horizon:
            continue
        mem_state = (v, layer + 1)
        if mem_state not in dist or dist[mem_state] > dist[state]:
            dist[mem_state] = dist[state]
            parent[mem_state] = (v, layer, None)
            queue.appendleft(mem_state)
        for eid, w in g.incidence[v]:
            key = (layer, eid, v, w)
            if key in used:
                continue
            nxt = (w, layer + 1)
            if nxt not in dist or dist[nxt] > dist[state] + 1:
                dist[nxt] = dist[state] + 1
                parent[nxt] = (v, layer, eid)
                queue.append(nxt)
    if target not in parent:
        return None
    verts = [dst]
    eids = []
    state = target
    while parent[state] is not None:
        v, layer, eid = parent[state]
        verts.append(v)
        eids.append(eid)
        state = (v, layer)
    verts.reverse()
    eids.reverse()
    return TimedPath(0, tuple(verts), tuple(eids))
