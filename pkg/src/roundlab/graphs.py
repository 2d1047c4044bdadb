"""Undirected multigraphs with designated terminal sets.

Vertices are integers 0..n-1.  Parallel edges are allowed and carry
independent capacity (one bit per direction per round); self-loops are not.
Every graph designates a set of terminals holding inputs in the
communication problems built on top of it.
"""

from __future__ import annotations

import json
import random
from collections import deque
from dataclasses import dataclass
from functools import cached_property


class GraphError(ValueError):
    """Raised on malformed graph data."""


class UnreachableError(RuntimeError):
    """Raised when a routing query involves disconnected endpoints."""


@dataclass(frozen=True)
class Graph:
    """Immutable undirected multigraph with terminals.

    `edges` is a tuple of (u, v) pairs with u < v; the index of an edge in
    this tuple is its identity (parallel edges are distinct entries).
    """

    n: int
    edges: tuple
    terminals: tuple

    def __post_init__(self):
        if self.n <= 0:
            raise GraphError("graph needs at least one vertex")
        norm = []
        for e in self.edges:
            u, v = e
            if u == v:
                raise GraphError(f"self-loop at vertex {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise GraphError(f"edge {e} out of range for n={self.n}")
            norm.append((min(u, v), max(u, v)))
        object.__setattr__(self, "edges", tuple(norm))
        terms = tuple(sorted(self.terminals))
        if not terms:
            raise GraphError("terminal set must be nonempty")
        if len(set(terms)) != len(terms):
            raise GraphError("duplicate terminals")
        if not (0 <= terms[0] and terms[-1] < self.n):
            raise GraphError("terminal out of range")
        object.__setattr__(self, "terminals", terms)

    @property
    def m(self):
        return len(self.edges)

    @property
    def k(self):
        return len(self.terminals)

    @cached_property
    def incidence(self):
        """Per vertex: tuple of (edge_id, other_endpoint), in edge-id order."""
        inc = [[] for _ in range(self.n)]
        for eid, (u, v) in enumerate(self.edges):
            inc[u].append((eid, v))
            inc[v].append((eid, u))
        return tuple(tuple(entries) for entries in inc)

    def degree(self, v):
        return len(self.incidence[v])

    def neighbors(self, v):
        return tuple(w for _, w in self.incidence[v])

    def with_edges(self, edge_ids):
        """Subgraph on the same vertex set keeping only the given edge ids.

        Edge identities are renumbered; the returned mapping sends new edge
        ids back to ids in this graph.
        """
        ids = sorted(edge_ids)
        sub = Graph(self.n, tuple(self.edges[i] for i in ids), self.terminals)
        back = {new: old for new, old in enumerate(ids)}
        return sub, back

    def distances_from(self, source, edge_ids=None):
        """BFS hop distances; unreachable vertices get None."""
        allowed = None if edge_ids is None else set(edge_ids)
        dist = [None] * self.n
        dist[source] = 0
        q = deque([source])
        while q:
            u = q.popleft()
            for eid, w in self.incidence[u]:
                if allowed is not None and eid not in allowed:
                    continue
                if dist[w] is None:
                    dist[w] = dist[u] + 1
                    q.append(w)
        return dist

    def dist(self, u, v):
        d = self.distances_from(u)[v]
        if d is None:
            raise UnreachableError(f"vertices {u} and {v} are disconnected")
        return d

    def connected(self, vertices=None):
        """True if the given vertices (default: all) lie in one component."""
        targets = range(self.n) if vertices is None else list(vertices)
        if not targets:
            return True
        dist = self.distances_from(targets[0])
        return all(dist[v] is not None for v in targets)

    def terminal_diameter(self):
        best = 0
        for a in self.terminals:
            dist = self.distances_from(a)
            for b in self.terminals:
                if dist[b] is None:
                    raise UnreachableError("terminals are disconnected")
                best = max(best, dist[b])
        return best

    def diameter(self):
        best = 0
        for v in range(self.n):
            dist = self.distances_from(v)
            for d in dist:
                if d is None:
                    raise UnreachableError("graph is disconnected")
                best = max(best, d)
        return best


def bfs_tree(g, root, edge_ids=None):
    """BFS tree as (parent, depth, children); parent[v] = (edge_id, parent
    vertex), None at the root.  Restricted to `edge_ids` when given."""
    allowed = None if edge_ids is None else set(edge_ids)
    parent = {root: None}
    depth = {root: 0}
    children = {root: []}
    q = deque([root])
    while q:
        u = q.popleft()
        for eid, w in g.incidence[u]:
            if allowed is not None and eid not in allowed:
                continue
            if w not in parent:
                parent[w] = (eid, u)
                depth[w] = depth[u] + 1
                children[w] = []
                children[u].append((eid, w))
                q.append(w)
    return parent, depth, children


def contract_sides(g, side_a, side_b):
    """Identify the vertices of `side_a` and of `side_b` into fresh vertices.

    Both sides must be disjoint nonempty subsets of the terminals.  Edges
    internal to a side vanish (they become self-loops); parallel edges are
    preserved.  The returned graph's terminals are exactly (v_A, v_B), in
    that order of identity: v_A = n' - 2, v_B = n' - 1.
    """
    sa, sb = set(side_a), set(side_b)
    if not sa or not sb:
        raise GraphError("contraction sides must be nonempty")
    if sa & sb:
        raise GraphError("contraction sides overlap")
    terms = set(g.terminals)
    if not (sa <= terms and sb <= terms):
        raise GraphError("contraction sides must be subsets of the terminals")
    keep = [v for v in range(g.n) if v not in sa and v not in sb]
    remap = {v: i for i, v in enumerate(keep)}
    v_a = len(keep)
    v_b = len(keep) + 1
    for v in sa:
        remap[v] = v_a
    for v in sb:
        remap[v] = v_b
    new_edges = []
    for u, v in g.edges:
        nu, nv = remap[u], remap[v]
        if nu != nv:
            new_edges.append((nu, nv))
    return Graph(len(keep) + 2, tuple(new_edges), (v_a, v_b))


# ---------------------------------------------------------------------------
# constructors

def path_graph(length, terminals=None):
    """Simple path with `length` edges; default terminals are its endpoints."""
    if length < 1:
        raise GraphError("path needs at least one edge")
    edges = tuple((i, i + 1) for i in range(length))
    return Graph(length + 1, edges, terminals or (0, length))

def cycle_graph(n, terminals=None):
    if n < 3:
        raise GraphError("cycle needs at least 3 vertices")
    edges = tuple((i, (i + 1) % n) for i in range(n))
    return Graph(n, edges, terminals or tuple(range(n)))

def clique(k, terminals=None):
    edges = tuple((i, j) for i in range(k) for j in range(i + 1, k))
    return Graph(k, edges, terminals or tuple(range(k)))

def star_graph(leaves, terminals=None):
    edges = tuple((0, i) for i in range(1, leaves + 1))
    return Graph(leaves + 1, edges, terminals or tuple(range(1, leaves + 1)))

def parallel_edges(count, terminals=None):
    """Two vertices joined by `count` parallel edges."""
    if count < 1:
        raise GraphError("need at least one edge")
    return Graph(2, tuple((0, 1) for _ in range(count)), terminals or (0, 1))

def grid_graph(rows, cols, terminals=None):
    """rows x cols grid; default terminals are the four corners."""
    def vid(r, c):
        return r * cols + c
    edges = []
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                edges.append((vid(r, c), vid(r, c + 1)))
            if r + 1 < rows:
                edges.append((vid(r, c), vid(r + 1, c)))
    if terminals is None:
        terminals = tuple(sorted({vid(0, 0), vid(0, cols - 1),
                                  vid(rows - 1, 0), vid(rows - 1, cols - 1)}))
    return Graph(rows * cols, tuple(edges), terminals)

def ring_of_cliques(num_cliques, clique_size, terminals=None):
    """`num_cliques` cliques arranged in a ring, consecutive ones bridged.

    Default terminals: the first vertex of each clique.
    """
    if num_cliques < 3 or clique_size < 2:
        raise GraphError("need >=3 cliques of size >=2")
    edges = []
    for c in range(num_cliques):
        base = c * clique_size
        for i in range(clique_size):
            for j in range(i + 1, clique_size):
                edges.append((base + i, base + j))
        nxt = ((c + 1) % num_cliques) * clique_size
        edges.append((base + clique_size - 1, nxt))
    if terminals is None:
        terminals = tuple(c * clique_size for c in range(num_cliques))
    return Graph(num_cliques * clique_size, tuple(edges), terminals)

def intro_split_graph(num_paths=4, path_length=4):
    """One direct a-b edge plus `num_paths` disjoint a-b paths of given length."""
    a, b = 0, 1
    edges = [(a, b)]
    n = 2
    for _ in range(num_paths):
        prev = a
        for step in range(path_length - 1):
            edges.append((prev, n))
            prev = n
            n += 1
        edges.append((prev, b))
    return Graph(n, tuple(edges), (a, b))

def random_connected_graph(n, extra_edges, seed, k=2, allow_parallel=False):
    """Random connected multigraph: a random spanning tree plus extra edges."""
    rng = random.Random(seed)
    if n < 2:
        raise GraphError("need at least two vertices")
    order = list(range(n))
    rng.shuffle(order)
    edges = []
    for i in range(1, n):
        edges.append((order[rng.randrange(i)], order[i]))
    for _ in range(extra_edges):
        for _attempt in range(50):
            u, v = rng.randrange(n), rng.randrange(n)
            if u == v:
                continue
            e = (min(u, v), max(u, v))
            if allow_parallel or e not in edges:
                edges.append(e)
                break
        # give up quietly when the simple graph is saturated
    if k > n:
        raise GraphError("more terminals than vertices")
    terminals = tuple(sorted(rng.sample(range(n), k)))
    return Graph(n, tuple(edges), terminals)


# ---------------------------------------------------------------------------
# serialization

def format_graph_text(g):
    lines = [f"graph {g.n} {g.m} {g.k}"]
    lines += [f"{u} {v}" for u, v in g.edges]
    lines.append(" ".join(str(t) for t in g.terminals))
    return "\n".join(lines) + "\n"

def parse_graph_text(text):
    rows = [ln for ln in (ln.strip() for ln in text.splitlines()) if ln]
    if not rows or not rows[0].startswith("graph"):
        raise GraphError("missing 'graph <n> <m> <k>' header")
    try:
        _, n, m, k = rows[0].split()
        n, m, k = int(n), int(m), int(k)
        edges = tuple(tuple(map(int, rows[1 + i].split())) for i in range(m))
        terminals = tuple(map(int, rows[1 + m].split()))
    except (ValueError, IndexError) as exc:
        raise GraphError(f"malformed graph text: {exc}") from exc
    if len(terminals) != k:
        raise GraphError(f"expected {k} terminals, got {len(terminals)}")
    return Graph(n, edges, terminals)

def graph_to_json(g):
    return {"n": g.n, "edges": [list(e) for e in g.edges],
            "terminals": list(g.terminals)}

def graph_from_json(obj):
    try:
        return Graph(int(obj["n"]),
                     tuple(tuple(e) for e in obj["edges"]),
                     tuple(obj["terminals"]))
    except (KeyError, TypeError) as exc:
        raise GraphError(f"malformed graph JSON: {exc}") from exc

def load_graph(path):
    """Read a graph file; JSON if the suffix is .json, text format otherwise."""
    with open(path) as fh:
        data = fh.read()
    if str(path).endswith(".json"):
        return graph_from_json(json.loads(data))
    return parse_graph_text(data)
