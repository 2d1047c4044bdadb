"""Integer max-flow via Dinic's algorithm.

Deterministic: edges are explored in insertion order, so identical inputs
produce identical flows and residual cuts.
"""

from __future__ import annotations

from collections import deque


class FlowNetwork:
    def __init__(self, n):
        self.n = n
        self.head = [[] for _ in range(n)]   # vertex -> list of arc indices
        self.to = []                         # arc -> head vertex
        self.cap = []                        # arc -> residual capacity

    def add_edge(self, u, v, cap):
        """Directed u->v arc; returns its index (reverse arc is index^1)."""
        aid = len(self.to)
        self.head[u].append(aid)
        self.to.append(v)
        self.cap.append(cap)
        self.head[v].append(aid + 1)
        self.to.append(u)
        self.cap.append(0)
        return aid

    def flow_on(self, arc_id):
        """Units pushed through the forward arc `arc_id`."""
        return self.cap[arc_id ^ 1]

    def _bfs_levels(self, s, t):
        level = [-1] * self.n
        level[s] = 0
        q = deque([s])
        while q:
            u = q.popleft()
            for aid in self.head[u]:
                v = self.to[aid]
                if self.cap[aid] > 0 and level[v] < 0:
                    level[v] = level[u] + 1
                    q.append(v)
        return level if level[t] >= 0 else None

    def _dfs_push(self, u, t, limit, level, it):
        if u == t:
            return limit
        total = 0
        while it[u] < len(self.head[u]):
            aid = self.head[u][it[u]]
            v = self.to[aid]
            if self.cap[aid] > 0 and level[v] == level[u] + 1:
                pushed = self._dfs_push(v, t, min(limit - total, self.cap[aid]),
                                        level, it)
                if pushed:
                    self.cap[aid] -= pushed
                    self.cap[aid ^ 1] += pushed
                    total += pushed
                    if total == limit:
                        return total
            it[u] += 1
        return total

    def max_flow(self, s, t, cutoff=None):
        """Max s-t flow; stops early once `cutoff` units are routed."""
        if s == t:
            raise ValueError("source equals sink")
        flow = 0
        bound = float("inf") if cutoff is None else cutoff
        while flow < bound:
            level = self._bfs_levels(s, t)
            if level is None:
                break
            it = [0] * self.n
            pushed = self._dfs_push(s, t, bound - flow, level, it)
            if pushed == 0:
                break
            flow += pushed
        return flow

    def residual_reachable(self, s):
        """Vertices reachable from s along positive-residual arcs."""
        seen = [False] * self.n
        seen[s] = True
        q = deque([s])
        while q:
            u = q.popleft()
            for aid in self.head[u]:
                v = self.to[aid]
                if self.cap[aid] > 0 and not seen[v]:
                    seen[v] = True
                    q.append(v)
        return seen
