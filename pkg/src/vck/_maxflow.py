"""Max-flow on the bipartite network source -> rows -> cols -> sink.

Row-to-column arcs exist for masked cells and are uncapacitated.  Two
backends share one interface: exact integer capacities go through scipy's
compiled Dinic solver, real capacities through a pure-Python Dinic.
"""

from __future__ import annotations

from collections import deque

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_flow

INT_CAP_LIMIT = 2 ** 29
SMALL_ARCS = 400


def int_max_flow(mask: np.ndarray, cap_rows, cap_cols) -> np.ndarray:
    """Integer max-flow; returns the row->col flow matrix as int64.

    Small networks run through the pure-Python Dinic (exact on ints); the
    compiled solver pays a fixed sparse-matrix setup cost per call.
    """
    n, m = mask.shape
    cap_rows = np.asarray(cap_rows, dtype=np.int64)
    cap_cols = np.asarray(cap_cols, dtype=np.int64)
    big = 2 * int(max(cap_rows.sum(), cap_cols.sum()))
    if big >= INT_CAP_LIMIT:
        raise OverflowError("capacities too large for the integer backend")
    ri, cj = np.nonzero(mask)
    if len(ri) <= SMALL_ARCS:
        return _dinic_flow(mask, [int(c) for c in cap_rows], [int(c) for c in cap_cols],
                           big, 0, dtype=np.int64)
    src, snk = 0, n + m + 1
    heads = np.concatenate([np.full(n, src), 1 + ri, 1 + n + np.arange(m)])
    tails = np.concatenate([1 + np.arange(n), 1 + n + cj, np.full(m, snk)])
    caps = np.concatenate([cap_rows, np.full(len(ri), big), cap_cols]).astype(np.int32)
    graph = csr_matrix((caps, (heads, tails)), shape=(n + m + 2, n + m + 2))
    res = maximum_flow(graph, src, snk, method="dinic")
    coo = res.flow.tocoo()
    keep = (coo.row >= 1) & (coo.row <= n) & (coo.col > n) & (coo.col <= n + m) & (coo.data > 0)
    out = np.zeros((n, m), dtype=np.int64)
    out[coo.row[keep] - 1, coo.col[keep] - n - 1] = coo.data[keep]
    return out


class _Dinic:
    def __init__(self, size: int, tol: float):
        self.to: list[int] = []
        self.cap: list[float] = []
        self.adj: list[list[int]] = [[] for _ in range(size)]
        self.tol = tol

    def add(self, u: int, v: int, c: float) -> int:
        self.adj[u].append(len(self.to))
        self.to.append(v)
        self.cap.append(c)
        self.adj[v].append(len(self.to))
        self.to.append(u)
        self.cap.append(0 * c)
        return len(self.to) - 2

    def _levels(self, s: int, t: int):
        level = [-1] * len(self.adj)
        level[s] = 0
        q = deque([s])
        to, cap, tol = self.to, self.cap, self.tol
        while q:
            u = q.popleft()
            for e in self.adj[u]:
                v = to[e]
                if level[v] < 0 and cap[e] > tol:
                    level[v] = level[u] + 1
                    q.append(v)
        return level if level[t] >= 0 else None

    def run(self, s: int, t: int) -> float:
        to, cap, adj, tol = self.to, self.cap, self.adj, self.tol
        total = 0
        while True:
            level = self._levels(s, t)
            if level is None:
                return total
            it = [0] * len(adj)
            while True:
                # iterative DFS for one augmenting path in the level graph
                path: list[int] = []
                u = s
                while u != t:
                    advanced = False
                    while it[u] < len(adj[u]):
                        e = adj[u][it[u]]
                        v = to[e]
                        if cap[e] > tol and level[v] == level[u] + 1:
                            path.append(e)
                            u = v
                            advanced = True
                            break
                        it[u] += 1
                    if not advanced:
                        if u == s:
                            break
                        level[u] = -1
                        e = path.pop()
                        u = to[e ^ 1]
                        it[u] += 1
                if u != t:
                    break
                push = min(cap[e] for e in path)
                for e in path:
                    cap[e] -= push
                    cap[e ^ 1] += push
                total += push


def float_max_flow(mask: np.ndarray, cap_rows, cap_cols, tol: float = 1e-15) -> np.ndarray:
    """Real-capacity max-flow; returns the row->col flow matrix."""
    big = 2.0 * max(float(np.sum(cap_rows)), float(np.sum(cap_cols)), 1.0)
    return _dinic_flow(mask, [float(c) for c in cap_rows], [float(c) for c in cap_cols],
                       big, tol, dtype=float)


def _dinic_flow(mask, cap_rows, cap_cols, big, tol, dtype):
    n, m = mask.shape
    src, snk = 0, n + m + 1
    g = _Dinic(n + m + 2, tol)
    for i in range(n):
        g.add(src, 1 + i, cap_rows[i])
    arcs = []
    for i, j in zip(*np.nonzero(mask)):
        arcs.append((i, j, g.add(1 + i, 1 + n + j, big)))
    for j in range(m):
        g.add(1 + n + j, snk, cap_cols[j])
    g.run(src, snk)
    flow = np.zeros((n, m), dtype=dtype)
    for i, j, e in arcs:
        # reverse residual accumulates the pushed amount exactly
        flow[i, j] = g.cap[e ^ 1]
    return flow


def source_reachable(mask: np.ndarray, flow: np.ndarray, cap_rows, cap_cols, tol: float):
    """Rows and columns reachable from the source in the residual network."""
    n, m = mask.shape
    row_slack = np.asarray(cap_rows) - flow.sum(axis=1)
    rows = np.zeros(n, dtype=bool)
    cols = np.zeros(m, dtype=bool)
    q = deque(int(i) for i in np.flatnonzero(row_slack > tol))
    rows[row_slack > tol] = True
    positive = flow > tol
    while q:
        i = q.popleft()
        for j in np.flatnonzero(mask[i] & ~cols):
            cols[j] = True
            for k in np.flatnonzero(positive[:, j] & ~rows):
                rows[k] = True
                q.append(int(k))
    return rows, cols
