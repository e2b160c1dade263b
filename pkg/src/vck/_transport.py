"""Transportation simplex for the capacity-constrained plan LP.

Solves ``max sum c * lam`` over ``lam >= 0`` with row sums ``<= mu`` and
column sums ``<= nu`` by balancing with a slack row and a slack column
(zero profit) and running the classical u-v / stepping-stone method.
"""

from __future__ import annotations

from collections import deque

import numpy as np

DEGENERATE_STREAK = 50


def _potentials(cost, basis_adj, n_rows, n_cols):
    u = np.full(n_rows, np.nan)
    v = np.full(n_cols, np.nan)
    u[n_rows - 1] = 0.0
    q = deque([("r", n_rows - 1)])
    while q:
        side, k = q.popleft()
        if side == "r":
            for j in basis_adj[0][k]:
                if np.isnan(v[j]):
                    v[j] = cost[k, j] - u[k]
                    q.append(("c", j))
        else:
            for i in basis_adj[1][k]:
                if np.isnan(u[i]):
                    u[i] = cost[i, k] - v[k]
                    q.append(("r", i))
    return u, v


def _tree_path(basis_adj, start_row, end_col):
    """Alternating path of basic cells from a row node to a column node."""
    parent = {("r", start_row): None}
    q = deque([("r", start_row)])
    target = ("c", end_col)
    while q:
        node = q.popleft()
        if node == target:
            break
        side, k = node
        nbrs = basis_adj[0][k] if side == "r" else basis_adj[1][k]
        nxt = "c" if side == "r" else "r"
        for w in sorted(nbrs):
            child = (nxt, w)
            if child not in parent:
                parent[child] = node
                q.append(child)
    cells = []
    node = target
    while parent[node] is not None:
        prev = parent[node]
        cells.append((prev[1], node[1]) if prev[0] == "r" else (node[1], prev[1]))
        node = prev
    return cells[::-1]


def max_profit_plan(profit, supply, demand, tol: float = 1e-12, max_iter: int = 100_000):
    """Optimal plan and iteration count for the relaxed transportation LP."""
    profit = np.asarray(profit, dtype=float)
    n, m = profit.shape
    N, M = n + 1, m + 1
    cost = np.zeros((N, M))
    cost[:n, :m] = -profit
    x = np.zeros((N, M))
    x[:n, m] = supply
    x[n, :m] = demand
    basic = np.zeros((N, M), dtype=bool)
    basic[:n, m] = True
    basic[n, :m] = True
    basic[n, m] = True
    adj = ([set() for _ in range(N)], [set() for _ in range(M)])
    for i, j in zip(*np.nonzero(basic)):
        adj[0][i].add(j)
        adj[1][j].add(i)
    scale = max(1.0, float(np.abs(profit).max(initial=0.0)))
    streak = 0
    for it in range(max_iter):
        u, v = _potentials(cost, adj, N, M)
        reduced = cost - u[:, None] - v[None, :]
        reduced[basic] = 0.0
        if streak < DEGENERATE_STREAK:
            flat = int(np.argmin(reduced))
            if reduced.flat[flat] >= -tol * scale:
                return x[:n, :m].copy(), it
        else:
            # Bland's rule after a run of degenerate pivots
            cand = np.flatnonzero(reduced.ravel() < -tol * scale)
            if not len(cand):
                return x[:n, :m].copy(), it
            flat = int(cand[0])
        ie, je = divmod(flat, M)
        path = _tree_path(adj, ie, je)
        # path alternates row->col (basic cell gets -) and col->row (gets +)
        minus = path[0::2]
        plus = path[1::2]
        theta = min(x[c] for c in minus)
        leave = min((c for c in minus if x[c] <= theta), key=lambda c: (c[0], c[1]))
        for c in minus:
            x[c] -= theta
        for c in plus:
            x[c] += theta
        x[ie, je] += theta
        x[leave] = 0.0
        basic[leave] = False
        adj[0][leave[0]].discard(leave[1])
        adj[1][leave[1]].discard(leave[0])
        basic[ie, je] = True
        adj[0][ie].add(je)
        adj[1][je].add(ie)
        streak = streak + 1 if theta <= 0 else 0
    raise RuntimeError("transportation simplex did not converge")
