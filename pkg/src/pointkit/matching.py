"""Bipartite feature-to-query alignment.

Cost matrices are negated cosine similarities, so minimizing total cost
maximizes total similarity. The assignment solver is an O(n^3) shortest
augmenting path method; among equally cheap assignments it returns the
lexicographically smallest permutation, which pins the output down even when
the cost matrix has exact ties.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFeature, EmptyInput, InvalidConfig, InvalidCost


@dataclass(frozen=True)
class CostMatrix:
    """Square matrix of pairwise matching costs."""

    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] == 0:
            raise InvalidCost(f"cost matrix must be square and non-empty, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InvalidCost("cost matrix must be finite")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class Assignment:
    """A permutation sigma with total_cost = sum_i values[i][sigma[i]]."""

    sigma: tuple[int, ...]
    total_cost: float

    def __post_init__(self) -> None:
        if sorted(self.sigma) != list(range(len(self.sigma))):
            raise InvalidConfig("sigma must be a permutation of 0..n-1")


def _unit_rows(feats: np.ndarray, name: str) -> np.ndarray:
    f = np.asarray(feats, dtype=np.float64)
    if f.ndim != 2:
        raise InvalidCost(f"{name} must be a 2-D array, got shape {f.shape}")
    if f.shape[0] == 0:
        raise EmptyInput(f"{name} has no rows")
    if not np.all(np.isfinite(f)):
        raise InvalidCost(f"{name} must be finite")
    norms = np.sqrt(np.sum(f * f, axis=1))
    if np.any(norms == 0.0):
        raise DegenerateFeature(f"{name} row {int(np.argmin(norms))} has zero norm")
    return f / norms[:, None]


def cosine_cost(view_feats: np.ndarray, query_feats: np.ndarray) -> CostMatrix:
    """Negated cosine similarity between each view row and each query row.

    The sign flip makes "most similar" mean "cheapest" for the assignment
    solver; a perfect match sits at cost -1.
    """
    v = _unit_rows(view_feats, "view_feats")
    q = _unit_rows(query_feats, "query_feats")
    if v.shape != q.shape:
        raise InvalidCost(f"feature sets must share a shape, got {v.shape} and {q.shape}")
    return CostMatrix(-(v @ q.T))


def _solve_lsap(cost: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One optimal assignment (row -> column) by shortest augmenting paths.

    Also returns the dual potentials (u, v); every column of every optimal
    assignment has reduced cost cost[i][j] - u[i] - v[j] of zero, which the
    tie refinement uses to prune its probes.
    """
    n = cost.shape[0]
    u = np.zeros(n)
    v = np.zeros(n)
    row4col = np.full(n, -1, dtype=np.int64)
    col4row = np.full(n, -1, dtype=np.int64)
    for cur_row in range(n):
        shortest = np.full(n, np.inf)
        path = np.full(n, -1, dtype=np.int64)
        remaining = np.ones(n, dtype=bool)
        scanned_rows = np.zeros(n, dtype=bool)
        min_val = 0.0
        i = cur_row
        sink = -1
        while sink == -1:
            scanned_rows[i] = True
            cand = min_val + cost[i] - u[i] - v
            upd = remaining & (cand < shortest)
            shortest[upd] = cand[upd]
            path[upd] = i
            masked = np.where(remaining, shortest, np.inf)
            j = int(np.argmin(masked))
            min_val = float(masked[j])
            remaining[j] = False
            if row4col[j] == -1:
                sink = j
            else:
                i = int(row4col[j])
        u[cur_row] += min_val
        upd_rows = scanned_rows.copy()
        upd_rows[cur_row] = False
        if np.any(upd_rows):
            rows = np.flatnonzero(upd_rows)
            u[rows] += min_val - shortest[col4row[rows]]
        scanned_cols = ~remaining
        v[scanned_cols] -= min_val - shortest[scanned_cols]
        # augment along the found path
        j = sink
        while True:
            i = int(path[j])
            row4col[j] = i
            col4row[i], j = j, col4row[i]
            if i == cur_row:
                break
    return col4row, u, v


def _row_order_total(values: np.ndarray, sigma) -> float:
    # left-to-right summation; tie detection in hungarian() relies on every
    # candidate total being accumulated in exactly this order
    total = 0.0
    for i, j in enumerate(sigma):
        total += float(values[i, int(j)])
    return total


def hungarian(cost: CostMatrix | np.ndarray) -> Assignment:
    """Minimum-cost assignment; ties resolve to the lexicographically
    smallest permutation.

    The refinement pass fixes rows in order, probing smaller columns and
    keeping one only when an optimal completion still exists.
    """
    values = cost.values if isinstance(cost, CostMatrix) else CostMatrix(cost).values
    n = values.shape[0]
    sigma, u, v = _solve_lsap(values)
    best = _row_order_total(values, sigma)
    # only zero-reduced-cost edges can appear in an optimal assignment; the
    # tolerance absorbs float round-off in the duals (exact inputs give an
    # exactly zero reduced cost)
    reduced = values - u[:, None] - v[None, :]
    tol = 1e-9 * max(1.0, float(np.max(np.abs(values))))
    free_cols = list(range(n))
    for i in range(n):
        current = int(sigma[i])
        for j in free_cols:
            if j >= current:
                break
            if reduced[i, j] > tol:
                continue
            rest_rows = np.arange(i + 1, n)
            rest_cols = np.array([c for c in free_cols if c != j], dtype=np.int64)
            candidate = np.array(sigma)
            candidate[i] = j
            if rest_rows.size:
                sub = values[np.ix_(rest_rows, rest_cols)]
                sub_sol, _, _ = _solve_lsap(sub)
                candidate[i + 1 :] = rest_cols[sub_sol]
            if _row_order_total(values, candidate) == best:
                sigma = candidate
                current = j
                break
        free_cols.remove(current)
    return Assignment(tuple(int(j) for j in sigma), best)


def alignment_loss(
    view_feats: np.ndarray, query_feats: np.ndarray, sigma
) -> tuple[float, np.ndarray]:
    """Sum of (1 - cos) over matched pairs, plus the analytic gradient with
    respect to each query row.

    grad[sigma[i]] = -(I_i / (|I_i||Q_j|) - cos(I_i, Q_j) * Q_j / |Q_j|^2)
    with j = sigma[i]; unmatched rows cannot occur (sigma is a permutation).
    """
    I = np.asarray(view_feats, dtype=np.float64)
    Q = np.asarray(query_feats, dtype=np.float64)
    if I.shape != Q.shape or I.ndim != 2:
        raise InvalidCost(f"feature sets must share a shape, got {I.shape} and {Q.shape}")
    n = I.shape[0]
    if sorted(int(s) for s in sigma) != list(range(n)):
        raise InvalidConfig("sigma must be a permutation matching the feature count")
    ni = np.sqrt(np.sum(I * I, axis=1))
    nq = np.sqrt(np.sum(Q * Q, axis=1))
    if np.any(ni == 0.0) or np.any(nq == 0.0):
        raise DegenerateFeature("zero-norm feature row")
    sig = np.asarray([int(s) for s in sigma], dtype=np.int64)
    Qm = Q[sig]
    nqm = nq[sig]
    dots = np.sum(I * Qm, axis=1)
    cos = dots / (ni * nqm)
    loss = float(np.sum(1.0 - cos))
    grad_matched = -(I / (ni * nqm)[:, None] - (cos / nqm**2)[:, None] * Qm)
    grad = np.zeros_like(Q)
    grad[sig] = grad_matched
    return loss, grad
