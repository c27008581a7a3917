"""Exact binary min-cut and alpha-expansion for Potts-model labeling.

Capacities are scaled to integers so scipy's max-flow is exact; label moves
are accepted only when the recomputed float energy decreases.
"""

from __future__ import annotations

import collections

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_flow

MAX_CAPACITY_SCALE = 1e8
_TOTAL_CAPACITY_BUDGET = float(2**30)  # scipy's max-flow works in int32
_SUBMODULARITY_SLACK = 1e-9


class SubmodularityError(ValueError):
    pass


def binary_min_cut(unary, pairwise):
    """Exact minimizer of sum(unary[p][x_p]) + sum over (p, q, A, B, C, D) of
    the 2x2 table (A=00, B=01, C=10, D=11).  Tables must be submodular
    (B + C >= A + D).  Returns the 0/1 assignment."""
    unary = np.asarray(unary, dtype=np.float64)
    n = len(unary)
    theta = unary[:, 1] - unary[:, 0]
    caps = collections.defaultdict(float)
    source, sink = n, n + 1
    for p, q, a, b, c, d in pairwise:
        gap = b + c - a - d
        if gap < -_SUBMODULARITY_SLACK:
            raise SubmodularityError(f"non-submodular table on pair ({p}, {q})")
        theta[p] += c - a
        theta[q] += d - c
        caps[p, q] += max(gap, 0.0)
    for p in range(n):
        if theta[p] > 0:
            caps[source, p] += theta[p]  # charged when p lands on the sink side
        elif theta[p] < 0:
            caps[p, sink] += -theta[p]
    total = sum(caps.values())
    scale = MAX_CAPACITY_SCALE if total == 0 else min(
        MAX_CAPACITY_SCALE, _TOTAL_CAPACITY_BUDGET / total
    )
    rows, cols, data = [], [], []
    for (u, v), c in caps.items():
        rows += [u, v]
        cols += [v, u]
        data += [int(round(c * scale)), 0]  # reverse edge for residuals
    graph = csr_matrix((data, (rows, cols)), shape=(n + 2, n + 2), dtype=np.int32)
    graph.sum_duplicates()
    flow = maximum_flow(graph, source, sink).flow
    residual = graph - flow
    side = _source_side(residual, source)
    # x_p = 1 exactly when p is unreachable from the source in the residual
    return np.array([0 if p in side else 1 for p in range(n)], dtype=np.int64)


def _source_side(residual, source):
    indptr, indices, data = residual.indptr, residual.indices, residual.data
    seen = {source}
    stack = [source]
    while stack:
        u = stack.pop()
        for k in range(indptr[u], indptr[u + 1]):
            v = indices[k]
            if data[k] > 0 and v not in seen:
                seen.add(v)
                stack.append(v)
    return seen


def potts_energy(labels, unary, edges, edge_weights) -> float:
    """sum(unary[t][labels[t]]) + sum of w_e over label-discontinuity edges."""
    labels = np.asarray(labels)
    e = float(unary[np.arange(len(labels)), labels].sum())
    if len(edges):
        diff = labels[edges[:, 0]] != labels[edges[:, 1]]
        e += float(edge_weights[diff].sum())
    return e


def expansion_move(labels, unary, edges, edge_weights, alpha):
    """One alpha-expansion: each element either keeps its label (x=0) or
    switches to alpha (x=1); the binary subproblem is solved exactly."""
    labels = np.asarray(labels)
    n = len(labels)
    binary_unary = np.column_stack([
        unary[np.arange(n), labels],
        unary[:, alpha],
    ])
    pairwise = []
    for (p, q), w in zip(edges, edge_weights):
        lp, lq = labels[p], labels[q]
        a = w * (lp != lq)
        b = w * (lp != alpha)
        c = w * (lq != alpha)
        pairwise.append((int(p), int(q), float(a), float(b), float(c), 0.0))
    x = binary_min_cut(binary_unary, pairwise)
    return np.where(x == 1, alpha, labels)


def solve_potts(unary, edges, edge_weights, init_labels, max_cycles=20):
    """Cycle alpha-expansions over all labels until no move lowers the energy.

    Returns (labels, energy).  Every accepted move strictly decreases the
    recomputed float energy, so termination and monotonicity are guaranteed.
    """
    unary = np.asarray(unary, dtype=np.float64)
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    edge_weights = np.asarray(edge_weights, dtype=np.float64)
    labels = np.asarray(init_labels, dtype=np.int64).copy()
    energy = potts_energy(labels, unary, edges, edge_weights)
    n_labels = unary.shape[1]
    for _ in range(max_cycles):
        improved = False
        for alpha in range(n_labels):
            candidate = expansion_move(labels, unary, edges, edge_weights, alpha)
            cand_energy = potts_energy(candidate, unary, edges, edge_weights)
            if cand_energy < energy - 1e-12:
                labels, energy = candidate, cand_energy
                improved = True
        if not improved:
            break
    return labels, energy
