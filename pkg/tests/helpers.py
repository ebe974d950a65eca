"""Shared oracles and checks for the test suite."""

import numpy as np

from cascadenet.likelihood import NodeSubproblem


def non_candidate_edges(net, cs):
    """Inferred edges (j, i) where j never strictly precedes i in any cascade."""
    precedes = set()
    for c in cs.cascades:
        items = list(c.times.items())
        for i, ti in items:
            for j, tj in items:
                if tj < ti:
                    precedes.add((j, i))
    return [e for e in net.edges if e not in precedes]


def design(k, m, w=0.7):
    """Single parent, k positive cascades with density w, m negative cascades."""
    return NodeSubproblem(0, np.array([1]), np.arange(k), np.zeros(k, dtype=np.int64),
                          np.full(k, w), np.array([m]), np.arange(k))


def random_small(rng, n_parents):
    n_pos = int(rng.integers(1, 7))
    rows, cols, w = [], [], []
    for r in range(n_pos):
        members = {j for j in range(n_parents) if rng.uniform() < 0.7}
        if r == n_pos - 1:
            # every candidate must precede the target at least once
            members |= set(range(n_parents)) - set(cols)
        for j in sorted(members or {int(rng.integers(n_parents))}):
            rows.append(r)
            cols.append(j)
            w.append(rng.uniform(0.05, 1.0))
    neg = rng.integers(0, 6, size=n_parents)
    return NodeSubproblem(0, np.arange(1, n_parents + 1), np.array(rows), np.array(cols),
                          np.array(w), neg, np.arange(n_pos))


def grid_objective(sp, grids):
    """Negative log-likelihood in the original variables on a mesh of A values."""
    mesh = np.meshgrid(*grids, indexing="ij")
    total = np.zeros(mesh[0].shape)
    for j, Aj in enumerate(mesh):
        total -= sp.negative_counts[j] * np.log1p(-Aj)
    for terms in sp.positive_cascades:
        miss = np.ones(mesh[0].shape)
        for j, w in terms:
            miss = miss * (1 - w * mesh[j])
        with np.errstate(divide="ignore"):
            total -= np.log1p(-miss)
    return total, mesh
