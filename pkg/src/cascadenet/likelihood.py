"""Per-node likelihood subproblems in log-transformed variables.

For a target node ``i`` the unknowns are the incoming weights ``A[j, i]`` of
its candidate parents.  They are optimised through ``b_j = log(1 - A[j, i])``
which turns the negative log-likelihood plus the ``rho * sum 1/(1-A)``
sparsity penalty into a smooth convex function on the box
``[log(EPS_A), 0]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .diffusion import CascadeSet, TransmissionModel
from .graph import Network

EPS_A = 1e-12
LOWER = float(np.log(EPS_A))
W_MIN, W_MAX = 1e-12, 1.0


@dataclass(frozen=True)
class NodeSubproblem:
    """Data of the convex program for the incoming edges of ``target``.

    Positive evidence is stored as triplets: ``w[k]`` is the clamped
    density ``w(tau_i - tau_j)`` linking positive cascade ``rows[k]`` to
    parent index ``cols[k]``, for every parent that strictly preceded the
    target in that cascade.  ``negative_counts[j]`` counts cascades in
    which parent ``j`` was infected and the target was not.
    """

    target: int
    parents: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    w: np.ndarray
    negative_counts: np.ndarray
    cascade_ids: np.ndarray

    @property
    def n_parents(self) -> int:
        return len(self.parents)

    @property
    def n_positive(self) -> int:
        return len(self.cascade_ids)

    @property
    def empty(self) -> bool:
        return len(self.parents) == 0

    @property
    def weights(self) -> np.ndarray:
        """Dense (positive cascade x parent) matrix of cached densities."""
        W = np.zeros((self.n_positive, self.n_parents))
        W[self.rows, self.cols] = self.w
        return W

    @property
    def positive_cascades(self) -> list[list[tuple[int, float]]]:
        out: list[list[tuple[int, float]]] = [[] for _ in range(self.n_positive)]
        for r, j, w in zip(self.rows, self.cols, self.w):
            out[r].append((int(j), float(w)))
        return [sorted(terms) for terms in out]

    def restrict(self, keep) -> "NodeSubproblem":
        """Subproblem over the parents selected by boolean mask ``keep``."""
        keep = np.asarray(keep, dtype=bool)
        new_index = np.cumsum(keep) - 1
        sel = keep[self.cols]
        return NodeSubproblem(self.target, self.parents[keep], self.rows[sel],
                              new_index[self.cols[sel]], self.w[sel],
                              self.negative_counts[keep], self.cascade_ids)

    def drop_unexplained(self) -> "NodeSubproblem":
        """Remove positive cascades that no longer have any parent."""
        alive = np.bincount(self.rows, minlength=self.n_positive) > 0
        if alive.all():
            return self
        new_row = np.cumsum(alive) - 1
        return NodeSubproblem(self.target, self.parents, new_row[self.rows], self.cols, self.w,
                              self.negative_counts, self.cascade_ids[alive])


def to_transformed(A) -> np.ndarray:
    return np.log1p(-np.asarray(A, dtype=float))


def to_weights(b) -> np.ndarray:
    return -np.expm1(np.asarray(b, dtype=float))


def clamped_density(model: TransmissionModel, dt) -> np.ndarray:
    return np.clip(model.pdf(dt), W_MIN, W_MAX)


def _precedence_pairs(cs: CascadeSet, model: TransmissionModel, target=None):
    """All (target, cascade, parent, w) with parent strictly before target."""
    tgt, cid, par, dts = [], [], [], []
    for c in cs.cascades:
        if target is not None and target not in c.times:
            continue
        nodes = np.fromiter(c.times.keys(), dtype=np.int64, count=len(c.times))
        times = np.fromiter(c.times.values(), dtype=float, count=len(c.times))
        if target is not None:
            ti = c.times[target]
            mask = times < ti
            k = int(mask.sum())
            tgt.append(np.full(k, target))
            par.append(nodes[mask])
            dts.append(ti - times[mask])
            cid.append(np.full(k, c.id))
            continue
        dt = times[:, None] - times[None, :]
        ii, jj = np.nonzero(dt > 0)
        tgt.append(nodes[ii])
        par.append(nodes[jj])
        dts.append(dt[ii, jj])
        cid.append(np.full(len(ii), c.id))
    if not tgt:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, empty, np.zeros(0)
    dts = np.concatenate(dts)
    return (np.concatenate(tgt).astype(np.int64), np.concatenate(cid).astype(np.int64),
            np.concatenate(par).astype(np.int64), clamped_density(model, dts))


def _infection_counts(cs: CascadeSet):
    """Number of cascades in which each node is infected."""
    counts = np.zeros(cs.n, dtype=np.int64)
    for c in cs.cascades:
        for v in c.times:
            counts[v] += 1
    return counts


def _assemble(target, cid, par, w, infected_counts, co_counts) -> NodeSubproblem:
    parents = np.unique(par)
    cascades = np.unique(cid)
    neg = (infected_counts[parents] - co_counts).astype(float)
    return NodeSubproblem(target, parents, np.searchsorted(cascades, cid),
                          np.searchsorted(parents, par), np.asarray(w, dtype=float),
                          neg, cascades)


def _co_infection(cs: CascadeSet, target: int, parents: np.ndarray) -> np.ndarray:
    co = np.zeros(len(parents), dtype=np.int64)
    for c in cs.cascades:
        if target in c.times:
            for k, j in enumerate(parents):
                if int(j) in c.times:
                    co[k] += 1
    return co


def build_subproblem(cs: CascadeSet, target: int, model: TransmissionModel) -> NodeSubproblem:
    """Candidate parents, cached densities and negative evidence for one node."""
    if not 0 <= target < cs.n:
        raise ValueError(f"target {target} out of range for n={cs.n}")
    tgt, cid, par, w = _precedence_pairs(cs, model, target=target)
    counts = _infection_counts(cs)
    parents = np.unique(par)
    return _assemble(target, cid, par, w, counts, _co_infection(cs, target, parents))


def build_subproblems(cs: CascadeSet, model: TransmissionModel) -> list[NodeSubproblem]:
    """Subproblems for every node, sharing one pass over the cascades."""
    tgt, cid, par, w = _precedence_pairs(cs, model)
    counts = _infection_counts(cs)
    # co-infection matrix from the cascade x node incidence
    rows = np.concatenate([np.full(len(c.times), k) for k, c in enumerate(cs.cascades)]
                          ) if cs.cascades else np.zeros(0, dtype=np.int64)
    cols = np.concatenate([np.fromiter(c.times.keys(), dtype=np.int64) for c in cs.cascades]
                          ) if cs.cascades else np.zeros(0, dtype=np.int64)
    M = sparse.csc_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(cs.cascades), cs.n))
    co = (M.T @ M).tocsc()

    order = np.argsort(tgt, kind="stable")
    tgt, cid, par, w = tgt[order], cid[order], par[order], w[order]
    bounds = np.searchsorted(tgt, np.arange(cs.n + 1))
    out = []
    for i in range(cs.n):
        sl = slice(bounds[i], bounds[i + 1])
        parents = np.unique(par[sl])
        co_i = co[:, i].toarray().ravel()[parents].astype(np.int64)
        out.append(_assemble(i, cid[sl], par[sl], w[sl], counts, co_i))
    return out


def _check(sp: NodeSubproblem, b) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if b.shape != (sp.n_parents,):
        raise ValueError(f"point has shape {b.shape}, subproblem has {sp.n_parents} parents")
    return b


def evaluate(sp: NodeSubproblem, b, rho: float = 0.0, grad: bool = True):
    """Objective value and (optionally) gradient at ``b``.

    Objective: ``sum_c -log(1 - P_c) - sum_j n_j b_j + rho sum_j exp(-b_j)``
    where ``P_c = prod_j (1 - w_cj + w_cj exp(b_j))``.
    """
    b = _check(sp, b)
    value = float(-(sp.negative_counts @ b) + rho * np.exp(-b).sum())
    g = -sp.negative_counts - rho * np.exp(-b) if grad else None
    if sp.n_positive:
        eb = b[sp.cols]
        log_f = np.log1p(sp.w * np.expm1(eb))
        log_p = np.bincount(sp.rows, log_f, minlength=sp.n_positive)
        if np.any(log_p >= 0):
            value = np.inf
        else:
            value -= float(np.log(-np.expm1(log_p)).sum())
        if grad:
            with np.errstate(divide="ignore"):
                odds = 1.0 / np.expm1(-log_p)  # P / (1 - P)
            g = g + np.bincount(sp.cols, odds[sp.rows] * sp.w * np.exp(eb - log_f),
                                minlength=sp.n_parents)
    return value, g


def objective(sp: NodeSubproblem, b, rho: float = 0.0) -> float:
    """Convex negative log-likelihood plus sparsity penalty at ``b``."""
    return evaluate(sp, b, rho, grad=False)[0]


def gradient(sp: NodeSubproblem, b, rho: float = 0.0) -> np.ndarray:
    return evaluate(sp, b, rho)[1]


def objective_change(sp: NodeSubproblem, b, d, rho: float = 0.0) -> float:
    """``objective(b + d) - objective(b)`` computed from per-term differences.

    Accurate even when the change is far below the objective's own rounding
    error, which plain subtraction of two objective values is not.
    """
    b = _check(sp, b)
    d = np.asarray(d, dtype=float)
    change = float(-(sp.negative_counts @ d) + rho * (np.exp(-b) * np.expm1(-d)).sum())
    if sp.n_positive:
        eb = b[sp.cols]
        log_f = np.log1p(sp.w * np.expm1(eb))
        log_p = np.bincount(sp.rows, log_f, minlength=sp.n_positive)
        q = sp.w * np.exp(eb - log_f)
        dlog_p = np.bincount(sp.rows, np.log1p(q * np.expm1(d[sp.cols])), minlength=sp.n_positive)
        with np.errstate(divide="ignore", invalid="ignore"):
            odds = 1.0 / np.expm1(-log_p)
            ratio = -odds * np.expm1(dlog_p)  # (P - P_new) / (1 - P)
        if np.any(log_p >= 0) or np.any(ratio <= -1.0):
            return np.inf
        # a cascade whose parents all reach weight 0 becomes impossible
        moved = np.bincount(sp.rows, (b + d)[sp.cols] < 0, minlength=sp.n_positive)
        if np.any(moved == 0):
            return np.inf
        change -= float(np.log1p(ratio).sum())
    return change


def hessian_diagonal(sp: NodeSubproblem, b, rho: float = 0.0) -> np.ndarray:
    """Diagonal of the objective's Hessian at ``b``."""
    b = _check(sp, b)
    h = rho * np.exp(-b)
    if sp.n_positive:
        eb = b[sp.cols]
        log_f = np.log1p(sp.w * np.expm1(eb))
        log_p = np.bincount(sp.rows, log_f, minlength=sp.n_positive)
        with np.errstate(divide="ignore"):
            odds = (1.0 / np.expm1(-log_p))[sp.rows]
        q = sp.w * np.exp(eb - log_f)  # d log f / d b
        h = h + np.bincount(sp.cols, odds * (1.0 + odds) * q * q + odds * q * (1.0 - q),
                            minlength=sp.n_parents)
    return h


def node_log_likelihood(cs: CascadeSet, target: int, column, model: TransmissionModel) -> float:
    """Log-likelihood of node ``target``'s infections given incoming weights ``column``."""
    column = np.asarray(column, dtype=float)
    total = 0.0
    for c in cs.cascades:
        if target in c.times:
            ti = c.times[target]
            preds = [(j, t) for j, t in c.times.items() if t < ti]
            if not preds:
                continue  # the seed: no endogenous infection to explain
            j = np.array([p[0] for p in preds])
            w = clamped_density(model, ti - np.array([p[1] for p in preds]))
            miss = np.prod(1.0 - w * column[j])
            total += np.log(1.0 - miss) if miss < 1.0 else -np.inf
        else:
            j = np.fromiter(c.times.keys(), dtype=np.int64)
            with np.errstate(divide="ignore"):
                total += float(np.log1p(-column[j]).sum())
    return float(total)


def log_likelihood(A_hat: Network, cs: CascadeSet, model: TransmissionModel) -> float:
    """Log-likelihood of the whole cascade set under weights ``A_hat``."""
    if A_hat.n != cs.n:
        raise ValueError(f"network has {A_hat.n} nodes, cascades have {cs.n}")
    A = A_hat.to_dense()
    return float(sum(node_log_likelihood(cs, i, A[:, i], model) for i in range(cs.n)))
