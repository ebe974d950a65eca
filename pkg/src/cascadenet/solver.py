"""Box-constrained minimisation of node subproblems and network assembly."""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .diffusion import CascadeSet, TransmissionModel
from .graph import Network
from .likelihood import (LOWER, NodeSubproblem, build_subproblems, evaluate,
                         hessian_diagonal, objective, objective_change,
                         to_transformed, to_weights)

logger = logging.getLogger(__name__)

ARMIJO = 1e-4
BACKTRACK = 0.5
STEP_MIN, STEP_MAX = 1e-8, 1e8
H_MIN = 1e-12


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverOptions:
    rho: float = 0.0
    grad_tol: float = 1e-6
    max_iter: int = 5000
    zero_threshold: float = 1e-4
    init_A: float = 0.1
    diagonal_scaling: bool = True

    def __post_init__(self):
        if not self.grad_tol > 0:
            raise ValueError(f"grad_tol must be positive, got {self.grad_tol}")
        if not 0 < self.init_A < 1:
            raise ValueError(f"init_A must lie in (0, 1), got {self.init_A}")
        if not 0 <= self.zero_threshold < 1:
            raise ValueError(f"zero_threshold must lie in [0, 1), got {self.zero_threshold}")
        if self.rho < 0:
            raise ValueError(f"rho must be nonnegative, got {self.rho}")
        if self.max_iter < 0:
            raise ValueError(f"max_iter must be nonnegative, got {self.max_iter}")


@dataclass
class MinimizeResult:
    b: np.ndarray
    fun: float
    iterations: int
    converged: bool
    pg_norm: float
    history: list[float] = field(default_factory=list, repr=False)


@dataclass
class NodeReport:
    node: int
    iterations: int
    objective: float
    converged: bool
    stage1_support: int
    n_parents: int


@dataclass
class SolveReport:
    nodes: list[NodeReport]
    wall_time: float = 0.0
    total_edges: int = 0

    @property
    def converged(self) -> bool:
        return all(r.converged for r in self.nodes)

    def to_dict(self, include_timing: bool = True) -> dict:
        d = {"total_edges": self.total_edges,
             "converged": self.converged,
             "nodes": [asdict(r) for r in self.nodes]}
        if include_timing:
            d["wall_time"] = self.wall_time
        return d


def projected_gradient_norm(b, g) -> float:
    if len(b) == 0:
        return 0.0
    return float(np.max(np.abs(np.clip(b - g, LOWER, 0.0) - b)))


def _pgd(sp: NodeSubproblem, b0: np.ndarray, rho: float, opts: SolverOptions) -> MinimizeResult:
    b = b0.copy()
    f, g = evaluate(sp, b, rho)
    history = [f]
    b_prev = g_prev = None
    pg = projected_gradient_norm(b, g)
    it = 0
    while pg > opts.grad_tol and it < opts.max_iter:
        if opts.diagonal_scaling:
            # Newton-scaled direction; the box projection is unchanged by diagonal metrics
            direction = g / np.maximum(hessian_diagonal(sp, b, rho), H_MIN)
            step = 1.0
        else:
            direction = g
            if b_prev is None:
                step = 1.0
            else:
                s, y = b - b_prev, g - g_prev
                sy = float(s @ y)
                step = float(s @ s) / sy if sy > 0 else STEP_MAX
                step = min(max(step, STEP_MIN), STEP_MAX)
        while True:
            b_new = np.clip(b - step * direction, LOWER, 0.0)
            d = b_new - b
            change = objective_change(sp, b, d, rho)
            if change <= ARMIJO * float(g @ d) or step < 1e-20:
                break
            step *= BACKTRACK
        if not change <= 0 or not np.any(d):
            # no further decrease representable in double precision
            break
        b_prev, g_prev = b, g
        b = b_new
        f, g = f + change, evaluate(sp, b, rho)[1]
        history.append(f)
        pg = projected_gradient_norm(b, g)
        it += 1
    # history tracks accumulated exact decreases; report a fresh evaluation
    return MinimizeResult(b, evaluate(sp, b, rho, grad=False)[0], it, pg <= opts.grad_tol,
                          pg, history)


def minimize_box(sp: NodeSubproblem, opts: SolverOptions | None = None,
                 fixed_zero=(), rho: float | None = None) -> MinimizeResult:
    """Projected gradient descent with Armijo backtracking on the box.

    Coordinates listed in ``fixed_zero`` stay at ``b = 0`` (weight 0).  Positive
    cascades whose parents are all pinned are left out of the objective.
    ``rho`` defaults to ``opts.rho``.
    """
    opts = opts or SolverOptions()
    rho = opts.rho if rho is None else rho
    if sp.empty:
        raise SolverError(f"node {sp.target}: empty subproblem")
    free = np.ones(sp.n_parents, dtype=bool)
    free[list(fixed_zero)] = False
    b = np.zeros(sp.n_parents)
    if not free.any():
        res = MinimizeResult(b, 0.0, 0, True, 0.0)
        res.history.append(res.fun)
        return res
    # pinned coordinates sit at b=0, where their factors equal 1 and drop out;
    # a cascade left with no free parent carries no information about the rest
    sub = sp.restrict(free).drop_unexplained()
    b0 = np.full(sub.n_parents, float(to_transformed(opts.init_A)))
    if not np.isfinite(objective(sub, b0, rho)):
        b0 = np.full(sub.n_parents, float(to_transformed(0.5)))
        if not np.isfinite(objective(sub, b0, rho)):
            raise SolverError(f"node {sp.target}: objective not finite at the initial point")
    res = _pgd(sub, b0, rho, opts)
    b[free] = res.b
    res.b = b
    return res


def solve_node(sp: NodeSubproblem, opts: SolverOptions | None = None):
    """Two-stage solve: penalised fit, freeze the zeros, refit with rho=0.

    Returns ``(weights over sp.parents, NodeReport)``.
    """
    opts = opts or SolverOptions()
    if sp.empty:
        return np.zeros(0), NodeReport(sp.target, 0, 0.0, True, 0, 0)
    first = minimize_box(sp, opts)
    A1 = to_weights(first.b)
    zeros = np.flatnonzero(A1 < opts.zero_threshold)
    if opts.rho == 0 and len(zeros) == 0:
        second = first
    else:
        second = minimize_box(sp, opts, fixed_zero=zeros, rho=0.0)
    A = to_weights(second.b)
    A[zeros] = 0.0
    report = NodeReport(sp.target, first.iterations + second.iterations, float(second.fun),
                        bool(first.converged and second.converged),
                        int(sp.n_parents - len(zeros)), sp.n_parents)
    return A, report


def _solve_chunk(args):
    sps, opts = args
    return [solve_node(sp, opts) for sp in sps]


def default_workers() -> int:
    env = os.environ.get("CONNIE_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def solve_subproblems(subproblems: list[NodeSubproblem], opts: SolverOptions,
                      n_jobs: int | None = None):
    n_jobs = default_workers() if n_jobs is None else max(1, int(n_jobs))
    if n_jobs == 1 or len(subproblems) < 2:
        return [solve_node(sp, opts) for sp in subproblems]
    chunks = [subproblems[k::n_jobs] for k in range(n_jobs)]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        parts = list(pool.map(_solve_chunk, [(c, opts) for c in chunks]))
    # undo the round-robin split so results line up with the input order
    out = [None] * len(subproblems)
    for k, part in enumerate(parts):
        out[k::n_jobs] = part
    return out


def assemble(n: int, subproblems: list[NodeSubproblem], columns) -> Network:
    edges = {}
    for sp, A in zip(subproblems, columns):
        for j, a in zip(sp.parents, A):
            if a > 0:
                edges[(int(j), sp.target)] = float(a)
    return Network(n, edges)


def infer_network(cs: CascadeSet, model: TransmissionModel, opts: SolverOptions | None = None,
                  n_jobs: int | None = None, subproblems=None):
    """Infer every node's incoming weights and assemble the network.

    Returns ``(Network, SolveReport)``.
    """
    opts = opts or SolverOptions()
    t0 = time.perf_counter()
    if subproblems is None:
        subproblems = build_subproblems(cs, model)
    results = solve_subproblems(subproblems, opts, n_jobs)
    net = assemble(cs.n, subproblems, [A for A, _ in results])
    report = SolveReport([r for _, r in results], time.perf_counter() - t0, net.n_edges)
    for r in report.nodes:
        if r.n_parents:
            logger.info("node %d: %d parents, %d kept, %d iterations",
                         r.node, r.n_parents, r.stage1_support, r.iterations)
    return net, report
