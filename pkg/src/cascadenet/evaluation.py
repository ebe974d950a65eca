"""Edge-recovery metrics and rho sweeps against a ground-truth network."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .diffusion import CascadeSet, TransmissionModel
from .graph import Network
from .likelihood import build_subproblems
from .solver import SolverOptions, infer_network

logger = logging.getLogger(__name__)


def _check_sizes(truth: Network, inferred: Network):
    if truth.n != inferred.n:
        raise ValueError(f"node count mismatch: truth has {truth.n}, inferred has {inferred.n}")


def precision_recall(truth: Network, inferred: Network) -> tuple[float, float]:
    """Edge-presence precision and recall; 0/0 counts as 1."""
    _check_sizes(truth, inferred)
    t, p = truth.support(), inferred.support()
    tp = len(t & p)
    precision = tp / len(p) if p else 1.0
    recall = tp / len(t) if t else 1.0
    return precision, recall


def mse(truth: Network, inferred: Network) -> float:
    """Mean squared weight error over the union of true and inferred edge positions."""
    _check_sizes(truth, inferred)
    union = truth.support() | inferred.support()
    if not union:
        return 0.0
    err = [(truth.weight(*e) - inferred.weight(*e)) ** 2 for e in union]
    return float(np.mean(err))


@dataclass
class PRPoint:
    rho: float
    precision: float
    recall: float
    edges_inferred: int
    mse: float = float("nan")


@dataclass
class EvalReport:
    curve: list[PRPoint]
    break_even: float
    extrapolated: bool
    mse_at_true_edge_count: float
    rho_at_true_edge_count: float
    true_edges: int
    networks: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {
            "break_even": self.break_even,
            "extrapolated": self.extrapolated,
            "mse_at_true_edge_count": self.mse_at_true_edge_count,
            "rho_at_true_edge_count": self.rho_at_true_edge_count,
            "true_edges": self.true_edges,
            "curve": [asdict(p) for p in self.curve],
        }

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["rho", "precision", "recall", "edges_inferred"])
            for p in self.curve:
                writer.writerow([repr(p.rho), repr(p.precision), repr(p.recall), p.edges_inferred])


def break_even(points: list[PRPoint]) -> tuple[float, bool]:
    """Value where precision equals recall along a curve sorted by rho.

    Linear interpolation between the first adjacent pair whose
    ``precision - recall`` changes sign.  Without a crossing, the point with
    the smallest gap supplies the mean of its precision and recall and the
    result is flagged as extrapolated.
    """
    if not points:
        raise ValueError("empty curve")
    gaps = [p.precision - p.recall for p in points]
    for k, g in enumerate(gaps):
        if g == 0:
            return points[k].precision, False
    for k in range(len(points) - 1):
        g0, g1 = gaps[k], gaps[k + 1]
        if g0 * g1 < 0:
            t = g0 / (g0 - g1)
            p0, p1 = points[k], points[k + 1]
            return p0.precision + t * (p1.precision - p0.precision), False
    k = int(np.argmin(np.abs(gaps)))
    return 0.5 * (points[k].precision + points[k].recall), True


def default_rho_grid() -> list[float]:
    return [0.0] + [float(r) for r in np.logspace(-2, 3, 20)]


def parse_rho_grid(spec: str) -> list[float]:
    """``log:lo,hi,k`` for k log-spaced values, otherwise a comma-separated list."""
    if spec.startswith("log:"):
        lo, hi, k = spec[4:].split(",")
        return [float(r) for r in np.logspace(np.log10(float(lo)), np.log10(float(hi)), int(k))]
    if spec == "default":
        return default_rho_grid()
    return [float(r) for r in spec.split(",") if r.strip()]


def pr_sweep(cs: CascadeSet, model: TransmissionModel, truth: Network, rho_grid=None,
             opts: SolverOptions | None = None, n_jobs: int | None = None,
             keep_networks: bool = False) -> EvalReport:
    """Infer the network at every rho and score it against ``truth``."""
    rho_grid = default_rho_grid() if rho_grid is None else [float(r) for r in rho_grid]
    if not rho_grid:
        raise ValueError("rho_grid is empty")
    if any(r < 0 for r in rho_grid):
        raise ValueError("rho values must be nonnegative")
    if any(b < a for a, b in zip(rho_grid, rho_grid[1:])):
        raise ValueError("rho_grid must be sorted ascending")
    if truth.n != cs.n:
        raise ValueError(f"node count mismatch: truth has {truth.n}, cascades have {cs.n}")
    opts = opts or SolverOptions()
    subproblems = build_subproblems(cs, model)
    curve, nets = [], {}
    for rho in rho_grid:
        net, _ = infer_network(cs, model, replace(opts, rho=rho), n_jobs=n_jobs,
                               subproblems=subproblems)
        p, r = precision_recall(truth, net)
        curve.append(PRPoint(rho, p, r, net.n_edges, mse(truth, net)))
        nets[rho] = net
        logger.info("rho=%g: %d edges, precision %.4f, recall %.4f", rho, net.n_edges, p, r)
    counts = [p.edges_inferred for p in curve]
    if any(b > a for a, b in zip(counts, counts[1:])):
        logger.warning("inferred edge count is not monotone in rho: %s", counts)
    be, extrapolated = break_even(curve)
    # first point whose edge count is nearest the truth
    k = int(np.argmin([abs(p.edges_inferred - truth.n_edges) for p in curve]))
    return EvalReport(curve, be, extrapolated, curve[k].mse, curve[k].rho, truth.n_edges,
                      nets if keep_networks else {})

