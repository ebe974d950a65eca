"""Transmission-time models, SI cascade simulation and cascade files."""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np
from sklearn.utils import check_random_state

from .graph import Network

logger = logging.getLogger(__name__)

# smallest time a non-seed node may carry after noise is added
MIN_POSITIVE_TIME = np.finfo(float).tiny


class CascadeFormatError(ValueError):
    """Raised when a cascade file cannot be parsed."""


# ---------------------------------------------------------------------------
# transmission-time models


@dataclass(frozen=True)
class Exponential:
    rate: float = 1.0

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError(f"rate must be positive, got {self.rate}")

    def pdf(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t >= 0, self.rate * np.exp(-self.rate * np.maximum(t, 0.0)), 0.0)

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t >= 0, -np.expm1(-self.rate * np.maximum(t, 0.0)), 0.0)

    def ppf(self, u):
        return -np.log1p(-np.asarray(u, dtype=float)) / self.rate


@dataclass(frozen=True)
class PowerLaw:
    """Pareto density ``(alpha-1) t_min^(alpha-1) t^-alpha`` on ``t >= t_min``."""

    alpha: float = 2.0
    t_min: float = 1.0

    def __post_init__(self):
        if not self.alpha > 1:
            raise ValueError(f"alpha must exceed 1, got {self.alpha}")
        if not self.t_min > 0:
            raise ValueError(f"t_min must be positive, got {self.t_min}")

    def pdf(self, t):
        t = np.asarray(t, dtype=float)
        a, m = self.alpha, self.t_min
        safe = np.maximum(t, m)
        return np.where(t >= m, (a - 1.0) * m ** (a - 1.0) * safe ** (-a), 0.0)

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        safe = np.maximum(t, self.t_min)
        return np.where(t >= self.t_min, 1.0 - (safe / self.t_min) ** (1.0 - self.alpha), 0.0)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        return self.t_min * (1.0 - u) ** (-1.0 / (self.alpha - 1.0))


@dataclass(frozen=True)
class Weibull:
    scale: float = 9.5
    shape: float = 2.3

    def __post_init__(self):
        if not (self.scale > 0 and self.shape > 0):
            raise ValueError(f"scale and shape must be positive, got {self.scale}, {self.shape}")

    def pdf(self, t):
        t = np.asarray(t, dtype=float)
        k, lam = self.shape, self.scale
        z = np.maximum(t, 0.0) / lam
        with np.errstate(divide="ignore", invalid="ignore"):
            val = (k / lam) * z ** (k - 1.0) * np.exp(-(z ** k))
        return np.where(t >= 0, np.nan_to_num(val, posinf=np.inf), 0.0)

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        z = np.maximum(t, 0.0) / self.scale
        return -np.expm1(-(z ** self.shape))

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        return self.scale * (-np.log1p(-u)) ** (1.0 / self.shape)

    @property
    def mean(self) -> float:
        return self.scale * math.gamma(1.0 + 1.0 / self.shape)


TransmissionModel = Exponential | PowerLaw | Weibull


def parse_model(spec: str) -> TransmissionModel:
    """Build a model from ``name:p1[,p2]``, e.g. ``exp:1.0`` or ``weibull:9.5,2.3``."""
    name, _, params = spec.partition(":")
    vals = [float(p) for p in params.split(",") if p.strip()] if params else []
    name = name.strip().lower()
    if name in ("exp", "exponential"):
        return Exponential(*vals)
    if name in ("powerlaw", "pl", "power-law"):
        return PowerLaw(*vals)
    if name in ("weibull", "wb"):
        return Weibull(*vals)
    raise ValueError(f"unknown transmission model {spec!r}")


def format_model(model: TransmissionModel) -> str:
    if isinstance(model, Exponential):
        return f"exp:{model.rate!r}"
    if isinstance(model, PowerLaw):
        return f"powerlaw:{model.alpha!r},{model.t_min!r}"
    return f"weibull:{model.scale!r},{model.shape!r}"


def _as_generator(rng) -> np.random.Generator:
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def density(model: TransmissionModel, t):
    """Transmission-time density; zero outside the support."""
    out = model.pdf(t)
    return float(out) if np.ndim(out) == 0 else out


def sample_delay(model: TransmissionModel, rng, size=None):
    """Inverse-CDF draw(s) of a strictly positive transmission delay."""
    rng = _as_generator(rng)
    d = np.maximum(model.ppf(rng.random(size)), MIN_POSITIVE_TIME)
    return float(d) if size is None else d


# ---------------------------------------------------------------------------
# cascades


@dataclass
class Cascade:
    """Infection times of one contagion; nodes absent from ``times`` were never infected.

    ``infectors`` is simulator-side ground truth (who infected whom).  It is
    never written to disk and does not take part in equality.
    """

    id: int
    times: dict[int, float]
    infectors: dict[int, int] = field(default_factory=dict, compare=False, repr=False)

    @property
    def seed_node(self) -> int:
        return min(self.times, key=self.times.__getitem__)

    def __len__(self) -> int:
        return len(self.times)

    def transmission_delays(self) -> np.ndarray:
        return np.array([self.times[v] - self.times[u] for v, u in self.infectors.items()])


@dataclass
class CascadeSet:
    cascades: list[Cascade]
    n: int

    def __post_init__(self):
        seen = set()
        for c in self.cascades:
            if c.id in seen:
                raise ValueError(f"duplicate cascade id {c.id}")
            seen.add(c.id)
            for v in c.times:
                if not 0 <= v < self.n:
                    raise ValueError(f"node {v} in cascade {c.id} out of range for n={self.n}")

    def __len__(self) -> int:
        return len(self.cascades)

    def __iter__(self):
        return iter(self.cascades)


@dataclass
class GenerationReport:
    n_cascades: int
    coverage: float
    coverage_target: float
    discarded: int
    attempts: int
    warning: bool
    message: str = ""

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _adjacency(net: Network):
    out: list[list[tuple[int, float]]] = [[] for _ in range(net.n)]
    for s, d, w in net:
        if w > 0:
            out[s].append((d, w))
    return [(np.array([d for d, _ in o], dtype=int), np.array([w for _, w in o]))
            for o in out]


def simulate_cascade(net: Network, model: TransmissionModel, seed_node: int,
                     random_state=None, cascade_id: int = 0, _adj=None) -> Cascade:
    """Run one SI cascade from ``seed_node``.

    Every edge out of a newly infected node is tried exactly once; a node's
    infection time is the earliest successful attempt that reaches it.
    """
    if not 0 <= seed_node < net.n:
        raise ValueError(f"seed node {seed_node} out of range for n={net.n}")
    rng = _as_generator(random_state)
    adj = _adj if _adj is not None else _adjacency(net)
    times: dict[int, float] = {}
    infectors: dict[int, int] = {}
    queue = [(0.0, seed_node, -1)]
    while queue:
        t, v, src = heapq.heappop(queue)
        if v in times:
            continue
        times[v] = t
        if src >= 0:
            infectors[v] = src
        targets, weights = adj[v]
        if len(targets) == 0:
            continue
        hit = rng.random(len(targets)) < weights
        delays = sample_delay(model, rng, size=len(targets))
        for j, d, h in zip(targets, delays, hit):
            if h and int(j) not in times:
                heapq.heappush(queue, (t + float(d), int(j), v))
    return Cascade(cascade_id, times, infectors)


def generate_cascade_set(net: Network, model: TransmissionModel, coverage_target: float = 0.99,
                         max_cascades: int = 10_000, random_state=None):
    """Simulate cascades from uniform random seeds until enough edges transmitted.

    An edge counts as covered once it carried an actual infection.  Cascades
    that never leave their seed are dropped and do not count toward
    ``max_cascades``.  Returns ``(CascadeSet, GenerationReport)``.
    """
    if not 0 < coverage_target <= 1:
        raise ValueError(f"coverage_target must lie in (0, 1], got {coverage_target}")
    if max_cascades < 1:
        raise ValueError(f"max_cascades must be >= 1, got {max_cascades}")
    if isinstance(random_state, (int, np.integer)):
        master = int(random_state)
    else:
        master = int(check_random_state(random_state).randint(0, 2**31 - 1))

    adj = _adjacency(net)
    true_edges = {e for e, w in net.edges.items() if w > 0}
    covered: set[tuple[int, int]] = set()
    cascades: list[Cascade] = []
    discarded = attempts = 0
    max_attempts = 20 * max_cascades

    def coverage():
        return len(covered) / len(true_edges) if true_edges else 1.0

    while coverage() < coverage_target and len(cascades) < max_cascades and attempts < max_attempts:
        rng = np.random.default_rng([master, attempts])
        attempts += 1
        seed = int(rng.integers(net.n))
        c = simulate_cascade(net, model, seed, rng, cascade_id=len(cascades), _adj=adj)
        if len(c) < 2:
            discarded += 1
            continue
        covered.update((u, v) for v, u in c.infectors.items())
        cascades.append(c)

    cov = coverage()
    warn = cov < coverage_target
    msg = ""
    if warn:
        msg = (f"coverage {cov:.4f} below target {coverage_target} after "
               f"{len(cascades)} cascades ({attempts} attempts)")
        logger.warning(msg)
    report = GenerationReport(len(cascades), cov, coverage_target, discarded, attempts, warn, msg)
    return CascadeSet(cascades, net.n), report


def perturb_times(cs: CascadeSet, sigma: float, random_state=None):
    """Add N(0, sigma^2) noise to every non-seed infection time.

    Perturbed times are clamped to stay positive, so the seed remains the
    unique time-0 node.  Returns the new set and the noise-to-signal ratio:
    mean absolute drawn perturbation over mean transmission time.  The
    transmission time is taken from the simulator's infector record when
    present, otherwise from each node's gap to the cascade's first infection.
    """
    if sigma < 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}")
    rng = check_random_state(random_state)
    out = []
    drawn = []
    signal = []
    for c in cs.cascades:
        seed = c.seed_node
        nodes = sorted(v for v in c.times if v != seed)
        noise = rng.normal(0.0, sigma, size=len(nodes)) if sigma > 0 else np.zeros(len(nodes))
        times = {seed: c.times[seed]}
        for v, e in zip(nodes, noise):
            new = c.times[v] + e if sigma > 0 else c.times[v]
            new = max(new, MIN_POSITIVE_TIME)
            drawn.append(abs(e))
            times[v] = new
        if c.infectors:
            gaps = c.transmission_delays()
        else:
            gaps = np.array([c.times[v] - c.times[seed] for v in nodes])
        if len(gaps):
            signal.append(gaps.mean())
        out.append(Cascade(c.id, times, dict(c.infectors)))
    if sigma == 0 or not drawn:
        ratio = 0.0
    else:
        ratio = float(np.mean(drawn) / np.mean(signal))
    return CascadeSet(out, cs.n), ratio


# ---------------------------------------------------------------------------
# file I/O


def write_cascades(cs: CascadeSet, path) -> None:
    lines = [f"# cascades n={cs.n}"]
    for c in cs.cascades:
        for v, t in sorted(c.times.items(), key=lambda kv: (kv[1], kv[0])):
            lines.append(f"{c.id}\t{v}\t{t:.17g}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_cascades(path) -> CascadeSet:
    n = None
    records: dict[int, dict[int, float]] = {}
    zero_line: dict[int, int] = {}
    first_line: dict[int, int] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("cascades"):
                for tok in body.split()[1:]:
                    if tok.startswith("n="):
                        try:
                            n = int(tok[2:])
                        except ValueError:
                            raise CascadeFormatError(f"{path}:{lineno}: bad header {raw!r}")
            continue
        if n is None:
            raise CascadeFormatError(f"{path}:{lineno}: record before '# cascades n=<n>' header")
        parts = line.split("\t")
        if len(parts) != 3:
            raise CascadeFormatError(f"{path}:{lineno}: expected 3 tab-separated fields")
        try:
            cid, v, t = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise CascadeFormatError(f"{path}:{lineno}: cannot parse {raw!r}")
        if not 0 <= v < n:
            raise CascadeFormatError(f"{path}:{lineno}: node {v} out of range for n={n}")
        if not (t >= 0 and math.isfinite(t)):
            raise CascadeFormatError(f"{path}:{lineno}: invalid infection time {t!r}")
        times = records.setdefault(cid, {})
        first_line.setdefault(cid, lineno)
        if v in times:
            raise CascadeFormatError(f"{path}:{lineno}: duplicate record for node {v} in cascade {cid}")
        if t == 0:
            if cid in zero_line:
                raise CascadeFormatError(
                    f"{path}:{lineno}: cascade {cid} has a second time-0 node "
                    f"(first at line {zero_line[cid]})")
            zero_line[cid] = lineno
        times[v] = t
    if n is None:
        raise CascadeFormatError(f"{path}: missing '# cascades n=<n>' header")
    for cid in records:
        if cid not in zero_line:
            raise CascadeFormatError(
                f"{path}:{first_line[cid]}: cascade {cid} has no time-0 seed node")
    return CascadeSet([Cascade(cid, times) for cid, times in records.items()], n)


def cascades_from_mapping(cascades: Mapping[int, Mapping[int, float]], n: int) -> CascadeSet:
    """Convenience constructor from ``{cascade_id: {node: time}}``."""
    return CascadeSet([Cascade(int(k), {int(v): float(t) for v, t in c.items()})
                       for k, c in cascades.items()], n)
