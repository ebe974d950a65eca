"""Directed weighted networks: representation, random generators and TSV I/O."""

from __future__ import annotations

import logging
from pathlib import Path
from types import MappingProxyType
from typing import Iterator, Mapping

import numpy as np
from sklearn.utils import check_random_state

logger = logging.getLogger(__name__)


class NetworkFormatError(ValueError):
    """Raised when a network file cannot be parsed."""


class Network:
    """Immutable weighted directed graph on nodes ``0..n-1``.

    ``edges`` maps ordered pairs ``(src, dst)`` to the transmission
    probability from ``src`` to ``dst``.  Self-loops are rejected and every
    weight must lie in ``[0, 1]``.
    """

    __slots__ = ("_n", "_edges")

    def __getstate__(self):
        return self._n, self._edges

    def __setstate__(self, state):
        self._n, self._edges = state

    def __init__(self, n: int, edges: Mapping[tuple[int, int], float] | None = None):
        n = int(n)
        if n < 0:
            raise ValueError(f"node count must be nonnegative, got {n}")
        clean: dict[tuple[int, int], float] = {}
        for (src, dst), w in (edges or {}).items():
            src, dst, w = int(src), int(dst), float(w)
            if not (0 <= src < n and 0 <= dst < n):
                raise ValueError(f"edge ({src}, {dst}) out of range for n={n}")
            if src == dst:
                raise ValueError(f"self-loop on node {src}")
            if not 0.0 <= w <= 1.0:
                raise ValueError(f"weight {w!r} of edge ({src}, {dst}) outside [0, 1]")
            clean[(src, dst)] = w
        self._n = n
        self._edges = dict(sorted(clean.items()))

    @property
    def n(self) -> int:
        return self._n

    @property
    def edges(self) -> Mapping[tuple[int, int], float]:
        return MappingProxyType(self._edges)

    @property
    def n_edges(self) -> int:
        return len(self._edges)

    def weight(self, src: int, dst: int) -> float:
        return self._edges.get((src, dst), 0.0)

    def support(self) -> set[tuple[int, int]]:
        """Ordered pairs carrying a strictly positive weight."""
        return {e for e, w in self._edges.items() if w > 0}

    def in_neighbors(self, node: int) -> list[int]:
        return [s for (s, d) in self._edges if d == node]

    def out_neighbors(self, node: int) -> list[int]:
        return [d for (s, d) in self._edges if s == node]

    def to_dense(self) -> np.ndarray:
        A = np.zeros((self._n, self._n))
        for (s, d), w in self._edges.items():
            A[s, d] = w
        return A

    @classmethod
    def from_dense(cls, A: np.ndarray) -> "Network":
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {A.shape}")
        src, dst = np.nonzero(A)
        return cls(A.shape[0], {(int(s), int(d)): float(A[s, d]) for s, d in zip(src, dst)})

    def with_weights(self, weights: Mapping[tuple[int, int], float]) -> "Network":
        return Network(self._n, weights)

    def __iter__(self) -> Iterator[tuple[int, int, float]]:
        for (s, d), w in self._edges.items():
            yield s, d, w

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Network):
            return NotImplemented
        return self._n == other._n and self._edges == other._edges

    def __hash__(self):
        return hash((self._n, tuple(self._edges.items())))

    def __repr__(self) -> str:
        return f"Network(n={self._n}, n_edges={self.n_edges})"


def generate_erdos_renyi(n: int, m: int, random_state=None) -> Network:
    """Directed G(n, m): exactly ``m`` distinct non-loop edges, all weight 1."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    n_pairs = n * (n - 1)
    if not 0 <= m <= n_pairs:
        raise ValueError(f"m={m} must lie in [0, n(n-1)={n_pairs}]")
    rng = check_random_state(random_state)
    picks = rng.choice(n_pairs, size=m, replace=False)
    src = picks // (n - 1) if n > 1 else picks
    off = picks % (n - 1) if n > 1 else picks
    # skip the diagonal: column offsets at or beyond src shift by one
    dst = off + (off >= src)
    return Network(n, {(int(s), int(d)): 1.0 for s, d in zip(src, dst)})


def generate_preferential_attachment(n: int, out_degree: int, random_state=None) -> Network:
    """Grow a directed scale-free graph.

    Node ``v`` arrives and links to ``min(out_degree, v)`` distinct older
    nodes, each picked with probability proportional to its in-degree + 1.
    Edges point from the newcomer to the existing node.
    """
    if out_degree < 1:
        raise ValueError(f"out_degree must be >= 1, got {out_degree}")
    if n <= out_degree:
        raise ValueError(f"n={n} must exceed out_degree={out_degree}")
    rng = check_random_state(random_state)
    in_deg = np.zeros(n)
    edges: dict[tuple[int, int], float] = {}
    for v in range(1, n):
        k = min(out_degree, v)
        chosen: list[int] = []
        while len(chosen) < k:
            p = in_deg[:v] + 1.0
            p[chosen] = 0.0
            target = int(rng.choice(v, p=p / p.sum()))
            chosen.append(target)
        for t in chosen:
            edges[(v, t)] = 1.0
            in_deg[t] += 1
    return Network(n, edges)


def assign_uniform_weights(net: Network, lo: float = 0.05, hi: float = 1.0,
                           random_state=None) -> Network:
    """Draw an independent Uniform[lo, hi) weight for every edge."""
    if not 0.0 <= lo <= hi <= 1.0:
        raise ValueError(f"need 0 <= lo <= hi <= 1, got lo={lo}, hi={hi}")
    rng = check_random_state(random_state)
    pairs = list(net.edges)
    draws = rng.uniform(lo, hi, size=len(pairs))
    return net.with_weights({e: float(w) for e, w in zip(pairs, draws)})


def weights_from_interactions(n: int, counts: Mapping[tuple[int, int], int],
                              xi: float = 0.001, phi: float = 0.05) -> Network:
    """Edge weights ``1 - (1 - phi) * (1 - xi) ** m`` from interaction counts.

    Pairs with zero interactions get no edge; self-interactions are dropped.
    """
    for name, val in (("xi", xi), ("phi", phi)):
        if not 0.0 <= val <= 1.0:
            raise ValueError(f"{name}={val} outside [0, 1]")
    edges = {}
    for (i, j), m in counts.items():
        m = int(m)
        if m < 0:
            raise ValueError(f"negative interaction count {m} for ({i}, {j})")
        if i == j:
            logger.warning("ignoring self-interaction count on node %d", i)
            continue
        if m == 0:
            continue
        edges[(i, j)] = 1.0 - (1.0 - phi) * (1.0 - xi) ** m
    return Network(n, edges)


def write_network(net: Network, path) -> None:
    lines = [f"# nodes={net.n}"]
    lines += [f"{s}\t{d}\t{w:.17g}" for s, d, w in net]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_network(path) -> Network:
    n = None
    edges: dict[tuple[int, int], float] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("nodes="):
                try:
                    n = int(body[len("nodes="):])
                except ValueError:
                    raise NetworkFormatError(f"{path}:{lineno}: bad node count header {raw!r}")
            continue
        if n is None:
            raise NetworkFormatError(f"{path}:{lineno}: edge before '# nodes=<n>' header")
        parts = line.split("\t")
        if len(parts) != 3:
            raise NetworkFormatError(f"{path}:{lineno}: expected 3 tab-separated fields")
        try:
            s, d, w = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise NetworkFormatError(f"{path}:{lineno}: cannot parse {raw!r}")
        if not (0 <= s < n and 0 <= d < n):
            raise NetworkFormatError(f"{path}:{lineno}: node id out of range for n={n}")
        if s == d:
            raise NetworkFormatError(f"{path}:{lineno}: self-loop on node {s}")
        if not 0.0 <= w <= 1.0:
            raise NetworkFormatError(f"{path}:{lineno}: weight {w!r} outside [0, 1]")
        if (s, d) in edges:
            raise NetworkFormatError(f"{path}:{lineno}: duplicate edge ({s}, {d})")
        edges[(s, d)] = w
    if n is None:
        raise NetworkFormatError(f"{path}: missing '# nodes=<n>' header")
    return Network(n, edges)
