"""Input coercion shared by the estimator and the command line."""

from __future__ import annotations

from collections.abc import Mapping
from os import PathLike

from .diffusion import (CascadeSet, TransmissionModel, cascades_from_mapping, parse_model,
                        read_cascades)
from .graph import Network, read_network


def check_cascades(X, n_nodes: int | None = None) -> CascadeSet:
    """Accept a CascadeSet, a cascade file path, or ``{id: {node: time}}``."""
    if isinstance(X, CascadeSet):
        cs = X
    elif isinstance(X, (str, PathLike)):
        cs = read_cascades(X)
    elif isinstance(X, Mapping):
        if n_nodes is None:
            nodes = [v for c in X.values() for v in c]
            n_nodes = max(nodes) + 1 if nodes else 0
        cs = cascades_from_mapping(X, n_nodes)
    else:
        raise TypeError(f"cannot interpret {type(X).__name__} as a cascade set")
    if n_nodes is not None and cs.n != n_nodes:
        raise ValueError(f"cascade set has {cs.n} nodes, expected {n_nodes}")
    for c in cs.cascades:
        zeros = [v for v, t in c.times.items() if t == 0]
        if len(c.times) and len(zeros) != 1:
            raise ValueError(f"cascade {c.id} must have exactly one time-0 node, has {len(zeros)}")
        if any(t < 0 for t in c.times.values()):
            raise ValueError(f"cascade {c.id} has a negative infection time")
    return cs


def check_network(net) -> Network:
    if isinstance(net, Network):
        return net
    if isinstance(net, (str, PathLike)):
        return read_network(net)
    return Network.from_dense(net)


def check_transmission_model(model) -> TransmissionModel:
    if isinstance(model, str):
        return parse_model(model)
    if hasattr(model, "pdf") and hasattr(model, "ppf"):
        return model
    raise TypeError(f"not a transmission model: {model!r}")
