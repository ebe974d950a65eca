"""scikit-learn style wrapper around the per-node inference."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_cascades, check_transmission_model
from .likelihood import log_likelihood
from .solver import SolverOptions, infer_network


class NetworkInference(BaseEstimator):
    """Recover a weighted directed network from cascade infection times.

    Parameters
    ----------
    transmission : str or model
        Known transmission-time model, e.g. ``"exp:1.0"``.
    rho : float
        Sparsity weight of the ``rho * sum 1/(1-A)`` penalty.
    grad_tol, max_iter, zero_threshold, init_A, diagonal_scaling
        Passed to :class:`SolverOptions`.
    n_jobs : int, optional
        Worker processes for the per-node solves.  Results do not depend on it.

    Attributes
    ----------
    network_ : Network
    adjacency_ : ndarray of shape (n_nodes, n_nodes)
        ``adjacency_[j, i]`` is the inferred probability that j infects i.
    report_ : SolveReport
    n_nodes_ : int
    """

    def __init__(self, transmission="exp:1.0", rho=0.0, grad_tol=1e-6, max_iter=5000,
                 zero_threshold=1e-4, init_A=0.1, diagonal_scaling=True, n_jobs=None):
        self.transmission = transmission
        self.rho = rho
        self.grad_tol = grad_tol
        self.max_iter = max_iter
        self.zero_threshold = zero_threshold
        self.init_A = init_A
        self.diagonal_scaling = diagonal_scaling
        self.n_jobs = n_jobs

    def _options(self) -> SolverOptions:
        return SolverOptions(rho=float(self.rho), grad_tol=self.grad_tol, max_iter=self.max_iter,
                             zero_threshold=self.zero_threshold, init_A=self.init_A,
                             diagonal_scaling=self.diagonal_scaling)

    def fit(self, X, y=None, subproblems=None):
        cs = check_cascades(X)
        model = check_transmission_model(self.transmission)
        self.network_, self.report_ = infer_network(cs, model, self._options(), n_jobs=self.n_jobs,
                                                    subproblems=subproblems)
        self.n_nodes_ = cs.n
        self.adjacency_ = self.network_.to_dense()
        return self

    def score(self, X, y=None) -> float:
        """Log-likelihood of cascades ``X`` under the fitted network."""
        check_is_fitted(self, "network_")
        cs = check_cascades(X, self.n_nodes_)
        return log_likelihood(self.network_, cs, check_transmission_model(self.transmission))

    def predict_proba(self, pairs) -> np.ndarray:
        """Inferred transmission probabilities for ``(src, dst)`` pairs."""
        check_is_fitted(self, "network_")
        pairs = np.asarray(pairs, dtype=int).reshape(-1, 2)
        return self.adjacency_[pairs[:, 0], pairs[:, 1]]
