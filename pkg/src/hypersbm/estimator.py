"""Estimator-style front end so the inference pipeline composes with
scikit-learn tooling (get_params/set_params, clone, fit/fit_predict)."""

from __future__ import annotations

import inspect

import numpy as np

from .errors import InputError
from .hypergraph import Hypergraph, truncate
from .em import EmConfig, run_em
from .energy import free_energy
from .mp import MpConfig, run_mp


def check_hypergraph(data, num_nodes=None) -> Hypergraph:
    """Coerce input to a Hypergraph: pass through, or build from an edge list."""
    if isinstance(data, Hypergraph):
        return data
    try:
        edges = [tuple(e) for e in data]
    except TypeError as exc:
        raise InputError("expected a Hypergraph or an iterable of hyperedges") from exc
    if num_nodes is None:
        num_nodes = 1 + max((max(e) for e in edges), default=0)
    return Hypergraph(num_nodes, edges)


class HypergraphBlockModel:
    """Hard-membership block-model clustering of hypergraph nodes.

    fit() learns the community prior and affinity by alternating message
    passing with closed-form parameter updates, keeping the best of
    ``restarts`` runs by free energy.

    Parameters mirror the inference configuration; fitted attributes follow
    the trailing-underscore convention (labels_, marginals_, prior_,
    affinity_, rescaled_affinity_, free_energy_, converged_, n_iter_).
    """

    def __init__(self, n_communities=2, max_size=None, restarts=5, em_iters=50,
                 em_tol=1e-4, dropout=0.25, damping=0.3, mp_iters=2000,
                 mp_tol=1e-6, patience=50, seed=0):
        self.n_communities = n_communities
        self.max_size = max_size
        self.restarts = restarts
        self.em_iters = em_iters
        self.em_tol = em_tol
        self.dropout = dropout
        self.damping = damping
        self.mp_iters = mp_iters
        self.mp_tol = mp_tol
        self.patience = patience
        self.seed = seed

    # -- sklearn-style plumbing -------------------------------------------
    @classmethod
    def _param_names(cls):
        sig = inspect.signature(cls.__init__)
        return [p for p in sig.parameters if p != "self"]

    def get_params(self, deep=True) -> dict:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params) -> "HypergraphBlockModel":
        valid = set(self._param_names())
        for key, value in params.items():
            if key not in valid:
                raise InputError(f"unknown parameter {key!r}")
            setattr(self, key, value)
        return self

    # -- fitting ----------------------------------------------------------
    def _em_config(self) -> EmConfig:
        mp = MpConfig(dropout=self.dropout, damping=self.damping, tol=self.mp_tol,
                      max_iter=self.mp_iters, patience=self.patience, seed=self.seed)
        return EmConfig(num_communities=self.n_communities, tol=self.em_tol,
                        max_iter=self.em_iters, restarts=self.restarts,
                        seed=self.seed, mp=mp)

    def fit(self, hypergraph, y=None) -> "HypergraphBlockModel":
        h = check_hypergraph(hypergraph)
        if self.max_size is not None and self.max_size < h.max_size:
            h = truncate(h, self.max_size)
        result = run_em(h, self._em_config())
        self.result_ = result
        self.prior_ = result.params.prior
        self.affinity_ = result.params.affinity
        self.rescaled_affinity_ = result.params.rescaled
        self.marginals_ = result.marginals
        self.labels_ = result.assignment
        self.free_energy_ = result.free_energy
        self.converged_ = result.converged
        self.n_iter_ = len(result.delta_trace)
        return self

    def fit_predict(self, hypergraph, y=None) -> np.ndarray:
        return self.fit(hypergraph).labels_

    def predict_proba(self) -> np.ndarray:
        self._check_fitted()
        return self.marginals_

    def score(self, hypergraph) -> float:
        """Negative free energy per node of data under the fitted parameters."""
        self._check_fitted()
        h = check_hypergraph(hypergraph)
        params = self.result_.params
        if h.max_size > params.max_size:
            h = truncate(h, params.max_size)
        mp = MpConfig(dropout=self.dropout, damping=self.damping, tol=self.mp_tol,
                      max_iter=self.mp_iters, patience=self.patience, seed=self.seed)
        result = run_mp(h, _rebuild(params, h), mp)
        return -free_energy(h, _rebuild(params, h), result.state).total / h.num_nodes

    def _check_fitted(self):
        if not hasattr(self, "result_"):
            raise InputError("estimator is not fitted; call fit() first")


def _rebuild(params, h):
    from .model import ModelParams

    if params.num_nodes == h.num_nodes and params.max_size == h.max_size:
        return params
    return ModelParams.from_rescaled(params.prior, params.rescaled, h.num_nodes,
                                     max_size=h.max_size)
