"""ModelSpec contract and aggregation of per-observation quantities.

A ModelSpec supplies the per-observation log-density together with its
analytic gradient and Hessian in a flat parameter vector.  Aggregation is
a multiplicity-weighted sum in fixed observation order, so results are
deterministic and bit-reproducible.
"""

from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np

from .data import Params, as_vector
from .errors import EvaluationError


class ModelSpec(ABC):
    """A differentiable per-observation log-density family.

    Concrete models define ``param_labels`` (one per coordinate) and
    ``interest_idx`` (indices of the interest block); everything else is
    nuisance.
    """

    param_labels: tuple[str, ...] = ()
    interest_idx: tuple[int, ...] = ()

    @property
    def n_params(self):
        return len(self.param_labels)

    @property
    def nuisance_idx(self):
        interest = set(self.interest_idx)
        return tuple(i for i in range(self.n_params) if i not in interest)

    @abstractmethod
    def log_density(self, obs, params) -> float: ...

    @abstractmethod
    def score(self, obs, params) -> np.ndarray: ...

    @abstractmethod
    def hessian(self, obs, params) -> np.ndarray: ...

    def init_params(self, dataset) -> np.ndarray:
        return np.zeros(self.n_params)

    def make_params(self, values) -> Params:
        return Params(np.asarray(values, float), self.interest_idx, self.param_labels)


def log_likelihood(model, params, dataset) -> float:
    """Multiplicity-weighted total log-likelihood.

    Raises EvaluationError (carrying the offending observation) if any
    per-observation log-density is non-finite.
    """
    theta = as_vector(params)
    total = 0.0
    for obs in dataset.observations:
        val = model.log_density(obs, theta)
        if not np.isfinite(val):
            raise EvaluationError(
                f"non-finite log-density ({val}) at observation {obs}",
                observation=obs,
                params=theta,
            )
        total += obs.multiplicity * val
    return total


def aggregate_score(model, params, dataset) -> np.ndarray:
    theta = as_vector(params)
    total = np.zeros(model.n_params)
    for obs in dataset.observations:
        g = model.score(obs, theta)
        if not np.all(np.isfinite(g)):
            raise EvaluationError(
                f"non-finite score at observation {obs}", observation=obs, params=theta
            )
        total += obs.multiplicity * g
    return total


def aggregate_hessian(model, params, dataset) -> np.ndarray:
    theta = as_vector(params)
    total = np.zeros((model.n_params, model.n_params))
    for obs in dataset.observations:
        h = model.hessian(obs, theta)
        if not np.all(np.isfinite(h)):
            raise EvaluationError(
                f"non-finite Hessian at observation {obs}", observation=obs, params=theta
            )
        total += obs.multiplicity * h
    return 0.5 * (total + total.T)


class FixedSubsetModel(ModelSpec):
    """Adapter exposing a model restricted to a subset of free coordinates,
    with the remaining coordinates pinned.  Used for inner profile
    maximizations (e.g. over the nuisance block at fixed interest)."""

    def __init__(self, base, free_idx, fixed_values):
        self.base = base
        self.free_idx = tuple(free_idx)
        self.fixed_values = np.asarray(fixed_values, float)
        self.param_labels = tuple(base.param_labels[i] for i in self.free_idx)
        self.interest_idx = tuple(range(len(self.free_idx)))

    def _embed(self, params):
        full = self.fixed_values.copy()
        full[list(self.free_idx)] = params
        return full

    def log_density(self, obs, params):
        return self.base.log_density(obs, self._embed(params))

    def score(self, obs, params):
        return self.base.score(obs, self._embed(params))[list(self.free_idx)]

    def hessian(self, obs, params):
        h = self.base.hessian(obs, self._embed(params))
        return h[np.ix_(list(self.free_idx), list(self.free_idx))]
