"""Scikit-learn style estimator front end.

Thin fit-shaped wrappers over the functional solvers so the algorithms
compose with the wider ecosystem (``get_params``/``set_params``, cloning,
pipeline-style configuration).  Constructor arguments are stored verbatim;
all derived quantities land in trailing-underscore attributes during
``fit``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .geom import random_rotation
from .graph import PoseGraph, assemble_connection
from .solver import (
    SolveOptions,
    gpm_iterate,
    phase_sync_solve,
    primal_dual_solve,
    spectral_initialization,
    translation_sync,
)


class RotationSynchronization(BaseEstimator):
    """Certifiable rotation averaging via primal-dual spectral iterations.

    ``fit`` consumes a :class:`~rotavg.graph.PoseGraph` and exposes the
    gauge-fixed absolute rotations as ``rotations_`` (vertex 1 at the
    identity) along with the dual variable, the certificate eigenvalue, and
    the per-iteration trace.
    """

    def __init__(self, max_iterations: int = 100, epsilon: float = 1e-15,
                 sigma: float = -1e-3, eig_tol: float = 1e-14,
                 eig_strategy: str = "auto"):
        self.max_iterations = max_iterations
        self.epsilon = epsilon
        self.sigma = sigma
        self.eig_tol = eig_tol
        self.eig_strategy = eig_strategy

    def _options(self) -> SolveOptions:
        return SolveOptions(max_iterations=self.max_iterations, epsilon=self.epsilon,
                            sigma=self.sigma, eig_tol=self.eig_tol,
                            eig_strategy=self.eig_strategy)

    def fit(self, graph: PoseGraph, y=None) -> "RotationSynchronization":
        result = primal_dual_solve(graph, self._options())
        self.rotations_ = result.state.rotations
        self.dual_ = result.state.dual
        self.cost_ = result.state.cost
        self.lambda_min_ = result.state.lambda_min
        self.n_iterations_ = result.state.iteration
        self.certified_ = result.certified
        self.converged_ = result.converged
        self.trace_ = result.trace
        return self

    def fit_transform(self, graph: PoseGraph, y=None) -> np.ndarray:
        """Fit and return the (n, p, p) stack of absolute rotations."""
        return self.fit(graph).rotations_


class GeneralizedPowerMethod(BaseEstimator):
    """Projected power iterations with dual-iterate tracking.

    ``init`` selects the starting stack: ``"spectral"`` for the spectral
    estimate, ``"random"`` for seeded Haar-uniform rotations; an explicit
    stack passed to ``fit`` overrides both.
    """

    def __init__(self, max_iterations: int = 100, init: str = "spectral",
                 seed: int = 0, xtol: float = 0.0):
        self.max_iterations = max_iterations
        self.init = init
        self.seed = seed
        self.xtol = xtol

    def fit(self, graph: PoseGraph, initial: np.ndarray | None = None) -> "GeneralizedPowerMethod":
        adjacency, degree, _ = assemble_connection(graph)
        if initial is None:
            if self.init == "spectral":
                initial = spectral_initialization(adjacency, degree)
            elif self.init == "random":
                rng = np.random.default_rng(self.seed)
                initial = np.stack([
                    random_rotation(rng, graph.dim) for _ in range(graph.n_vertices)
                ])
            else:
                raise ValueError(f"unknown init {self.init!r}")
        records = gpm_iterate(adjacency, initial, self.max_iterations, xtol=self.xtol)
        self.trace_ = records
        self.rotations_ = records[-1].rotations
        self.dual_ = records[-1].dual
        self.cost_ = records[-1].cost
        self.n_iterations_ = len(records) - 1
        return self

    def fit_transform(self, graph: PoseGraph, initial: np.ndarray | None = None) -> np.ndarray:
        return self.fit(graph, initial=initial).rotations_


class PhaseSynchronization(BaseEstimator):
    """Primal-dual synchronization over the complex unit circle."""

    def __init__(self, max_iterations: int = 100, epsilon: float = 1e-15,
                 sigma: float = -1e-3, eig_tol: float = 1e-14,
                 eig_strategy: str = "auto", seed: int = 0):
        self.max_iterations = max_iterations
        self.epsilon = epsilon
        self.sigma = sigma
        self.eig_tol = eig_tol
        self.eig_strategy = eig_strategy
        self.seed = seed

    def fit(self, measurements, y=None) -> "PhaseSynchronization":
        options = SolveOptions(max_iterations=self.max_iterations, epsilon=self.epsilon,
                               sigma=self.sigma, eig_tol=self.eig_tol,
                               eig_strategy=self.eig_strategy)
        result = phase_sync_solve(measurements, options, seed=self.seed)
        self.phases_ = result.phases
        self.dual_ = result.dual
        self.lambda_min_ = result.lambda_min
        self.cost_ = result.cost
        self.n_iterations_ = result.iteration
        self.certified_ = result.certified
        self.converged_ = result.converged
        self.trace_ = result.trace
        return self

    def fit_transform(self, measurements, y=None) -> np.ndarray:
        return self.fit(measurements).phases_


class TranslationSynchronization(BaseEstimator):
    """Closed-form least-squares synchronization of positions."""

    def __init__(self, n_vertices: int | None = None):
        self.n_vertices = n_vertices

    def fit(self, measurements, y=None) -> "TranslationSynchronization":
        self.positions_ = translation_sync(measurements, n_vertices=self.n_vertices)
        return self

    def fit_transform(self, measurements, y=None) -> np.ndarray:
        return self.fit(measurements).positions_


def ensure_fitted(estimator) -> None:
    """Raise :class:`sklearn.exceptions.NotFittedError` if never fitted."""
    check_is_fitted(estimator)
