"""Shared fixtures and independent oracle helpers.

Oracles here recompute quantities through dense linear algebra or explicit
edge sums so package internals are checked against a different code path.
"""

import numpy as np
import pytest

from rotavg import PoseGraph, exp_angle_axis, random_rotation, rotation_z


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def rotation_stack(rng, n, dim=3):
    return np.stack([random_rotation(rng, dim) for _ in range(n)])


def edge_sum_cost(graph: PoseGraph, stack: np.ndarray) -> float:
    """Objective recomputed edge by edge: -2 sum w tr(Rij Rj Ri^T)."""
    total = 0.0
    for edge in graph.edges:
        ri, rj = stack[edge.i - 1], stack[edge.j - 1]
        total += edge.weight * np.trace(edge.rotation @ rj @ ri.T)
    return -2.0 * total


def dense_bottom_eigs(matrix_like, count):
    dense = matrix_like.to_dense() if hasattr(matrix_like, "to_dense") else np.asarray(matrix_like)
    return np.linalg.eigvalsh(dense)[:count]


def noisy_cycle_measurements(rng, n, sigma):
    """Plain generator used as an oracle-side data source (not synth)."""
    latent = np.stack([rotation_z(2 * np.pi * i / n) for i in range(n)])
    measurements = []
    for k in range(n):
        i, j = k, (k + 1) % n
        axis = rng.standard_normal(3)
        axis /= np.linalg.norm(axis)
        noise = exp_angle_axis(axis, rng.normal(0.0, sigma))
        measurements.append(latent[i] @ latent[j].T @ noise)
    return measurements, latent
