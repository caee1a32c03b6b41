"""Synthetic benchmark generators: noisy cycles and random connected graphs.

The noise model perturbs each latent relative rotation on the right by a
rotation whose axis is uniform on the unit sphere (normalized 3-d Gaussian
draw) and whose angle is zero-mean Gaussian with standard deviation
``sigma``.  All randomness flows through ``numpy.random.default_rng(seed)``
with a fixed draw order, so identical inputs reproduce identical problems.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geom
from .cycle import CycleProblem
from .errors import GenerationError, ValidationError
from .graph import (
    PoseGraph,
    SparseBlockMatrix,
    assemble_connection,
    fiedler_value,
    spectral_norm_diff,
)


@dataclass(frozen=True)
class NoiseSpec:
    """Perturbation-angle standard deviation (radians) and PRNG seed."""

    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma >= 0):
            raise ValidationError(f"sigma must be nonnegative, got {self.sigma!r}")


def _noise_rotation(rng: np.random.Generator, sigma: float) -> np.ndarray:
    angle = rng.normal(0.0, sigma)
    axis = rng.standard_normal(3)
    norm = np.linalg.norm(axis)
    while norm < 1e-12:
        axis = rng.standard_normal(3)
        norm = np.linalg.norm(axis)
    return geom.exp_angle_axis(axis / norm, angle)


def _noise_rotations(rng: np.random.Generator, sigma: float, count: int) -> np.ndarray:
    """Batch of noise rotations; draws all angles, then all axes."""
    angles = rng.normal(0.0, sigma, size=count)
    axes = rng.standard_normal((count, 3))
    norms = np.linalg.norm(axes, axis=1)
    for idx in np.flatnonzero(norms < 1e-12):
        while norms[idx] < 1e-12:
            axes[idx] = rng.standard_normal(3)
            norms[idx] = np.linalg.norm(axes[idx])
    axes /= norms[:, None]
    zeros = np.zeros(count)
    k = np.array([
        [zeros, -axes[:, 2], axes[:, 1]],
        [axes[:, 2], zeros, -axes[:, 0]],
        [-axes[:, 1], axes[:, 0], zeros],
    ]).transpose(2, 0, 1)
    sin = np.sin(angles)[:, None, None]
    cos = np.cos(angles)[:, None, None]
    return np.eye(3) + sin * k + (1.0 - cos) * (k @ k)


def make_cycle_problem(n: int, noise: NoiseSpec) -> tuple[CycleProblem, np.ndarray]:
    """Noisy cycle with latent orientations on a circular z-axis trajectory.

    Latent rotation ``i`` (1-based) is a z-rotation by ``2 pi i / n``; the
    measurement on edge ``(i, i+1 mod n)`` is the latent relative rotation
    right-perturbed by the noise model.  Returns the problem and the latent
    stack.
    """
    if n < 3:
        raise ValidationError(f"a cycle needs at least 3 vertices, got {n}")
    rng = np.random.default_rng(noise.seed)
    latent = np.stack([geom.rotation_z(2.0 * np.pi * (i + 1) / n) for i in range(n)])
    measurements = []
    for k in range(n):
        i, j = k, (k + 1) % n
        relative = latent[i] @ latent[j].T
        measurements.append(relative @ _noise_rotation(rng, noise.sigma))
    return CycleProblem(measurements), latent


@dataclass(frozen=True)
class RandomProblem:
    """Generated graph with its latent rotations and binning metrics."""

    graph: PoseGraph
    latent: np.ndarray
    fiedler_value: float
    adjacency_gap: float


def make_random_problem(n: int, edge_density: float, noise: NoiseSpec,
                        max_retries: int = 100) -> RandomProblem:
    """Erdos-Renyi rotation averaging problem, conditioned on having a cycle.

    Edges are drawn independently with probability ``edge_density``; draws
    are repeated (fresh randomness, same generator) until the graph is
    connected with at least one cycle, up to ``max_retries`` attempts.
    Latent rotations are Haar-uniform.  The result carries the graph's
    Fiedler value and the spectral norm of the adjacency perturbation for
    binning recovery statistics.
    """
    if n < 3:
        raise ValidationError(f"need at least 3 vertices, got {n}")
    if not (0.0 < edge_density <= 1.0):
        raise ValidationError(f"edge_density must lie in (0, 1], got {edge_density!r}")
    rng = np.random.default_rng(noise.seed)

    pairs = [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)]
    for _ in range(max_retries):
        mask = rng.random(len(pairs)) < edge_density
        chosen = [pairs[idx] for idx in np.flatnonzero(mask)]
        if len(chosen) < n or not _connected(n, chosen):
            continue
        latent = np.stack([geom.random_rotation(rng) for _ in range(n)])
        left = np.array([i - 1 for i, _ in chosen])
        right = np.array([j - 1 for _, j in chosen])
        relative = latent[left] @ latent[right].transpose(0, 2, 1)
        measured = relative @ _noise_rotations(rng, noise.sigma, len(chosen))
        graph = PoseGraph(n, [(i, j, measured[k]) for k, (i, j) in enumerate(chosen)])
        latent_adjacency = SparseBlockMatrix(
            n, 3, {(int(a), int(b)): relative[k] for k, (a, b) in enumerate(zip(left, right))},
            validate=False,
        )
        adjacency, _, _ = assemble_connection(graph)
        return RandomProblem(
            graph=graph,
            latent=latent,
            fiedler_value=fiedler_value(graph),
            adjacency_gap=spectral_norm_diff(adjacency, latent_adjacency),
        )
    raise GenerationError(
        f"no connected cyclic graph on {n} vertices in {max_retries} draws at "
        f"density {edge_density}; increase the density"
    )


def _connected(n: int, pairs: list[tuple[int, int]]) -> bool:
    adjacency: list[list[int]] = [[] for _ in range(n + 1)]
    for i, j in pairs:
        adjacency[i].append(j)
        adjacency[j].append(i)
    seen = {1}
    stack = [1]
    while stack:
        u = stack.pop()
        for v in adjacency[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == n
