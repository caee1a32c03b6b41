"""Closed forms for rotation averaging on cycle graphs.

A cycle problem is the ordered list of measurements along the cycle
``1 -> 2 -> ... -> n -> 1``.  Traversing the cycle multiplies the
measurements left to right into the cycle error ``E``; its angle ``gamma``
and its n-th roots generate every stationary point of the averaging problem
in closed form, with root 0 giving the global optimum.  The orientation of
the traversal is part of the input: reversing it transposes ``E`` and leaves
all stationary costs unchanged.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import geom
from .errors import OptimalityTieWarning, ValidationError
from .graph import PoseGraph, SparseBlockMatrix, assemble_connection
from .validation import check_rotation, check_rotation_stack

_TIE_TOL = 1e-12


@dataclass(frozen=True)
class CycleProblem:
    """Ordered cycle measurements; entry ``k`` sits on edge ``k+1 -> k+2 mod n``."""

    measurements: tuple[np.ndarray, ...]

    def __init__(self, measurements):
        items = []
        for index, m in enumerate(measurements):
            rot = check_rotation(m, dim=3, name=f"measurement {index}").copy()
            rot.flags.writeable = False
            items.append(rot)
        if len(items) < 3:
            raise ValidationError(f"a cycle needs at least 3 measurements, got {len(items)}")
        object.__setattr__(self, "measurements", tuple(items))

    @property
    def n(self) -> int:
        return len(self.measurements)


@dataclass(frozen=True)
class StationaryPoint:
    """Closed-form stationary point with its root index and cost."""

    index: int
    rotations: np.ndarray
    cost: float


def cycle_error(problem: CycleProblem) -> np.ndarray:
    """Left-to-right product of the measurements around the cycle."""
    error = np.eye(3)
    for m in problem.measurements:
        error = error @ m
    return error


def to_pose_graph(problem: CycleProblem) -> PoseGraph:
    """The cycle as a pose graph with edges (1,2), (2,3), ..., (n,1)."""
    n = problem.n
    edges = [(k + 1, (k + 1) % n + 1, problem.measurements[k]) for k in range(n)]
    return PoseGraph(n, edges)


def from_pose_graph(graph: PoseGraph) -> CycleProblem:
    """Extract the cycle ordering from a pose graph that is a simple cycle.

    The walk starts at vertex 1 and moves to its smaller-id neighbor first,
    which fixes the traversal orientation deterministically.
    """
    if graph.dim != 3:
        raise ValidationError("cycle closed forms require SO(3) measurements")
    adj = graph.neighbors()
    degrees = [len(adj[v]) for v in range(1, graph.n_vertices + 1)]
    if any(d != 2 for d in degrees):
        raise ValidationError("graph is not a simple cycle: every vertex must have degree 2")

    by_pair = {}
    for edge in graph.edges:
        by_pair[(edge.i, edge.j)] = edge.rotation
        by_pair[(edge.j, edge.i)] = edge.rotation.T

    order = [1, min(adj[1])]
    while len(order) < graph.n_vertices:
        here, prev = order[-1], order[-2]
        nxt = adj[here][0] if adj[here][0] != prev else adj[here][1]
        order.append(nxt)
    measurements = [
        by_pair[(order[k], order[(k + 1) % graph.n_vertices])]
        for k in range(graph.n_vertices)
    ]
    return CycleProblem(measurements)


def closed_form_stationary(problem: CycleProblem, k: int) -> StationaryPoint:
    """Stationary point generated by the k-th root of the cycle error.

    Vertex 1 is anchored at the identity and vertex ``i`` is the transposed
    prefix product of measurements times the (i-1)-th power of root ``k``.
    The cost is ``-2 n tr(root_k)``.  ``k = 0`` is the global optimum; when
    the cycle error's angle is exactly pi the roots ``0`` and ``n - 1`` tie
    in residual magnitude and a :class:`OptimalityTieWarning` is emitted.
    """
    n = problem.n
    if not (0 <= int(k) < n):
        raise ValidationError(f"root index must lie in 0..{n - 1}, got {k!r}")
    k = int(k)
    error = cycle_error(problem)
    root = geom.nth_roots(error, n)[k]
    if k == 0 and abs(abs(geom.angle_axis_of(error).angle) - np.pi) <= _TIE_TOL:
        warnings.warn(
            "cycle error angle is pi: roots 0 and n-1 tie in residual magnitude; "
            "returning root 0 by convention",
            OptimalityTieWarning,
            stacklevel=2,
        )

    rotations = np.empty((n, 3, 3))
    rotations[0] = np.eye(3)
    prefix = np.eye(3)  # measurement product 1 -> i
    power = np.eye(3)  # root^(i-1)
    for i in range(1, n):
        prefix = prefix @ problem.measurements[i - 1]
        power = power @ root
        rotations[i] = prefix.T @ power
    cost = -2.0 * n * float(np.trace(root))
    return StationaryPoint(index=k, rotations=rotations, cost=cost)


def change_of_basis(problem: CycleProblem) -> tuple[np.ndarray, SparseBlockMatrix]:
    """Basis that concentrates the cycle error onto a single edge.

    Returns the block-diagonal rotation stack ``U`` (``U[0] = I``,
    ``U[i] = m_{i-1}^T U[i-1]``) and the transformed adjacency
    ``U^T A U``, whose adjacent blocks are identities and whose corner block
    carries the full cycle error.
    """
    n = problem.n
    basis = np.empty((n, 3, 3))
    basis[0] = np.eye(3)
    for i in range(1, n):
        basis[i] = problem.measurements[i - 1].T @ basis[i - 1]

    adjacency, _, _ = assemble_connection(to_pose_graph(problem))
    blocks = {
        (a, b): basis[a].T @ block @ basis[b]
        for (a, b), block in adjacency.items()
    }
    return basis, SparseBlockMatrix(n, 3, blocks, validate=False)


def residual_equidistribution_check(point, problem: CycleProblem) -> tuple[float, float]:
    """Common residual angle and its worst-case spread over the edges.

    Each edge residual ``m_ij R_j R_i^T`` is transported into the
    error-concentrating basis, where at a stationary point every one equals
    the same root of the cycle error; the signed angle is measured about the
    cycle error's axis.  Returns ``(mean angle, max deviation from it)``.
    For a stationary point of index ``k`` the mean is
    ``gamma/n - 2*k*pi/n`` (wrapped) and the deviation is at roundoff level.
    """
    rotations = getattr(point, "rotations", point)
    rotations = check_rotation_stack(rotations, n=problem.n, dim=3)
    axis = geom.angle_axis_of(cycle_error(problem)).axis
    basis, _ = change_of_basis(problem)

    n = problem.n
    angles = np.empty(n)
    for k in range(n):
        i, j = k, (k + 1) % n
        residual = problem.measurements[k] @ rotations[j] @ rotations[i].T
        transported = basis[i].T @ residual @ basis[i]
        angles[k] = geom.signed_angle_about(transported, axis)
    mean = float(np.mean(angles))
    return mean, float(np.max(np.abs(angles - mean)))


def adjacency_spectrum(problem: CycleProblem) -> np.ndarray:
    """Closed-form spectrum of the cycle's connection adjacency, sorted.

    Two families indexed by ``k``: ``2 cos(gamma/n - 2 k pi / n)`` with
    multiplicity two each, and ``2 cos(2 k pi / n)`` with multiplicity one,
    for ``3 n`` values in total.
    """
    n = problem.n
    gamma = geom.angle_axis_of(cycle_error(problem)).angle
    k = np.arange(n)
    doubled = 2.0 * np.cos(gamma / n - 2.0 * np.pi * k / n)
    single = 2.0 * np.cos(2.0 * np.pi * k / n)
    return np.sort(np.concatenate([doubled, doubled, single]))
