"""Pose-graph data model and assembly of the sparse connection matrices.

Vertex ids on :class:`PoseGraph` edges are 1-based (1..n); array-like
containers (rotation stacks, block indices of :class:`SparseBlockMatrix` and
:class:`BlockDiagonal`) are 0-based, so vertex ``i`` owns block ``i - 1``.

All containers are immutable after construction; concurrent reads are safe.
Matrix-vector products go through a cached CSR matrix, which keeps the
reduction order fixed and the results deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Mapping, NamedTuple

import numpy as np
import scipy.sparse as sparse

from .errors import (
    GraphAcyclicityError,
    GraphConnectivityError,
    ValidationError,
)
from .validation import check_rotation

_SYMMETRY_TOL = 1e-14
_BLOCK_SYMMETRY_TOL = 1e-12


class Edge(NamedTuple):
    """Measurement edge: rotation of frame ``j`` expressed in frame ``i``."""

    i: int
    j: int
    rotation: np.ndarray
    weight: float = 1.0


@dataclass(frozen=True)
class PoseGraph:
    """Undirected measurement graph over ``n_vertices`` orientation states.

    Edges carry the measured relative rotation for the ordered pair written
    on them; the reverse direction is implied by transposition.  Construction
    validates vertex ids, simplicity (no self-loops, at most one edge per
    unordered pair), rotation validity, connectivity, and the presence of at
    least one cycle.  Acyclic inputs are rejected because on a tree the
    measurements can be chained exactly along paths from an anchor; there is
    nothing to optimize.
    """

    n_vertices: int
    edges: tuple[Edge, ...]

    def __init__(self, n_vertices: int, edges):
        n = int(n_vertices)
        if n < 2:
            raise ValidationError(f"n_vertices must be at least 2, got {n_vertices!r}")

        pairs: list[tuple[int, int, float]] = []
        rotations: list[np.ndarray] = []
        seen: set[tuple[int, int]] = set()
        dim = None
        for index, raw in enumerate(edges):
            i, j, rotation = raw[0], raw[1], raw[2]
            weight = float(raw[3]) if len(raw) > 3 else 1.0
            i, j = int(i), int(j)
            if not (1 <= i <= n and 1 <= j <= n):
                raise ValidationError(f"edge {index}: vertex ids must lie in 1..{n}, got ({i}, {j})")
            if i == j:
                raise ValidationError(f"edge {index}: self-loops are not allowed (vertex {i})")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise ValidationError(f"edge {index}: duplicate edge for pair {key}")
            seen.add(key)
            rot = np.asarray(rotation, dtype=float)
            if rot.ndim != 2 or rot.shape[0] != rot.shape[1] or rot.shape[0] not in (2, 3):
                raise ValidationError(f"edge {index}: rotation must be 2x2 or 3x3, got {rot.shape}")
            if dim is None:
                dim = rot.shape[0]
            elif rot.shape[0] != dim:
                raise ValidationError(f"edge {index}: mixed rotation dimensions {dim} and {rot.shape[0]}")
            if not np.isfinite(weight) or weight < 0:
                raise ValidationError(f"edge {index}: weight must be nonnegative, got {weight!r}")
            pairs.append((i, j, weight))
            rotations.append(rot)

        if not pairs:
            raise ValidationError("pose graph needs at least one edge")

        stacked = np.stack(rotations)
        if not self._stack_is_valid(stacked):
            # slow path just to name the offending edge
            for index, rot in enumerate(rotations):
                check_rotation(rot, name=f"edge {index} rotation")

        normalized = []
        for (i, j, weight), rot in zip(pairs, rotations):
            rot = rot.copy()
            rot.flags.writeable = False
            normalized.append(Edge(i, j, rot, weight))
        object.__setattr__(self, "n_vertices", n)
        object.__setattr__(self, "edges", tuple(normalized))
        self._check_connected()
        self._check_cyclic()

    @staticmethod
    def _stack_is_valid(stacked: np.ndarray) -> bool:
        if not np.all(np.isfinite(stacked)):
            return False
        eye = np.eye(stacked.shape[1])
        defect = np.max(np.abs(np.einsum("nij,nik->njk", stacked, stacked) - eye))
        if defect > 1e-12:
            return False
        return bool(np.max(np.abs(np.linalg.det(stacked) - 1.0)) <= 1e-12)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def dim(self) -> int:
        """Block dimension p of the rotations (2 or 3)."""
        return self.edges[0].rotation.shape[0]

    def neighbors(self) -> list[list[int]]:
        """Adjacency lists over 1-based vertex ids."""
        adj: list[list[int]] = [[] for _ in range(self.n_vertices + 1)]
        for edge in self.edges:
            adj[edge.i].append(edge.j)
            adj[edge.j].append(edge.i)
        return adj

    def _check_connected(self) -> None:
        adj = self.neighbors()
        seen = {1}
        stack = [1]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        if len(seen) != self.n_vertices:
            missing = sorted(set(range(1, self.n_vertices + 1)) - seen)
            raise GraphConnectivityError(
                f"graph is disconnected; vertices unreachable from 1: {missing[:10]}"
            )

    def _check_cyclic(self) -> None:
        # Connected and simple, so a cycle exists iff m >= n.
        if self.n_edges < self.n_vertices:
            raise GraphAcyclicityError(
                "graph has no cycle (it is a spanning tree); compose the measurements "
                "along tree paths from an anchor vertex for the exact closed form"
            )


class SparseBlockMatrix:
    """Symmetric ``np x np`` matrix stored as p x p blocks on graph edges.

    ``blocks`` maps 0-based pairs ``(a, b)`` with ``a <= b`` to the block in
    the upper triangle; the lower-triangle partner is its transpose.
    Off-diagonal sparsity follows the edge set; diagonal blocks are optional
    and must be symmetric so the full matrix is symmetric to roundoff.
    """

    def __init__(self, n: int, p: int, blocks: Mapping[tuple[int, int], np.ndarray],
                 validate: bool = True,
                 _csr: sparse.csr_matrix | None = None):
        self.n = int(n)
        self.p = int(p)
        store: dict[tuple[int, int], np.ndarray] = {}
        for (a, b), block in blocks.items():
            a, b = int(a), int(b)
            arr = np.asarray(block, dtype=float)
            if arr.shape != (self.p, self.p):
                raise ValidationError(f"block ({a}, {b}) has shape {arr.shape}, expected ({p}, {p})")
            if validate:
                if not (0 <= a < self.n and 0 <= b < self.n):
                    raise ValidationError(f"block index ({a}, {b}) out of range for n={n}")
                if not np.all(np.isfinite(arr)):
                    raise ValidationError(f"block ({a}, {b}) contains non-finite entries")
            if a > b:
                a, b, arr = b, a, arr.T
            if a == b and validate and np.max(np.abs(arr - arr.T)) > _SYMMETRY_TOL:
                raise ValidationError(f"diagonal block ({a}, {a}) is not symmetric")
            if (a, b) in store:
                raise ValidationError(f"block ({a}, {b}) specified twice")
            arr = arr.copy()
            arr.flags.writeable = False
            store[(a, b)] = arr
        self._blocks = store
        self._csr = _csr

    @property
    def shape(self) -> tuple[int, int]:
        size = self.n * self.p
        return (size, size)

    def block(self, a: int, b: int) -> np.ndarray:
        """Block ``(a, b)`` of the full symmetric matrix (zeros if absent)."""
        if a <= b:
            stored = self._blocks.get((a, b))
            return stored if stored is not None else np.zeros((self.p, self.p))
        stored = self._blocks.get((b, a))
        return stored.T if stored is not None else np.zeros((self.p, self.p))

    def items(self) -> Iterator[tuple[tuple[int, int], np.ndarray]]:
        """Stored upper-triangle blocks, diagonal included."""
        return iter(self._blocks.items())

    def to_csr(self) -> sparse.csr_matrix:
        if self._csr is None:
            p = self.p
            rows, cols, vals = [], [], []
            grid = np.indices((p, p))
            for (a, b), block in self._blocks.items():
                rows.append((grid[0] + a * p).ravel())
                cols.append((grid[1] + b * p).ravel())
                vals.append(block.ravel())
                if a != b:
                    rows.append((grid[0] + b * p).ravel())
                    cols.append((grid[1] + a * p).ravel())
                    vals.append(block.T.ravel())
            size = self.n * p
            if rows:
                coo = sparse.coo_matrix(
                    (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                    shape=(size, size),
                )
            else:
                coo = sparse.coo_matrix((size, size))
            self._csr = coo.tocsr()
        return self._csr

    def to_dense(self) -> np.ndarray:
        return self.to_csr().toarray()

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """Product with a vector ``(np,)`` or a tall matrix ``(np, k)``."""
        return self.to_csr() @ x

    def with_diagonal_shift(self, c: float) -> "SparseBlockMatrix":
        """New matrix equal to ``self + c * I``."""
        shifted = dict(self._blocks)
        eye = c * np.eye(self.p)
        for a in range(self.n):
            key = (a, a)
            shifted[key] = shifted[key] + eye if key in shifted else eye
        return SparseBlockMatrix(self.n, self.p, shifted, validate=False)


class BlockDiagonal:
    """Block-diagonal matrix of ``n`` symmetric p x p blocks."""

    def __init__(self, blocks, validate: bool = True):
        arr = np.asarray(blocks, dtype=float)
        if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
            raise ValidationError(f"blocks must have shape (n, p, p), got {arr.shape}")
        if validate:
            if not np.all(np.isfinite(arr)):
                raise ValidationError("blocks contain non-finite entries")
            defect = np.max(np.abs(arr - arr.transpose(0, 2, 1)))
            if defect > _BLOCK_SYMMETRY_TOL:
                raise ValidationError(f"blocks are not symmetric within {_BLOCK_SYMMETRY_TOL:g} "
                                      f"(defect {defect:.3e})")
        arr = arr.copy()
        arr.flags.writeable = False
        self._blocks = arr

    @classmethod
    def from_degrees(cls, degrees, p: int) -> "BlockDiagonal":
        d = np.asarray(degrees, dtype=float)
        return cls(d[:, None, None] * np.eye(p)[None, :, :], validate=False)

    @property
    def blocks(self) -> np.ndarray:
        return self._blocks

    @property
    def n(self) -> int:
        return self._blocks.shape[0]

    @property
    def p(self) -> int:
        return self._blocks.shape[1]

    def trace(self) -> float:
        # exact summation: monotonicity checks compare traces to tiny slack
        return math.fsum(np.einsum("nii->ni", self._blocks).ravel())

    def to_dense(self) -> np.ndarray:
        size = self.n * self.p
        out = np.zeros((size, size))
        for a in range(self.n):
            out[a * self.p:(a + 1) * self.p, a * self.p:(a + 1) * self.p] = self._blocks[a]
        return out


def block_diag_minus(diagonal: BlockDiagonal, matrix: SparseBlockMatrix) -> SparseBlockMatrix:
    """The symmetric block matrix ``diagonal - matrix``."""
    if diagonal.n != matrix.n or diagonal.p != matrix.p:
        raise ValidationError(
            f"shape mismatch: diagonal is ({diagonal.n}, {diagonal.p}), "
            f"matrix is ({matrix.n}, {matrix.p})"
        )
    blocks: dict[tuple[int, int], np.ndarray] = {}
    for (a, b), block in matrix.items():
        blocks[(a, b)] = -block
    for a in range(diagonal.n):
        key = (a, a)
        base = blocks.get(key)
        blocks[key] = diagonal.blocks[a] if base is None else diagonal.blocks[a] + base
    # assemble the CSR arithmetically; much cheaper than per-block indexing
    csr = (_block_diag_csr(diagonal.blocks) - matrix.to_csr()).tocsr()
    return SparseBlockMatrix(matrix.n, matrix.p, blocks, validate=False, _csr=csr)


def _block_diag_csr(blocks: np.ndarray) -> sparse.csr_matrix:
    n, p, _ = blocks.shape
    indptr = np.arange(0, n * p * p + 1, p)
    indices = np.repeat(np.arange(n), p * p).reshape(n, p, p) * p + np.arange(p)
    return sparse.csr_matrix(
        (blocks.ravel(), indices.ravel(), indptr), shape=(n * p, n * p)
    )


def assemble_connection(graph: PoseGraph) -> tuple[SparseBlockMatrix, BlockDiagonal, SparseBlockMatrix]:
    """Connection adjacency, degree matrix, and connection Laplacian.

    The adjacency holds ``weight * rotation`` on each edge block; the degree
    matrix holds ``d_i = sum of incident weights`` times the identity; the
    Laplacian is their difference, blockwise exact by construction.
    """
    p = graph.dim
    degrees = np.zeros(graph.n_vertices)
    adjacency_blocks: dict[tuple[int, int], np.ndarray] = {}
    laplacian_blocks: dict[tuple[int, int], np.ndarray] = {}
    for edge in graph.edges:
        a, b = edge.i - 1, edge.j - 1
        block = edge.weight * edge.rotation
        if a > b:
            a, b, block = b, a, block.T
        adjacency_blocks[(a, b)] = block
        laplacian_blocks[(a, b)] = -block
        degrees[a] += edge.weight
        degrees[b] += edge.weight
    eye = np.eye(p)
    for a in range(graph.n_vertices):
        laplacian_blocks[(a, a)] = degrees[a] * eye
    adjacency = SparseBlockMatrix(graph.n_vertices, p, adjacency_blocks, validate=False)
    degree = BlockDiagonal.from_degrees(degrees, p)
    laplacian = SparseBlockMatrix(graph.n_vertices, p, laplacian_blocks, validate=False)
    return adjacency, degree, laplacian


def scalar_laplacian(graph: PoseGraph) -> np.ndarray:
    """Weighted scalar graph Laplacian (dense, n x n)."""
    n = graph.n_vertices
    lap = np.zeros((n, n))
    for edge in graph.edges:
        a, b = edge.i - 1, edge.j - 1
        lap[a, b] -= edge.weight
        lap[b, a] -= edge.weight
        lap[a, a] += edge.weight
        lap[b, b] += edge.weight
    return lap


def fiedler_value(graph: PoseGraph) -> float:
    """Second-smallest eigenvalue of the scalar graph Laplacian.

    Equals the (p+1)-th smallest eigenvalue of the noiseless connection
    Laplacian, whose spectrum is the scalar one with every eigenvalue
    repeated p times.  Dense eigendecomposition; fine at the vertex counts
    this package targets.
    """
    eigenvalues = np.linalg.eigvalsh(scalar_laplacian(graph))
    return float(eigenvalues[1])


def quadratic_form(matrix: SparseBlockMatrix, stack: np.ndarray) -> float:
    """``<X, M X>`` for a block stack ``X`` of shape (n, p, p) or (n*p, p)."""
    tall = np.asarray(stack, dtype=float)
    if tall.ndim == 3:
        tall = tall.reshape(matrix.n * matrix.p, matrix.p)
    return float(np.sum(tall * matrix.matvec(tall)))


def operator_norm(matrix, tol: float = 1e-8, seed: int = 0, max_iterations: int = 50_000) -> float:
    """Spectral norm of a symmetric operator by power iteration.

    Applies the operator twice per step so paired eigenvalues of opposite
    sign cannot stall the iteration; stops when the estimate is stable to
    ``tol`` relative.
    """
    op = matrix.to_csr() if isinstance(matrix, SparseBlockMatrix) else sparse.csr_matrix(matrix)
    size = op.shape[0]
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(size)
    v /= np.linalg.norm(v)
    estimate = 0.0
    for _ in range(max_iterations):
        w = op @ v
        norm_w = float(np.linalg.norm(w))
        if norm_w == 0.0:
            return 0.0
        u = op @ w
        norm_u = float(np.linalg.norm(u))
        new_estimate = norm_u / norm_w
        if norm_u == 0.0:
            return norm_w
        v = u / norm_u
        if abs(new_estimate - estimate) <= tol * max(new_estimate, 1e-300):
            return new_estimate
        estimate = new_estimate
    return estimate


def spectral_norm_diff(a: SparseBlockMatrix, b: SparseBlockMatrix, tol: float = 1e-8) -> float:
    """Largest singular value of ``a - b`` via power iteration."""
    if a.n != b.n or a.p != b.p:
        raise ValidationError(f"pattern mismatch: ({a.n}, {a.p}) vs ({b.n}, {b.p})")
    return operator_norm(a.to_csr() - b.to_csr(), tol=tol)
