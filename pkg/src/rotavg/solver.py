"""Primal-dual rotation averaging, the power-method baseline, and the
phase-synchronization and translation variants.

The primal-dual loop alternates a spectral primal update (the p bottom
eigenvectors of ``dual - adjacency``, gauge-fixed and projected blockwise to
rotations) with a dual update from the blockwise SVD of ``adjacency @ R``,
starting from the degree matrix.  It stops once all p bottom eigenvalues of
the current certificate matrix vanish within ``epsilon``, which is exactly
when the pair becomes primal-dual optimal.

Eigensolver strategy: pass ``eig_strategy="auto"`` (default) to use
shift-invert with the ``sigma`` target on the first round, where the
certificate matrix is a connection Laplacian and hence positive
semidefinite, and the factorization-free fold strategy on later rounds,
where intermediate duals can make it indefinite.  A solve run owns its
state; independent solves may run concurrently.
"""

from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .certify import dual_from_primal
from .eigen import EigenResult, gershgorin_interval, smallest_eigenpairs
from .errors import (
    EigenConvergenceError,
    GraphConnectivityError,
    PhaseProjectionWarning,
    ValidationError,
)
from .geom import project_to_rotation
from .graph import (
    BlockDiagonal,
    PoseGraph,
    SparseBlockMatrix,
    assemble_connection,
    block_diag_minus,
    quadratic_form,
)
from .validation import check_rotation_stack

logger = logging.getLogger(__name__)

_EIG_SEED = 0
_GAUGE_SINGULAR_TOL = 1e-12
_PHASE_ENTRY_TOL = 1e-12


@dataclass(frozen=True)
class SolveOptions:
    """Knobs of the primal-dual loop.

    ``epsilon`` is the stopping tolerance on the bottom eigenvalues of the
    certificate matrix; ``sigma`` is the (negative) eigenvalue target handed
    to the shift-invert eigensolver; ``eig_tol`` is the eigensolver residual
    tolerance relative to the operator's Gershgorin bound, kept a notch
    above the roundoff floor so solves do not abort on unreachable
    accuracy.
    """

    max_iterations: int = 100
    epsilon: float = 1e-15
    sigma: float = -1e-3
    eig_tol: float = 1e-14
    eig_strategy: str = "auto"

    def __post_init__(self):
        if int(self.max_iterations) < 1:
            raise ValidationError(f"max_iterations must be >= 1, got {self.max_iterations!r}")
        if not (self.epsilon > 0):
            raise ValidationError(f"epsilon must be positive, got {self.epsilon!r}")
        if not (self.sigma < 0):
            raise ValidationError(f"sigma must be negative, got {self.sigma!r}")
        if not (self.eig_tol > 0):
            raise ValidationError(f"eig_tol must be positive, got {self.eig_tol!r}")
        if self.eig_strategy not in ("auto", "fold", "shift_invert"):
            raise ValidationError(f"unknown eig_strategy {self.eig_strategy!r}")


@dataclass(frozen=True)
class TraceRecord:
    """One row of the per-iteration convergence trace."""

    iteration: int
    cost: float
    lambda_min: float
    wall_time_ns: int


@dataclass(frozen=True)
class PrimalDualState:
    """Solver state after a primal+dual round.

    In the state a solve returns, ``lambda_min`` is the smallest eigenvalue
    of ``dual - adjacency`` for the state's own dual, so the pair
    ``(rotations, dual)`` and its certificate eigenvalue are mutually
    consistent.  In intermediate states (``record_states=True``) and the
    trace it is the eigenvalue computed by the round's spectral step, i.e.
    of the dual the round started from.  ``rotations[0]`` is the identity
    after the gauge fix.
    """

    rotations: np.ndarray
    dual: BlockDiagonal
    lambda_min: float
    cost: float
    iteration: int


@dataclass(frozen=True)
class SolveResult:
    """Final state, certification verdict, and the full trace."""

    state: PrimalDualState
    certified: bool
    converged: bool
    trace: tuple[TraceRecord, ...]
    iterate_states: tuple[PrimalDualState, ...] = field(default=())


def rotation_cost(adjacency: SparseBlockMatrix, rotations: np.ndarray) -> float:
    """Objective value ``-<R R^T, adjacency>`` of a rotation stack."""
    return -quadratic_form(adjacency, np.asarray(rotations, dtype=float))


def _project_stack(blocks: np.ndarray) -> np.ndarray:
    """Blockwise nearest rotations with determinant correction, batched."""
    u, _, vt = np.linalg.svd(blocks)
    signs = np.where(np.linalg.det(u @ vt) < 0.0, -1.0, 1.0)
    u = u.copy()
    u[..., :, -1] *= signs[..., None]
    return u @ vt


def _resolve_strategy(options: SolveOptions, first_round: bool) -> str:
    if options.eig_strategy != "auto":
        return options.eig_strategy
    # Round one solves a connection Laplacian, which is PSD, so the
    # shift-invert target is guaranteed to sit below the spectrum.  Later
    # rounds track a safe shift from the previous round's spectrum (see
    # _safe_shift); standalone calls with no such history use the fold
    # transform, which keeps the algebraic ordering safe unconditionally.
    return "shift_invert" if first_round else "fold"


def _safe_shift(lambda_pre: float, delta: float, scale: float, epsilon: float) -> float:
    """Shift-invert target guaranteed to sit below the updated spectrum.

    With ``lambda_pre`` the smallest eigenvalue of the previous certificate
    matrix and ``delta`` the spectral norm of the dual step, Weyl's
    inequality bounds the new smallest eigenvalue below by
    ``lambda_pre - delta``; the margin keeps the factorization away from
    singularity while preserving contrast as the iteration converges.
    """
    margin = max(epsilon, 0.05 * (abs(lambda_pre) + delta))
    return min(-1e-9 * max(scale, 1.0), lambda_pre - delta - margin)


def _primal_step(dual: BlockDiagonal, adjacency: SparseBlockMatrix,
                 options: SolveOptions, strategy: str,
                 shift: float | None = None) -> tuple[np.ndarray, EigenResult]:
    n, p = adjacency.n, adjacency.p
    matrix = block_diag_minus(dual, adjacency)
    if shift is None:
        shift = options.sigma
    try:
        result = smallest_eigenpairs(matrix, count=p, shift=shift,
                                     tol=options.eig_tol, strategy=strategy,
                                     seed=_EIG_SEED)
    except EigenConvergenceError:
        if strategy == "fold":
            raise
        # the shifted factorization stalled; the fold transform is slower
        # but cannot misorder the spectrum
        result = smallest_eigenpairs(matrix, count=p, tol=options.eig_tol,
                                     strategy="fold", seed=_EIG_SEED)
    tall = result.eigenvectors
    anchor = tall[:p, :]
    singulars = np.linalg.svd(anchor, compute_uv=False)
    if singulars[-1] < _GAUGE_SINGULAR_TOL:
        # Engineering guard: an ill-conditioned anchor block would amplify
        # noise through the inverse, so gauge with its nearest rotation.
        logger.warning("anchor block near singular (sigma_min=%.3e); "
                       "gauging with its nearest rotation instead", singulars[-1])
        gauge = project_to_rotation(anchor, warn_degenerate=False).T
        fixed = tall @ gauge
    else:
        fixed = np.linalg.solve(anchor.T, tall.T).T
    stack = fixed.reshape(n, p, p)
    rotations = np.empty_like(stack)
    rotations[0] = np.eye(p)
    rotations[1:] = _project_stack(stack[1:])
    return rotations, result


def primal_update(dual: BlockDiagonal, adjacency: SparseBlockMatrix,
                  options: SolveOptions | None = None) -> tuple[np.ndarray, float]:
    """One spectral primal update; returns the stack and the smallest eigenvalue.

    With the default ``"auto"`` strategy a standalone call uses the fold
    transform, since nothing guarantees ``dual - adjacency`` is definite
    here.
    """
    options = options or SolveOptions()
    strategy = options.eig_strategy if options.eig_strategy != "auto" else "fold"
    rotations, result = _primal_step(dual, adjacency, options, strategy)
    return rotations, float(result.eigenvalues[0])


def spectral_initialization(adjacency: SparseBlockMatrix, degree: BlockDiagonal,
                            options: SolveOptions | None = None) -> np.ndarray:
    """Primal update at ``dual = degree``: the classical spectral estimate."""
    options = options or SolveOptions()
    strategy = _resolve_strategy(options, first_round=True)
    rotations, _ = _primal_step(degree, adjacency, options, strategy)
    return rotations


def dual_update(rotations: np.ndarray, adjacency: SparseBlockMatrix) -> BlockDiagonal:
    """Dual estimate from the blockwise SVD of ``adjacency @ R``.

    Block ``i`` is ``U_i S_i U_i^T`` for ``(A R)_i = U_i S_i V_i^T``; each
    block is symmetric positive semidefinite with trace equal to the nuclear
    norm of ``(A R)_i``.
    """
    stack = check_rotation_stack(rotations, n=adjacency.n, dim=adjacency.p)
    n, p = adjacency.n, adjacency.p
    image = adjacency.matvec(stack.reshape(n * p, p)).reshape(n, p, p)
    u, s, _ = np.linalg.svd(image)
    blocks = (u * s[:, None, :]) @ u.transpose(0, 2, 1)
    return BlockDiagonal((blocks + blocks.transpose(0, 2, 1)) / 2.0, validate=False)


def symmetrized_dual_update(rotations: np.ndarray, adjacency: SparseBlockMatrix) -> BlockDiagonal:
    """Alternative dual update: symmetrize ``sum_j A_ij R_j R_i^T`` directly.

    Coincides with :func:`dual_update` at stationary points (both recover
    the exact multiplier) but differs away from them; kept behind the same
    interface for comparison runs.
    """
    return dual_from_primal(rotations, adjacency)


def _dual_step_norm(a: BlockDiagonal, b: BlockDiagonal) -> float:
    """Spectral norm of the block-diagonal difference ``a - b``."""
    step = np.linalg.eigvalsh(a.blocks - b.blocks)
    return float(np.max(np.abs(step))) if step.size else 0.0


def solve_assembled(adjacency: SparseBlockMatrix, degree: BlockDiagonal,
                    options: SolveOptions | None = None,
                    record_states: bool = False) -> SolveResult:
    """Primal-dual loop on pre-assembled matrices; see :func:`primal_dual_solve`.

    Under the ``"auto"`` strategy, round one shift-inverts at ``sigma``
    (safe: the matrix is a PSD connection Laplacian) and every later round
    shift-inverts at the Weyl-tracked target from :func:`_safe_shift`,
    falling back to the fold transform if a factorization stalls.  After the
    loop, the certificate eigenvalue is re-evaluated against the dual being
    returned, so the reported ``lambda_min`` always matches the final pair.
    """
    options = options or SolveOptions()
    auto = options.eig_strategy == "auto"
    _, _, scale = gershgorin_interval(block_diag_minus(degree, adjacency))

    dual_in = degree
    entering_previous = degree
    lambda_entering = np.inf
    trace: list[TraceRecord] = []
    states: list[PrimalDualState] = []
    state: PrimalDualState | None = None
    converged = False
    for iteration in range(1, options.max_iterations + 1):
        started = time.perf_counter_ns()
        if auto:
            strategy = "shift_invert"
            if iteration == 1:
                shift = options.sigma
            else:
                delta = _dual_step_norm(dual_in, entering_previous)
                shift = _safe_shift(lambda_entering, delta, scale, options.epsilon)
        else:
            strategy, shift = options.eig_strategy, options.sigma
        rotations, eig = _primal_step(dual_in, adjacency, options, strategy, shift)
        entering_previous = dual_in
        lambda_entering = float(eig.eigenvalues[0])
        dual_out = dual_update(rotations, adjacency)
        cost = rotation_cost(adjacency, rotations)
        trace.append(TraceRecord(iteration, cost, lambda_entering,
                                 time.perf_counter_ns() - started))
        state = PrimalDualState(rotations=rotations, dual=dual_out,
                                lambda_min=lambda_entering, cost=cost,
                                iteration=iteration)
        if record_states:
            states.append(state)
        dual_in = dual_out
        if float(np.min(np.abs(eig.eigenvalues))) < options.epsilon:
            converged = True
            break
    assert state is not None

    # certificate refresh: the loop's last eigensolve saw the dual entering
    # the round, not the one being returned
    final = block_diag_minus(state.dual, adjacency)
    if options.eig_strategy == "fold":
        refreshed = smallest_eigenpairs(final, count=adjacency.p, tol=options.eig_tol,
                                        strategy="fold", seed=_EIG_SEED)
    else:
        delta = _dual_step_norm(state.dual, entering_previous)
        sigma = _safe_shift(lambda_entering, delta, scale, options.epsilon)
        try:
            refreshed = smallest_eigenpairs(final, count=adjacency.p, shift=sigma,
                                            tol=options.eig_tol,
                                            strategy="shift_invert", seed=_EIG_SEED)
        except EigenConvergenceError:
            refreshed = smallest_eigenpairs(final, count=adjacency.p,
                                            tol=options.eig_tol,
                                            strategy="fold", seed=_EIG_SEED)
    state = replace(state, lambda_min=float(refreshed.eigenvalues[0]))
    return SolveResult(
        state=state,
        certified=bool(state.lambda_min >= -options.epsilon),
        converged=converged,
        trace=tuple(trace),
        iterate_states=tuple(states),
    )


def primal_dual_solve(graph: PoseGraph, options: SolveOptions | None = None,
                      record_states: bool = False) -> SolveResult:
    """Solve rotation averaging on a pose graph with certified optimality.

    Iterates primal and dual updates from the degree matrix until the p
    bottom eigenvalues of the certificate matrix all fall below ``epsilon``
    in magnitude or the iteration budget runs out.  ``certified`` reports
    whether the final ``lambda_min`` is at least ``-epsilon``;
    ``converged`` whether the stopping test fired.  With
    ``record_states=True`` every round's state is kept for diagnostics.
    """
    adjacency, degree, _ = assemble_connection(graph)
    return solve_assembled(adjacency, degree, options, record_states)


# ---------------------------------------------------------------------------
# Generalized power method with dual-iterate tracking


@dataclass(frozen=True)
class GPMRecord:
    """GPM iterate: the stack, its dual estimate, and the cost."""

    rotations: np.ndarray
    dual: BlockDiagonal
    cost: float


def gpm_iterate(adjacency: SparseBlockMatrix, initial: np.ndarray,
                max_iterations: int, xtol: float = 0.0) -> list[GPMRecord]:
    """Fixed-point iterations ``R <- P(adjacency @ R)`` on a raw matrix.

    Each record carries the dual iterate built from the same blockwise SVD
    that produces the next stack, so the trace exposes the method as an
    infeasible primal-dual scheme.  The cost is nonincreasing; the dual
    trace is nondecreasing.  Runs for exactly ``max_iterations`` steps
    unless consecutive stacks agree within ``xtol`` elementwise.
    """
    rotations = check_rotation_stack(initial, n=adjacency.n, dim=adjacency.p)
    n, p = adjacency.n, adjacency.p
    records: list[GPMRecord] = []
    for step in range(max_iterations + 1):
        image = adjacency.matvec(rotations.reshape(n * p, p)).reshape(n, p, p)
        u, s, vt = np.linalg.svd(image)
        blocks = (u * s[:, None, :]) @ u.transpose(0, 2, 1)
        dual = BlockDiagonal((blocks + blocks.transpose(0, 2, 1)) / 2.0, validate=False)
        records.append(GPMRecord(rotations=rotations, dual=dual,
                                 cost=rotation_cost(adjacency, rotations)))
        if step == max_iterations:
            break
        signs = np.where(np.linalg.det(u @ vt) < 0.0, -1.0, 1.0)
        u = u.copy()
        u[..., :, -1] *= signs[..., None]
        advanced = u @ vt
        if xtol and float(np.max(np.abs(advanced - rotations))) <= xtol:
            break
        rotations = advanced
    return records


def gpm_solve(graph: PoseGraph, initial: np.ndarray, max_iterations: int = 100,
              xtol: float = 0.0) -> list[GPMRecord]:
    """Run the generalized power method on a pose graph from a feasible start."""
    adjacency, _, _ = assemble_connection(graph)
    return gpm_iterate(adjacency, initial, max_iterations, xtol=xtol)


# ---------------------------------------------------------------------------
# Phase synchronization on the unit circle


@dataclass(frozen=True)
class PhaseSyncResult:
    """Phase estimates with their diagonal dual and certificate data."""

    phases: np.ndarray
    dual: np.ndarray
    lambda_min: float
    cost: float
    iteration: int
    certified: bool
    converged: bool
    trace: tuple[TraceRecord, ...]
    n_perturbations: int = 0


def _check_phase_measurements(measurements) -> np.ndarray:
    h = np.asarray(measurements, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValidationError(f"measurements must be square, got shape {h.shape}")
    if not np.all(np.isfinite(h)):
        raise ValidationError("measurements contain non-finite entries")
    if np.max(np.abs(h - h.conj().T)) > 1e-10:
        raise ValidationError("measurements must be Hermitian")
    if np.max(np.abs(np.diag(h))) > 1e-12:
        raise ValidationError("measurements must have zero diagonal")
    support = np.abs(h) > 0
    moduli = np.abs(h[support])
    if moduli.size == 0:
        raise ValidationError("measurements have no edges")
    if np.max(np.abs(moduli - 1.0)) > 1e-6:
        raise ValidationError("edge measurements must have unit modulus")
    # connectivity of the measurement support
    n = h.shape[0]
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for v in np.flatnonzero(support[u]):
            if int(v) not in seen:
                seen.add(int(v))
                stack.append(int(v))
    if len(seen) != n:
        raise GraphConnectivityError("measurement support graph is disconnected")
    return h


def phase_sync_solve(measurements, options: SolveOptions | None = None,
                     seed: int = 0) -> PhaseSyncResult:
    """Primal-dual synchronization over the unit circle.

    Mirrors the rotation loop with scalar blocks: one bottom eigenvector of
    ``diag(dual) - measurements`` is computed, normalized entrywise to the
    circle (entries below 1e-12 in magnitude are perturbed and retried,
    with a :class:`PhaseProjectionWarning`), anchored so the first phase is
    one, and the dual becomes the magnitude of the measurement sums.
    """
    options = options or SolveOptions()
    h = _check_phase_measurements(measurements)
    n = h.shape[0]
    dual = np.abs(h).sum(axis=1).real.astype(float)
    rng = np.random.default_rng(seed)
    auto = options.eig_strategy == "auto"
    _, _, scale = gershgorin_interval(np.diag(dual).astype(complex) - h)

    trace: list[TraceRecord] = []
    converged = False
    n_perturbations = 0
    phases = None
    previous_dual = dual
    lambda_min = np.inf
    cost = np.nan
    iteration = 0
    for iteration in range(1, options.max_iterations + 1):
        started = time.perf_counter_ns()
        matrix = np.diag(dual).astype(complex) - h
        if auto:
            strategy = "shift_invert"
            if iteration == 1:
                shift = options.sigma
            else:
                delta = float(np.max(np.abs(dual - previous_dual)))
                shift = _safe_shift(lambda_min, delta, scale, options.epsilon)
        else:
            strategy, shift = options.eig_strategy, options.sigma
        try:
            eig = smallest_eigenpairs(matrix, count=1, shift=shift,
                                      tol=options.eig_tol, strategy=strategy,
                                      seed=_EIG_SEED)
        except EigenConvergenceError:
            if strategy == "fold":
                raise
            eig = smallest_eigenpairs(matrix, count=1, tol=options.eig_tol,
                                      strategy="fold", seed=_EIG_SEED)
        previous_dual = dual
        vector = eig.eigenvectors[:, 0].astype(complex)
        for _ in range(5):
            small = np.abs(vector) < _PHASE_ENTRY_TOL
            if not np.any(small):
                break
            warnings.warn(
                f"{int(np.sum(small))} eigenvector entries below {_PHASE_ENTRY_TOL:g} "
                "before circle projection; perturbing and retrying",
                PhaseProjectionWarning,
                stacklevel=2,
            )
            n_perturbations += 1
            vector = vector + 1e-9 * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
            vector /= np.linalg.norm(vector)
        phases = vector / np.abs(vector)
        phases = phases * np.conj(phases[0])

        cost = -float(np.real(np.conj(phases) @ (h @ phases)))
        dual = np.abs(h @ phases)
        lambda_min = float(eig.eigenvalues[0])
        trace.append(TraceRecord(iteration, cost, lambda_min,
                                 time.perf_counter_ns() - started))
        if abs(lambda_min) < options.epsilon:
            converged = True
            break

    assert phases is not None
    # certificate refresh against the dual being returned, with a Weyl-safe
    # shift, mirroring the rotation solver
    final = np.diag(dual).astype(complex) - h
    if options.eig_strategy == "fold":
        refreshed = smallest_eigenpairs(final, count=1, tol=options.eig_tol,
                                        strategy="fold", seed=_EIG_SEED)
    else:
        delta = float(np.max(np.abs(dual - previous_dual)))
        sigma = _safe_shift(lambda_min, delta, scale, options.epsilon)
        try:
            refreshed = smallest_eigenpairs(final, count=1, shift=sigma,
                                            tol=options.eig_tol,
                                            strategy="shift_invert", seed=_EIG_SEED)
        except EigenConvergenceError:
            refreshed = smallest_eigenpairs(final, count=1, tol=options.eig_tol,
                                            strategy="fold", seed=_EIG_SEED)
    lambda_final = float(refreshed.eigenvalues[0])
    return PhaseSyncResult(
        phases=phases,
        dual=dual,
        lambda_min=lambda_final,
        cost=cost,
        iteration=iteration,
        certified=bool(lambda_final >= -options.epsilon),
        converged=converged,
        trace=tuple(trace),
        n_perturbations=n_perturbations,
    )


# ---------------------------------------------------------------------------
# Euclidean translation synchronization


def translation_sync(measurements, n_vertices: int | None = None) -> np.ndarray:
    """Least-squares positions from relative translation measurements.

    ``measurements`` is an iterable of ``(i, j, t_ij)`` with 1-based vertex
    ids, where ``t_ij`` measures ``t_i - t_j``.  The minimum-norm
    least-squares solution through the signed incidence matrix is returned,
    shifted so vertex 1 sits at the origin.  At the solution every vertex is
    in consensus with its neighbors: the cost gradient vanishes.
    """
    rows = []
    for index, (i, j, vec) in enumerate(measurements):
        i, j = int(i), int(j)
        if i == j:
            raise ValidationError(f"measurement {index}: self-loop at vertex {i}")
        if i < 1 or j < 1:
            raise ValidationError(f"measurement {index}: vertex ids must be >= 1")
        arr = np.asarray(vec, dtype=float).reshape(-1)
        if not np.all(np.isfinite(arr)):
            raise ValidationError(f"measurement {index}: non-finite translation")
        rows.append((i, j, arr))
    if not rows:
        raise ValidationError("no translation measurements given")
    dims = {r[2].shape[0] for r in rows}
    if len(dims) != 1:
        raise ValidationError(f"mixed translation dimensions: {sorted(dims)}")
    dim = dims.pop()
    n = max(max(i, j) for i, j, _ in rows)
    if n_vertices is not None:
        if n_vertices < n:
            raise ValidationError(f"n_vertices={n_vertices} below the largest id {n}")
        n = int(n_vertices)

    incidence = np.zeros((len(rows), n))
    stacked = np.empty((len(rows), dim))
    adjacency: list[set[int]] = [set() for _ in range(n)]
    for k, (i, j, arr) in enumerate(rows):
        incidence[k, i - 1] = 1.0
        incidence[k, j - 1] = -1.0
        stacked[k] = arr
        adjacency[i - 1].add(j - 1)
        adjacency[j - 1].add(i - 1)

    seen = {0}
    queue = [0]
    while queue:
        u = queue.pop()
        for v in adjacency[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    if len(seen) != n:
        raise GraphConnectivityError("translation graph is disconnected")

    positions, *_ = np.linalg.lstsq(incidence, stacked, rcond=None)
    return positions - positions[0]
