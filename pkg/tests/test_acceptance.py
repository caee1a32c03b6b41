"""Acceptance suite.

One test per criterion, run at the stated tolerance and budget; each prints
a single ``criterion NN PASS`` line (visible with ``pytest -s``).  Shared
run ensembles are built once in module-scoped fixtures and reused by the
gap-bound criterion.
"""

import os
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest
from joblib import Parallel, delayed
from scipy.optimize import golden

from rotavg import (
    BlockDiagonal,
    CycleProblem,
    NoiseSpec,
    SolveOptions,
    SparseBlockMatrix,
    adjacency_spectrum,
    assemble_connection,
    block_diag_minus,
    closed_form_stationary,
    cycle_error,
    exp_angle_axis,
    gpm_iterate,
    load_g2o,
    make_cycle_problem,
    make_random_problem,
    phase_sync_solve,
    primal_dual_solve,
    quadratic_form,
    random_rotation,
    spectral_initialization,
    to_pose_graph,
    translation_sync,
)

_PASSED: dict[int, bool] = {}


def _record(criterion: int, detail: str = "") -> None:
    _PASSED[criterion] = True
    print(f"criterion {criterion:02d} PASS {detail}")


# ---------------------------------------------------------------------------
# shared ensembles


@dataclass
class SolveRun:
    adjacency: SparseBlockMatrix
    pairs: list  # (rotations, dual) per iterate


@pytest.fixture(scope="module")
def cycle_grid_runs():
    """Cycle grid: n in {20,50,100,200} x sigma {0.2,0.5} x 20 seeds."""
    options = SolveOptions(epsilon=1e-12)
    runs = []
    started = time.perf_counter()
    for n in (20, 50, 100, 200):
        for sigma in (0.2, 0.5):
            for seed in range(20):
                problem, _ = make_cycle_problem(n, NoiseSpec(sigma=sigma, seed=seed))
                graph = to_pose_graph(problem)
                result = primal_dual_solve(graph, options, record_states=True)
                adjacency, _, _ = assemble_connection(graph)
                closed = closed_form_stationary(problem, 0).cost
                runs.append((n, sigma, seed, result, closed, adjacency))
    elapsed = time.perf_counter() - started
    return runs, elapsed


@pytest.fixture(scope="module")
def gpm_runs():
    """100 power-method runs on random problems with n <= 50."""
    rng = np.random.default_rng(404)
    runs = []
    started = time.perf_counter()
    for index in range(100):
        n = int(rng.integers(10, 51))
        density = float(rng.uniform(0.2, 0.7))
        sigma = float(rng.uniform(0.1, 0.6))
        problem = make_random_problem(n, density, NoiseSpec(sigma=sigma, seed=index))
        adjacency, degree, _ = assemble_connection(problem.graph)
        if index % 2 == 0:
            start = spectral_initialization(adjacency, degree)
        else:
            start = np.stack([random_rotation(rng) for _ in range(n)])
        # the cutoff stops the run once the stack is numerically stationary,
        # where the trace would otherwise dither at the last-ulp level
        records = gpm_iterate(adjacency, start, 30, xtol=1e-15)
        runs.append(SolveRun(adjacency, [(r.rotations, r.dual) for r in records]))
    elapsed = time.perf_counter() - started
    return runs, elapsed


@pytest.fixture(scope="module")
def shifted_gpm_runs():
    """50 runs on diagonally shifted PSD adjacencies for the infeasibility lemma."""
    rng = np.random.default_rng(505)
    runs = []
    started = time.perf_counter()
    for index in range(50):
        n = int(rng.integers(8, 41))
        problem = make_random_problem(n, float(rng.uniform(0.25, 0.7)),
                                      NoiseSpec(sigma=float(rng.uniform(0.1, 0.6)),
                                                seed=1000 + index))
        adjacency, degree, _ = assemble_connection(problem.graph)
        lam_min = float(np.linalg.eigvalsh(adjacency.to_dense())[0])
        shifted = adjacency.with_diagonal_shift(max(0.0, -lam_min))
        start = spectral_initialization(adjacency, degree)
        records = gpm_iterate(shifted, start, 20)
        runs.append(SolveRun(shifted, [(r.rotations, r.dual) for r in records]))
    elapsed = time.perf_counter() - started
    return runs, elapsed


_GRID_DENSITIES = (0.15, 0.22, 0.32, 0.45, 0.65, 1.0)
_GRID_SIGMAS = (0.05, 0.25, 0.5, 0.75, 1.0, 1.3)
_GRID_VERTICES = 30
_GRID_TRIALS = 100


def _grid_trial(density: float, sigma: float, seed: int):
    problem = make_random_problem(_GRID_VERTICES, density, NoiseSpec(sigma=sigma, seed=seed))
    options = SolveOptions(epsilon=1e-10, max_iterations=12, eig_tol=1e-9)
    result = primal_dual_solve(problem.graph, options)
    return bool(result.certified and result.converged), problem.fiedler_value, problem.adjacency_gap


@pytest.fixture(scope="module")
def recovery_grid():
    """Certified-recovery frequency over a 6x6 (connectivity, noise) grid."""
    started = time.perf_counter()
    tasks = []
    for row, density in enumerate(_GRID_DENSITIES):
        for col, sigma in enumerate(_GRID_SIGMAS):
            for trial in range(_GRID_TRIALS):
                seed = 777_000 + (row * 6 + col) * 1009 + trial
                tasks.append((row, col, density, sigma, seed))
    outcomes = Parallel(n_jobs=min(os.cpu_count() or 1, 4))(
        delayed(_grid_trial)(density, sigma, seed)
        for _, _, density, sigma, seed in tasks
    )
    frequency = np.zeros((6, 6))
    fiedler = np.zeros((6, 6))
    gap = np.zeros((6, 6))
    for (row, col, *_), (certified, fied, g) in zip(tasks, outcomes):
        frequency[row, col] += certified / _GRID_TRIALS
        fiedler[row, col] += fied / _GRID_TRIALS
        gap[row, col] += g / _GRID_TRIALS
    elapsed = time.perf_counter() - started
    return frequency, fiedler, gap, elapsed


# ---------------------------------------------------------------------------
# criteria


def test_criterion_01_cycle_closed_form_matches_golden_section():
    # 50 one-parameter cycle problems; the oracle sweeps the common residual
    # angle of the equal-residual family on a grid, then refines the best
    # bracket by golden-section search
    started = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(3, 11))
        axis = rng.standard_normal(3)
        axis /= np.linalg.norm(axis)
        measurements = [exp_angle_axis(axis, a) for a in rng.uniform(-np.pi, np.pi, n)]
        problem = CycleProblem(measurements)
        closed = closed_form_stationary(problem, 0).cost
        error = cycle_error(problem)

        k = np.array([[0.0, -axis[2], axis[1]],
                      [axis[2], 0.0, -axis[0]],
                      [-axis[1], axis[0], 0.0]])
        k2 = k @ k

        def family_cost(w):
            step = np.eye(3) + np.sin(w) * k + (1.0 - np.cos(w)) * k2
            back = -(n - 1) * w
            closing = np.eye(3) + np.sin(back) * k + (1.0 - np.cos(back)) * k2
            return -2.0 * ((n - 1) * np.trace(step) + np.trace(error @ closing))

        grid = np.linspace(-np.pi, np.pi, 2001)
        sines = np.sin(grid)[:, None, None]
        cosines = np.cos(grid)[:, None, None]
        steps = np.eye(3) + sines * k + (1.0 - cosines) * k2
        backs = np.sin(-(n - 1) * grid)[:, None, None] * k + (
            1.0 - np.cos(-(n - 1) * grid)[:, None, None]) * k2 + np.eye(3)
        costs = -2.0 * ((n - 1) * np.trace(steps, axis1=1, axis2=2)
                        + np.einsum("ij,wji->w", error, backs))
        best = int(np.argmin(costs))
        h = grid[1] - grid[0]
        refined = golden(family_cost, brack=(grid[best] - h, grid[best], grid[best] + h),
                         tol=1e-12)
        oracle = family_cost(refined)
        worst = max(worst, abs(closed - oracle))
        assert abs(closed - oracle) <= 1e-6
    elapsed = time.perf_counter() - started
    assert elapsed < 1.0
    _record(1, f"(worst gap {worst:.2e}, {elapsed:.2f}s)")


def test_criterion_02_one_iteration_optimality_on_cycles(cycle_grid_runs):
    runs, elapsed = cycle_grid_runs
    assert len(runs) == 160
    worst_lambda = 0.0
    worst_cost = 0.0
    for n, sigma, seed, result, closed, _ in runs:
        context = f"n={n} sigma={sigma} seed={seed}"
        assert result.converged and result.certified, context
        assert result.state.iteration == 1, context
        assert abs(result.state.lambda_min) <= 1e-12, context
        assert abs(result.state.cost - closed) <= 1e-8, context
        worst_lambda = max(worst_lambda, abs(result.state.lambda_min))
        worst_cost = max(worst_cost, abs(result.state.cost - closed))
    assert elapsed < 30.0
    _record(2, f"(160 runs, worst |lambda_1| {worst_lambda:.1e}, "
               f"worst cost gap {worst_cost:.1e}, {elapsed:.1f}s)")


def test_criterion_03_spectrum_theorem():
    started = time.perf_counter()
    rng = np.random.default_rng(303)
    worst = 0.0
    for n in range(3, 13):
        for _ in range(20):
            problem = CycleProblem([random_rotation(rng) for _ in range(n)])
            closed = adjacency_spectrum(problem)
            adjacency, _, _ = assemble_connection(to_pose_graph(problem))
            numeric = np.sort(np.linalg.eigvalsh(adjacency.to_dense()))
            worst = max(worst, float(np.max(np.abs(closed - numeric))))
            assert np.max(np.abs(closed - numeric)) <= 1e-9
    elapsed = time.perf_counter() - started
    assert elapsed < 5.0
    _record(3, f"(200 spectra, worst deviation {worst:.2e}, {elapsed:.2f}s)")


def test_criterion_04_dual_trace_monotone(gpm_runs):
    runs, elapsed = gpm_runs
    assert len(runs) == 100
    worst = 0.0
    for run in runs:
        traces = np.array([dual.trace() for _, dual in run.pairs])
        backward = float(np.max(-np.diff(traces))) if len(traces) > 1 else 0.0
        worst = max(worst, backward)
        assert np.all(np.diff(traces) >= -1e-12)
    assert elapsed < 10.0
    _record(4, f"(100 runs, worst backward step {worst:.2e}, {elapsed:.1f}s)")


def test_criterion_05_dual_infeasibility_on_shifted_matrices(shifted_gpm_runs):
    runs, elapsed = shifted_gpm_runs
    assert len(runs) == 50
    started = time.perf_counter()
    worst = -np.inf
    for run in runs:
        dense_adjacency = run.adjacency.to_dense()
        for _, dual in run.pairs:
            certificate = block_diag_minus(dual, run.adjacency)
            lambda1 = float(np.linalg.eigvalsh(certificate.to_dense())[0])
            worst = max(worst, lambda1)
            assert lambda1 <= 1e-10
        assert dense_adjacency.shape[0] <= 150
    elapsed += time.perf_counter() - started
    assert elapsed < 10.0
    _record(5, f"(50 runs, max lambda_1 {worst:.2e}, {elapsed:.1f}s)")


def test_criterion_06_duality_gap_bound(cycle_grid_runs, gpm_runs, shifted_gpm_runs):
    # both sides recomputed independently with dense eigendecompositions
    started = time.perf_counter()
    worst = np.inf
    checked = 0

    def check(adjacency, rotations, dual):
        nonlocal worst, checked
        n, p = adjacency.n, adjacency.p
        lhs = -quadratic_form(adjacency, rotations) + dual.trace()
        dense = block_diag_minus(dual, adjacency).to_dense()
        rhs = n * p * float(np.sum(np.linalg.eigvalsh(dense)[:p]))
        worst = min(worst, lhs - rhs)
        checked += 1
        assert lhs >= rhs - 1e-8

    for _, _, _, result, _, adjacency in cycle_grid_runs[0]:
        for state in result.iterate_states:
            check(adjacency, state.rotations, state.dual)
    for run in gpm_runs[0]:
        for rotations, dual in run.pairs:
            check(run.adjacency, rotations, dual)
    for run in shifted_gpm_runs[0]:
        for rotations, dual in run.pairs:
            check(run.adjacency, rotations, dual)
    elapsed = time.perf_counter() - started
    _record(6, f"({checked} iterates, worst margin {worst:.2e}, {elapsed:.1f}s)")


def test_criterion_08_recovery_frequency_monotonicity(recovery_grid):
    frequency, fiedler, gap, elapsed = recovery_grid
    # the binning axes behave as labeled: connectivity grows along rows,
    # measured noise along columns
    assert np.all(np.diff(fiedler.mean(axis=1)) > 0)
    assert np.all(np.diff(gap.mean(axis=0)) > 0)

    satisfied = 0
    total = 0
    for row in range(6):
        for col in range(5):
            total += 1
            satisfied += frequency[row, col + 1] <= frequency[row, col]
    for col in range(6):
        for row in range(5):
            total += 1
            satisfied += frequency[row + 1, col] >= frequency[row, col]
    fraction = satisfied / total
    assert fraction >= 0.9, f"monotone pairs {satisfied}/{total}\n{frequency}"
    assert elapsed < 300.0
    _record(8, f"(3600 trials, monotone pairs {satisfied}/{total}, {elapsed:.0f}s)")


def _find_dataset(names):
    roots = []
    env = os.environ.get("ROTAVG_DATA_DIR")
    if env:
        roots.append(Path(env))
    roots.append(Path(__file__).parent / "data")
    for root in roots:
        if not root.is_dir():
            continue
        for path in sorted(root.glob("*.g2o")):
            stem = path.stem.lower().replace("_", "").replace("-", "")
            if any(name in stem for name in names):
                return path
    return None


def test_criterion_07_dataset_regression_or_substitution(recovery_grid):
    path = _find_dataset(("smallgrid",))
    if path is None:
        # per the acceptance contract, this criterion is replaced by
        # criteria 2 and 8 when the benchmark files are unavailable
        assert _PASSED.get(2), "substitution requires criterion 2 to have passed"
        assert _PASSED.get(8), "substitution requires criterion 8 to have passed"
        _record(7, "(datasets unavailable; SUBSTITUTED by criteria 2 and 8, both passed)")
        return
    started = time.perf_counter()
    graph = load_g2o(path)
    assert (graph.n_vertices, graph.n_edges) == (125, 297)
    result = primal_dual_solve(graph, SolveOptions(epsilon=1e-12))
    elapsed = time.perf_counter() - started
    assert result.certified
    assert abs(result.state.lambda_min) <= 1e-12
    assert result.state.cost == pytest.approx(-2118.202, abs=0.01)
    assert elapsed < 5.0
    _record(7, f"(SmallGrid f*={result.state.cost:.3f}, {elapsed:.1f}s)")

    for names, reference in ((("sphere",), -56981.692), (("torus",), -69227.058),
                             (("garage", "parking"), -42632.998)):
        extra = _find_dataset(names)
        if extra is None:
            continue
        graph = load_g2o(extra)
        result = primal_dual_solve(graph, SolveOptions(epsilon=1e-12))
        assert result.state.cost == pytest.approx(reference, abs=0.1)


def test_criterion_09_phase_synchronization():
    started = time.perf_counter()
    for n in (10, 100):
        latent = np.exp(1j * 2 * np.pi * np.arange(n) / n)
        h = np.zeros((n, n), complex)
        for k in range(n):
            j = (k + 1) % n
            h[k, j] = latent[k] * np.conj(latent[j])
            h[j, k] = np.conj(h[k, j])
        result = phase_sync_solve(h, SolveOptions(epsilon=1e-10))
        assert result.certified
        assert abs(result.lambda_min) <= 1e-10
        alignment = result.phases * np.conj(latent)
        assert np.max(np.abs(alignment - alignment[0])) <= 1e-8

    h = np.zeros((3, 3), complex)
    for i, j, offset in ((0, 1, 0.0), (1, 2, 0.0), (2, 0, np.pi / 2)):
        value = np.exp(1j * offset)
        h[i, j] = value
        h[j, i] = np.conj(value)
    result = phase_sync_solve(h, SolveOptions(epsilon=1e-10))
    assert result.cost == pytest.approx(-2.0 * 3.0 * np.cos(np.pi / 6), abs=1e-8)
    elapsed = time.perf_counter() - started
    assert elapsed < 2.0
    _record(9, f"(rings 10/100 + offset triangle, {elapsed:.2f}s)")


def test_criterion_10_translation_demo():
    started = time.perf_counter()
    positions = translation_sync([(1, 2, [1.0, 0.0]), (2, 3, [1.0, 0.0]),
                                  (3, 1, [-2.0, 0.0])])
    assert np.allclose(positions, [[0.0, 0.0], [-1.0, 0.0], [-2.0, 0.0]], atol=1e-12)

    side = 5
    index = lambda r, c: r * side + c + 1
    latent = np.array([[c, r] for r in range(side) for c in range(side)], float)
    edges = []
    for r in range(side):
        for c in range(side):
            if c + 1 < side:
                edges.append((index(r, c), index(r, c + 1), [-1.0, 0.0]))
            if r + 1 < side:
                edges.append((index(r, c), index(r + 1, c), [0.0, -1.0]))
    edges.append((index(4, 4), index(0, 0), 0.3 * (latent[24] - latent[0])))
    positions = translation_sync(edges)
    incidence = np.zeros((len(edges), side * side))
    stacked = np.zeros((len(edges), 2))
    for k, (i, j, v) in enumerate(edges):
        incidence[k, i - 1] = 1.0
        incidence[k, j - 1] = -1.0
        stacked[k] = v
    gradient = incidence.T @ (incidence @ positions - stacked)
    assert np.linalg.norm(gradient) <= 1e-9
    elapsed = time.perf_counter() - started
    assert elapsed < 1.0
    _record(10, f"(grad norm {np.linalg.norm(gradient):.2e}, {elapsed:.2f}s)")
