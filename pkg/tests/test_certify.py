import numpy as np
import pytest
from numpy.testing import assert_allclose

from rotavg import (
    NoiseSpec,
    PoseGraph,
    SolveOptions,
    assemble_connection,
    block_diag_minus,
    certify_solution,
    closed_form_stationary,
    dual_from_primal,
    gauge_aligned_distance,
    gpm_iterate,
    kkt_residual,
    make_cycle_problem,
    make_random_problem,
    primal_dual_solve,
    random_rotation,
    rotation_cost,
    spectral_initialization,
    spectral_suboptimality_bound,
    to_pose_graph,
)
from rotavg.errors import GraphConnectivityError
from conftest import rotation_stack
from test_graph import random_latent_graph


def latent_graph_pair(rng, n=10, density=0.5, sigma=0.3):
    latent = rotation_stack(rng, n)
    clean = random_latent_graph(rng, latent, density)
    noisy_edges = []
    for e in clean.edges:
        axis = rng.standard_normal(3)
        axis /= np.linalg.norm(axis)
        from rotavg import exp_angle_axis

        noisy_edges.append((e.i, e.j, e.rotation @ exp_angle_axis(axis, rng.normal(0, sigma))))
    noisy = PoseGraph(n, noisy_edges)
    return clean, noisy, latent


class TestDualFromPrimal:
    def test_noiseless_equals_degree(self, rng):
        clean, _, latent = latent_graph_pair(rng, sigma=0.0)
        adjacency, degree, _ = assemble_connection(clean)
        gauge_fixed = np.einsum("nij,kj->nik", latent, latent[0])
        dual = dual_from_primal(gauge_fixed, adjacency)
        assert_allclose(dual.blocks, degree.blocks, atol=1e-12)

    def test_zero_kkt_at_certified_optimum(self):
        problem = make_random_problem(12, 0.5, NoiseSpec(sigma=0.25, seed=3))
        result = primal_dual_solve(problem.graph, SolveOptions(epsilon=1e-12))
        assert result.certified
        adjacency, _, _ = assemble_connection(problem.graph)
        dual = dual_from_primal(result.state.rotations, adjacency)
        assert kkt_residual(result.state.rotations, dual, adjacency) <= 1e-8

    def test_random_stack_still_computable(self, rng):
        problem = make_random_problem(8, 0.5, NoiseSpec(sigma=0.2, seed=7))
        adjacency, _, _ = assemble_connection(problem.graph)
        stack = rotation_stack(rng, 8)
        certificate = certify_solution(stack, adjacency)
        assert certificate.kkt_residual > 1e-3
        assert not certificate.is_certified


class TestCertifySolution:
    def test_cycle_optimum_certified(self):
        problem, _ = make_cycle_problem(12, NoiseSpec(sigma=0.5, seed=1))
        optimum = closed_form_stationary(problem, 0)
        adjacency, _, _ = assemble_connection(to_pose_graph(problem))
        certificate = certify_solution(optimum.rotations, adjacency)
        assert certificate.is_certified
        assert abs(certificate.lambda_small[0]) < 1e-10

    def test_suboptimal_stationary_point_not_certified(self):
        problem, _ = make_cycle_problem(8, NoiseSpec(sigma=0.3, seed=2))
        point = closed_form_stationary(problem, 1)
        adjacency, _, _ = assemble_connection(to_pose_graph(problem))
        certificate = certify_solution(point.rotations, adjacency)
        assert not certificate.is_certified
        # dense oracle agrees the certificate matrix is indefinite
        dual = dual_from_primal(point.rotations, adjacency)
        dense = block_diag_minus(dual, adjacency).to_dense()
        assert np.linalg.eigvalsh(dense)[0] < -1e-6
        assert certificate.lambda_small[0] == pytest.approx(
            np.linalg.eigvalsh(dense)[0], abs=1e-8)

    def test_certified_beats_random_points_and_gpm(self, rng):
        problem = make_random_problem(15, 0.4, NoiseSpec(sigma=0.3, seed=5))
        result = primal_dual_solve(problem.graph, SolveOptions(epsilon=1e-12))
        assert result.certified
        adjacency, _, _ = assemble_connection(problem.graph)
        optimum_cost = result.state.cost
        samples = np.stack([rotation_stack(rng, 15) for _ in range(10_000)])
        dense = adjacency.to_dense()
        tall = samples.reshape(10_000, 45, 3)
        costs = -np.einsum("bki,kl,bli->b", tall, dense, tall)
        assert np.min(costs) >= optimum_cost - 1e-9
        for seed in range(10):
            start = np.stack([random_rotation(np.random.default_rng(seed + 100))
                              for _ in range(15)])
            records = gpm_iterate(adjacency, start, 200, xtol=1e-14)
            assert records[-1].cost >= optimum_cost - 1e-9

    def test_gap_bound_fields(self, rng):
        problem = make_random_problem(8, 0.6, NoiseSpec(sigma=0.2, seed=11))
        adjacency, _, _ = assemble_connection(problem.graph)
        stack = rotation_stack(rng, 8)
        certificate = certify_solution(stack, adjacency)
        assert certificate.gap_lower_bound == pytest.approx(
            8 * 3 * np.sum(certificate.lambda_small), abs=1e-9)
        assert not certificate.gap_bound_extrapolated

    def test_so2_extrapolation_flagged(self):
        from rotavg import rotation_2d

        graph = PoseGraph(3, [(1, 2, np.eye(2)), (2, 3, np.eye(2)),
                              (3, 1, rotation_2d(0.3))])
        adjacency, _, _ = assemble_connection(graph)
        stack = np.stack([np.eye(2)] * 3)
        certificate = certify_solution(stack, adjacency)
        assert certificate.gap_bound_extrapolated
        assert certificate.lambda_small.shape == (2,)


class TestSpectralSuboptimalityBound:
    def test_zero_for_noiseless(self, rng):
        clean, _, _ = latent_graph_pair(rng, sigma=0.0)
        a, _, laplacian = assemble_connection(clean)
        assert spectral_suboptimality_bound(a, a, laplacian) == pytest.approx(0.0, abs=1e-12)

    def test_dominates_distance_on_cycles(self):
        problem, latent = make_cycle_problem(20, NoiseSpec(sigma=0.2, seed=4))
        graph = to_pose_graph(problem)
        latent_edges = [(e.i, e.j, latent[e.i - 1] @ latent[e.j - 1].T)
                        for e in graph.edges]
        latent_graph = PoseGraph(20, latent_edges)
        adjacency, degree, _ = assemble_connection(graph)
        latent_adjacency, _, latent_laplacian = assemble_connection(latent_graph)

        estimate = spectral_initialization(adjacency, degree)
        optimum = closed_form_stationary(problem, 0)
        distance = gauge_aligned_distance(optimum.rotations, estimate)
        bound = spectral_suboptimality_bound(adjacency, latent_adjacency, latent_laplacian)
        assert distance <= bound

    def test_iterate_form_reduces_to_base_form_at_degree(self, rng):
        clean, noisy, _ = latent_graph_pair(rng, sigma=0.25)
        adjacency, degree, _ = assemble_connection(noisy)
        latent_adjacency, _, latent_laplacian = assemble_connection(clean)
        base = spectral_suboptimality_bound(adjacency, latent_adjacency, latent_laplacian)
        with_dual = spectral_suboptimality_bound(adjacency, latent_adjacency,
                                                 latent_laplacian, dual=degree)
        assert with_dual == pytest.approx(base, rel=1e-9)

    def test_dominates_distance_at_iterates(self, rng):
        problem = make_random_problem(12, 0.6, NoiseSpec(sigma=0.15, seed=6))
        latent_edges = [(e.i, e.j, problem.latent[e.i - 1] @ problem.latent[e.j - 1].T)
                        for e in problem.graph.edges]
        latent_graph = PoseGraph(12, latent_edges)
        adjacency, _, _ = assemble_connection(problem.graph)
        latent_adjacency, _, latent_laplacian = assemble_connection(latent_graph)
        result = primal_dual_solve(problem.graph, SolveOptions(epsilon=1e-12),
                                   record_states=True)
        optimum = result.state.rotations
        for state in result.iterate_states:
            bound = spectral_suboptimality_bound(
                adjacency, latent_adjacency, latent_laplacian, dual=state.dual)
            assert gauge_aligned_distance(optimum, state.rotations) <= bound + 1e-9

    def test_disconnected_kernel_rejected(self, rng):
        clean, _, _ = latent_graph_pair(rng, sigma=0.0)
        adjacency, _, _ = assemble_connection(clean)
        # a zero laplacian has no connectivity at all
        from rotavg import SparseBlockMatrix

        zero = SparseBlockMatrix(clean.n_vertices, 3, {})
        with pytest.raises(GraphConnectivityError):
            spectral_suboptimality_bound(adjacency, adjacency, zero)


class TestGaugeAlignedDistance:
    def test_zero_under_global_gauge(self, rng):
        stack = rotation_stack(rng, 9)
        gauge = random_rotation(rng)
        assert gauge_aligned_distance(stack, stack @ gauge) < 1e-12

    def test_positive_for_different_stacks(self, rng):
        a = rotation_stack(rng, 9)
        b = rotation_stack(rng, 9)
        assert gauge_aligned_distance(a, b) > 1e-3

    def test_is_a_minimum_over_sampled_gauges(self, rng):
        a = rotation_stack(rng, 5)
        b = rotation_stack(rng, 5)
        best = gauge_aligned_distance(a, b)
        for _ in range(500):
            gauge = random_rotation(rng)
            assert np.linalg.norm(a - b @ gauge) >= best - 1e-10
