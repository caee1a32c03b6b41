"""Certifiable rotation averaging.

Recovers absolute orientations from noisy pairwise relative rotations on a
graph via primal-dual iterations with spectral updates, verifies global
optimality through a dual semidefinite certificate, and provides exact
closed forms (optima, stationary points, spectra) on cycle graphs.  Phase
synchronization on the unit circle and the Euclidean translation analogue
are included.
"""

from .certify import (
    Certificate,
    certify_solution,
    dual_from_primal,
    duality_gap,
    gauge_aligned_distance,
    kkt_residual,
    spectral_suboptimality_bound,
)
from .cycle import (
    CycleProblem,
    StationaryPoint,
    adjacency_spectrum,
    change_of_basis,
    closed_form_stationary,
    cycle_error,
    from_pose_graph,
    residual_equidistribution_check,
    to_pose_graph,
)
from .eigen import EigenResult, gershgorin_interval, smallest_eigenpairs
from .errors import (
    DegenerateProjectionWarning,
    EigenConvergenceError,
    G2oParseError,
    GenerationError,
    GraphAcyclicityError,
    GraphConnectivityError,
    OptimalityTieWarning,
    PhaseProjectionWarning,
    RotavgError,
    SolutionFormatError,
    ValidationError,
)
from .estimators import (
    GeneralizedPowerMethod,
    PhaseSynchronization,
    RotationSynchronization,
    TranslationSynchronization,
)
from .geom import (
    AxisAngle,
    angle_axis_of,
    exp_angle_axis,
    nth_roots,
    project_to_rotation,
    random_rotation,
    rotation_2d,
    rotation_z,
    wrap_angle,
)
from .graph import (
    BlockDiagonal,
    Edge,
    PoseGraph,
    SparseBlockMatrix,
    assemble_connection,
    block_diag_minus,
    fiedler_value,
    quadratic_form,
    spectral_norm_diff,
)
from .io import (
    EdgeRecord,
    SolutionRecord,
    export_solution,
    load_g2o,
    parse_g2o,
    parse_solution,
    write_g2o,
)
from .solver import (
    GPMRecord,
    PhaseSyncResult,
    PrimalDualState,
    SolveOptions,
    SolveResult,
    TraceRecord,
    dual_update,
    gpm_iterate,
    gpm_solve,
    phase_sync_solve,
    primal_dual_solve,
    primal_update,
    rotation_cost,
    solve_assembled,
    spectral_initialization,
    symmetrized_dual_update,
    translation_sync,
)
from .synth import NoiseSpec, RandomProblem, make_cycle_problem, make_random_problem

__version__ = "0.1.0"

__all__ = [
    "AxisAngle",
    "BlockDiagonal",
    "Certificate",
    "CycleProblem",
    "DegenerateProjectionWarning",
    "Edge",
    "EdgeRecord",
    "EigenConvergenceError",
    "EigenResult",
    "G2oParseError",
    "GPMRecord",
    "GeneralizedPowerMethod",
    "GenerationError",
    "GraphAcyclicityError",
    "GraphConnectivityError",
    "NoiseSpec",
    "OptimalityTieWarning",
    "PhaseProjectionWarning",
    "PhaseSyncResult",
    "PhaseSynchronization",
    "PoseGraph",
    "PrimalDualState",
    "RandomProblem",
    "RotationSynchronization",
    "RotavgError",
    "SolutionFormatError",
    "SolutionRecord",
    "SolveOptions",
    "SolveResult",
    "SparseBlockMatrix",
    "StationaryPoint",
    "TraceRecord",
    "TranslationSynchronization",
    "ValidationError",
    "adjacency_spectrum",
    "angle_axis_of",
    "assemble_connection",
    "block_diag_minus",
    "certify_solution",
    "change_of_basis",
    "closed_form_stationary",
    "cycle_error",
    "dual_from_primal",
    "dual_update",
    "duality_gap",
    "exp_angle_axis",
    "export_solution",
    "fiedler_value",
    "from_pose_graph",
    "gauge_aligned_distance",
    "gershgorin_interval",
    "gpm_iterate",
    "gpm_solve",
    "kkt_residual",
    "load_g2o",
    "make_cycle_problem",
    "make_random_problem",
    "nth_roots",
    "parse_g2o",
    "parse_solution",
    "phase_sync_solve",
    "primal_dual_solve",
    "primal_update",
    "project_to_rotation",
    "quadratic_form",
    "random_rotation",
    "residual_equidistribution_check",
    "rotation_2d",
    "rotation_cost",
    "rotation_z",
    "smallest_eigenpairs",
    "solve_assembled",
    "spectral_initialization",
    "spectral_norm_diff",
    "spectral_suboptimality_bound",
    "symmetrized_dual_update",
    "to_pose_graph",
    "translation_sync",
    "wrap_angle",
    "write_g2o",
]
