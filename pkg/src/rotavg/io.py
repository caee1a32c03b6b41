"""Pose-graph file ingestion and solution/trace export.

The g2o reader understands ``EDGE_SE3:QUAT``, ``EDGE_SE2`` and ``VERTEX_*``
lines (vertex lines are syntax-checked and skipped; the vertex count comes
from the edges).  Quaternions are ``(qx, qy, qz, qw)``, normalized on read;
a norm off by more than 1e-3 rejects the line.  Duplicate unordered pairs
keep the first occurrence.  Vertex ids are compacted to 1..n in order of
first appearance.

Solutions are written in a line-oriented text format with a versioned
header; floats are serialized with ``repr`` so export -> parse -> export is
byte-identical.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .certify import Certificate
from .errors import G2oParseError, SolutionFormatError, ValidationError
from .graph import PoseGraph
from .solver import TraceRecord
from .validation import check_rotation_stack

logger = logging.getLogger(__name__)

SOLUTION_HEADER = "# rotavg solution format 1"

_QUATERNION_NORM_TOL = 1e-3
_SE3_INFO_IDENTITY = "1 0 0 0 0 0 1 0 0 0 0 1 0 0 0 1 0 0 1 0 1"
_SE2_INFO_IDENTITY = "1 0 0 1 0 1"


class EdgeRecord(NamedTuple):
    """Raw parsed edge: ids as compacted, quaternion normalized, translation kept."""

    i: int
    j: int
    quaternion: np.ndarray
    translation: np.ndarray


def rotation_from_quaternion(quaternion) -> np.ndarray:
    """Rotation matrix of a unit quaternion ``(qx, qy, qz, qw)``."""
    x, y, z, w = np.asarray(quaternion, dtype=float).reshape(4)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def quaternion_from_rotation(rotation) -> np.ndarray:
    """Canonical unit quaternion ``(qx, qy, qz, qw)`` of a rotation matrix.

    Uses the numerically stable max-diagonal branch and fixes the sign so
    ``qw >= 0`` (first nonzero of the vector part positive when ``qw`` is
    zero), making the conversion deterministic.
    """
    r = np.asarray(rotation, dtype=float)
    t = np.trace(r)
    if t > 0:
        s = 2.0 * np.sqrt(t + 1.0)
        w = 0.25 * s
        x = (r[2, 1] - r[1, 2]) / s
        y = (r[0, 2] - r[2, 0]) / s
        z = (r[1, 0] - r[0, 1]) / s
    else:
        axis = int(np.argmax(np.diag(r)))
        if axis == 0:
            s = 2.0 * np.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2])
            w = (r[2, 1] - r[1, 2]) / s
            x = 0.25 * s
            y = (r[0, 1] + r[1, 0]) / s
            z = (r[0, 2] + r[2, 0]) / s
        elif axis == 1:
            s = 2.0 * np.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2])
            w = (r[0, 2] - r[2, 0]) / s
            x = (r[0, 1] + r[1, 0]) / s
            y = 0.25 * s
            z = (r[1, 2] + r[2, 1]) / s
        else:
            s = 2.0 * np.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1])
            w = (r[1, 0] - r[0, 1]) / s
            x = (r[0, 2] + r[2, 0]) / s
            y = (r[1, 2] + r[2, 1]) / s
            z = 0.25 * s
    q = np.array([x, y, z, w])
    q /= np.linalg.norm(q)
    if q[3] < 0 or (q[3] == 0 and _leading_sign(q[:3]) < 0):
        q = -q
    return q


def _leading_sign(vec: np.ndarray) -> float:
    for v in vec:
        if v != 0:
            return float(np.sign(v))
    return 1.0


def _lines_of(source) -> list[str]:
    if hasattr(source, "read"):
        return source.read().splitlines()
    return str(source).splitlines()


def _floats(tokens: list[str], line_number: int) -> list[float]:
    try:
        return [float(t) for t in tokens]
    except ValueError as exc:
        raise G2oParseError(f"expected a number, got {exc}", line_number) from None


def _information_weight(info: list[float], dim: int, line_number: int) -> float:
    """Trace-average of the rotational block of an upper-triangular info matrix."""
    side = 6 if dim == 3 else 3
    expected = side * (side + 1) // 2
    if len(info) != expected:
        raise G2oParseError(
            f"expected {expected} information entries, got {len(info)}", line_number)
    full = np.zeros((side, side))
    pos = 0
    for row in range(side):
        for col in range(row, side):
            full[row, col] = info[pos]
            full[col, row] = info[pos]
            pos += 1
    if dim == 3:
        return float(np.trace(full[3:, 3:]) / 3.0)
    return float(full[2, 2])


def parse_g2o(source, weights_from_information: bool = False) -> PoseGraph:
    """Parse g2o text into a pose graph of rotation measurements.

    Translations and information matrices are parsed and discarded; weights
    default to one everywhere.  Set ``weights_from_information=True`` to
    derive each edge weight from the trace of the rotational information
    block instead (off by default since the benchmarks use unit weights).
    """
    dim: int | None = None
    order: list[int] = []
    id_map: dict[int, int] = {}
    seen_pairs: set[tuple[int, int]] = set()
    edges = []
    n_duplicates = 0
    n_edge_lines = 0

    for line_number, raw in enumerate(_lines_of(source), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        keyword = tokens[0]
        if keyword.startswith("VERTEX"):
            if len(tokens) < 2:
                raise G2oParseError("vertex line missing id", line_number)
            try:
                int(tokens[1])
            except ValueError:
                raise G2oParseError(f"bad vertex id {tokens[1]!r}", line_number) from None
            _floats(tokens[2:], line_number)
            continue
        if keyword == "EDGE_SE3:QUAT":
            edge_dim, pose_len = 3, 7
        elif keyword == "EDGE_SE2":
            edge_dim, pose_len = 2, 3
        else:
            raise G2oParseError(f"unknown record type {keyword!r}", line_number)

        n_edge_lines += 1
        if dim is None:
            dim = edge_dim
        elif dim != edge_dim:
            raise G2oParseError("mixed SE2 and SE3 edges in one file", line_number)
        if len(tokens) < 3 + pose_len:
            raise G2oParseError(
                f"{keyword} needs two ids and {pose_len} pose values", line_number)
        try:
            raw_i, raw_j = int(tokens[1]), int(tokens[2])
        except ValueError:
            raise G2oParseError("vertex ids must be integers", line_number) from None
        if raw_i == raw_j:
            raise G2oParseError(f"self-loop at vertex {raw_i}", line_number)
        values = _floats(tokens[3:], line_number)
        pose, info = values[:pose_len], values[pose_len:]
        if info and not weights_from_information:
            # validated for float-ness above, then dropped
            pass
        weight = 1.0
        if weights_from_information and info:
            weight = _information_weight(info, edge_dim, line_number)

        if edge_dim == 3:
            quaternion = np.array(pose[3:7])
            norm = float(np.linalg.norm(quaternion))
            if abs(norm - 1.0) > _QUATERNION_NORM_TOL:
                raise G2oParseError(
                    f"quaternion norm {norm!r} deviates from 1 by more than "
                    f"{_QUATERNION_NORM_TOL:g}", line_number)
            rotation = rotation_from_quaternion(quaternion / norm)
        else:
            theta = pose[2]
            c, s = np.cos(theta), np.sin(theta)
            rotation = np.array([[c, -s], [s, c]])

        for raw_id in (raw_i, raw_j):
            if raw_id not in id_map:
                id_map[raw_id] = len(order) + 1
                order.append(raw_id)
        i, j = id_map[raw_i], id_map[raw_j]
        pair = (min(i, j), max(i, j))
        if pair in seen_pairs:
            n_duplicates += 1
            continue
        seen_pairs.add(pair)
        edges.append((i, j, rotation, weight))

    if n_edge_lines == 0:
        raise G2oParseError("no edges found in input")
    if n_duplicates:
        logger.debug("dropped %d duplicate edges (first occurrence kept)", n_duplicates)
    return PoseGraph(len(order), edges)


def load_g2o(path, weights_from_information: bool = False) -> PoseGraph:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_g2o(handle, weights_from_information=weights_from_information)


def write_g2o(graph: PoseGraph) -> str:
    """Serialize a pose graph as g2o edge lines (zero translations, unit info)."""
    lines = []
    for edge in graph.edges:
        if graph.dim == 3:
            q = quaternion_from_rotation(edge.rotation)
            pose = " ".join(["0 0 0"] + [repr(float(v)) for v in q])
            lines.append(f"EDGE_SE3:QUAT {edge.i - 1} {edge.j - 1} {pose} {_SE3_INFO_IDENTITY}")
        else:
            theta = float(np.arctan2(edge.rotation[1, 0], edge.rotation[0, 0]))
            lines.append(f"EDGE_SE2 {edge.i - 1} {edge.j - 1} 0 0 {theta!r} {_SE2_INFO_IDENTITY}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class SolutionRecord:
    """Parsed solution file: rotation stack plus optional certificate and trace.

    ``parameters`` keeps the serialized rotation parameters exactly as read
    (quaternion rows for p = 3, angles for p = 2) so re-exporting a parsed
    record reproduces the file byte for byte.
    """

    rotations: np.ndarray
    certificate: Certificate | None
    trace: tuple[TraceRecord, ...]
    parameters: np.ndarray | None = None


def export_solution(solution, certificate: Certificate | None = None,
                    trace=None) -> str:
    """Deterministic text serialization of a solved state.

    One quaternion (or plane angle, for p = 2) line per vertex, then the
    certificate block and the per-iteration trace rows.  ``solution`` is a
    rotation stack or a :class:`SolutionRecord`; re-exporting a parsed
    record is byte-identical to its source text.
    """
    if isinstance(solution, SolutionRecord):
        if certificate is None:
            certificate = solution.certificate
        if trace is None:
            trace = solution.trace
        stack = solution.rotations
        parameters = solution.parameters
    else:
        stack = check_rotation_stack(solution)
        parameters = None
    if trace is None:
        trace = ()

    lines = [SOLUTION_HEADER]
    if stack.shape[1] == 3:
        for index, rotation in enumerate(stack, start=1):
            if parameters is not None:
                q = [float(v) for v in parameters[index - 1]]
            else:
                q = [float(v) for v in quaternion_from_rotation(rotation)]
            lines.append("VERTEX_QUAT %d %r %r %r %r" % (index, q[0], q[1], q[2], q[3]))
    else:
        for index, rotation in enumerate(stack, start=1):
            if parameters is not None:
                theta = float(parameters[index - 1])
            else:
                theta = float(np.arctan2(rotation[1, 0], rotation[0, 0]))
            lines.append("VERTEX_ANGLE %d %r" % (index, theta))
    if certificate is not None:
        lams = " ".join(repr(float(v)) for v in certificate.lambda_small)
        lines.append(
            "CERTIFICATE %s %r %r %r %d" % (
                lams,
                float(certificate.gap_lower_bound),
                float(certificate.kkt_residual),
                float(certificate.epsilon),
                int(certificate.is_certified),
            )
        )
    for record in trace:
        lines.append("TRACE %d %r %r %d" % (
            record.iteration, float(record.cost),
            float(record.lambda_min), int(record.wall_time_ns)))
    return "\n".join(lines) + "\n"


def parse_solution(source) -> SolutionRecord:
    """Parse the text produced by :func:`export_solution`."""
    lines = _lines_of(source)
    if not lines or lines[0].strip() != SOLUTION_HEADER:
        raise SolutionFormatError(f"missing header {SOLUTION_HEADER!r}", 1)

    rotations: list[np.ndarray] = []
    parameters: list = []
    dim: int | None = None
    certificate = None
    trace: list[TraceRecord] = []
    for line_number, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        keyword = tokens[0]
        try:
            if keyword == "VERTEX_QUAT":
                if dim == 2:
                    raise SolutionFormatError("mixed vertex types", line_number)
                dim = 3
                q = np.array([float(t) for t in tokens[2:6]])
                if tokens[1] != str(len(rotations) + 1) or len(tokens) != 6:
                    raise SolutionFormatError("malformed VERTEX_QUAT line", line_number)
                parameters.append(q)
                rotations.append(rotation_from_quaternion(q / np.linalg.norm(q)))
            elif keyword == "VERTEX_ANGLE":
                if dim == 3:
                    raise SolutionFormatError("mixed vertex types", line_number)
                dim = 2
                if tokens[1] != str(len(rotations) + 1) or len(tokens) != 3:
                    raise SolutionFormatError("malformed VERTEX_ANGLE line", line_number)
                theta = float(tokens[2])
                parameters.append(theta)
                c, s = np.cos(theta), np.sin(theta)
                rotations.append(np.array([[c, -s], [s, c]]))
            elif keyword == "CERTIFICATE":
                values = [float(t) for t in tokens[1:]]
                if len(values) < 5:
                    raise SolutionFormatError("malformed CERTIFICATE line", line_number)
                lams = np.array(values[:-4])
                certificate = Certificate(
                    lambda_small=lams,
                    gap_lower_bound=values[-4],
                    kkt_residual=values[-3],
                    epsilon=values[-2],
                    is_certified=bool(int(values[-1])),
                    gap_bound_extrapolated=(len(lams) == 2),
                )
            elif keyword == "TRACE":
                if len(tokens) != 5:
                    raise SolutionFormatError("malformed TRACE line", line_number)
                trace.append(TraceRecord(int(tokens[1]), float(tokens[2]),
                                         float(tokens[3]), int(tokens[4])))
            else:
                raise SolutionFormatError(f"unknown record type {keyword!r}", line_number)
        except (ValueError, IndexError):
            raise SolutionFormatError("malformed line", line_number) from None
    if not rotations:
        raise SolutionFormatError("no vertex lines found")
    try:
        stack = check_rotation_stack(np.stack(rotations), tol=1e-9)
    except ValidationError as exc:
        raise SolutionFormatError(str(exc)) from None
    return SolutionRecord(rotations=stack, certificate=certificate,
                          trace=tuple(trace), parameters=np.array(parameters))
