"""Primitives on SO(2) and SO(3).

Conventions used throughout the package:

- Rotations are plain ``(p, p)`` float ndarrays with ``R^T R = I`` and
  ``det(R) = +1``; ``p`` is 2 or 3.
- Angles are wrapped to ``[-pi, pi)`` at API boundaries.
- For SO(3), :func:`angle_axis_of` reports angles in ``[0, pi]`` with the
  sign carried by the axis.  The identity uses the conventional axis
  ``(0, 0, 1)``; half-turns (angle pi) pick the axis sign so that the first
  component of magnitude above 1e-12 is positive.
- For SO(2) the angle is signed and the implicit axis is ``(0, 0, 1)``.
"""

from __future__ import annotations

import warnings
from typing import NamedTuple

import numpy as np

from .errors import DegenerateProjectionWarning, ValidationError
from .validation import check_rotation, check_unit_vector

CONVENTIONAL_AXIS = np.array([0.0, 0.0, 1.0])

_DEGENERATE_GAP = 1e-9
_IDENTITY_ANGLE = 1e-12
_HALF_TURN_MARGIN = 1e-4


class AxisAngle(NamedTuple):
    """Unit axis plus rotation angle in radians."""

    axis: np.ndarray
    angle: float


def wrap_angle(angle: float) -> float:
    """Wrap an angle to ``[-pi, pi)``."""
    return float((angle + np.pi) % (2.0 * np.pi) - np.pi)


def skew(vector) -> np.ndarray:
    """Skew-symmetric matrix of a 3-vector: ``skew(v) @ u == cross(v, u)``."""
    v = np.asarray(vector, dtype=float).reshape(3)
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def unskew(matrix) -> np.ndarray:
    """Inverse of :func:`skew` on skew-symmetric input."""
    m = np.asarray(matrix, dtype=float)
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def rotation_2d(angle: float) -> np.ndarray:
    """Planar rotation by ``angle``."""
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def rotation_z(angle: float) -> np.ndarray:
    """Rotation about the z-axis by ``angle``."""
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def project_to_rotation(matrix, warn_degenerate: bool = True) -> np.ndarray:
    """Nearest special-orthogonal matrix in Frobenius norm.

    Computed from the SVD ``M = U S V^T`` as ``U diag(1, ..., det(UV^T)) V^T``.
    When the determinant correction fires and the two smallest singular
    values coincide within 1e-9 the minimizer is not unique; the formula's
    value is still returned and a :class:`DegenerateProjectionWarning` is
    emitted (suppress with ``warn_degenerate=False``).
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] not in (2, 3):
        raise ValidationError(f"matrix must be 2x2 or 3x3, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValidationError("matrix contains non-finite entries")
    u, s, vt = np.linalg.svd(m)
    if np.linalg.det(u @ vt) < 0.0:
        if warn_degenerate and s[-2] - s[-1] <= _DEGENERATE_GAP:
            warnings.warn(
                "nearest rotation is ambiguous: the two smallest singular values "
                f"coincide within {_DEGENERATE_GAP:g}",
                DegenerateProjectionWarning,
                stacklevel=2,
            )
        u = u.copy()
        u[:, -1] = -u[:, -1]
    return u @ vt


def angle_axis_of(rotation) -> AxisAngle:
    """Angle and axis of a rotation.

    For SO(3) the angle is ``atan2(|skew part|, (tr - 1)/2)`` in ``[0, pi]``
    and the axis comes from the skew part.  The identity returns the
    conventional axis ``(0, 0, 1)``; near a half turn the axis is extracted
    from the symmetric part, with the sign fixed by the skew part when it is
    informative and lexicographically otherwise.  For SO(2) the angle is the
    signed plane angle and the axis is ``(0, 0, 1)``.
    """
    r = check_rotation(rotation)
    if r.shape[0] == 2:
        return AxisAngle(CONVENTIONAL_AXIS.copy(), float(np.arctan2(r[1, 0], r[0, 0])))

    v = unskew(r - r.T) / 2.0  # sin(angle) * axis
    sin_angle = float(np.linalg.norm(v))
    cos_angle = float(np.trace(r) - 1.0) / 2.0
    angle = float(np.arctan2(sin_angle, cos_angle))

    if angle < _IDENTITY_ANGLE:
        return AxisAngle(CONVENTIONAL_AXIS.copy(), angle)

    if angle < np.pi - _HALF_TURN_MARGIN:
        axis = v / sin_angle
    else:
        # Near pi the skew part vanishes; n n^T = (R + R^T - (tr - 1) I) / (3 - tr)
        # stays well conditioned there.
        outer = (r + r.T - (np.trace(r) - 1.0) * np.eye(3)) / (3.0 - np.trace(r))
        col = int(np.argmax(np.diag(outer)))
        axis = outer[:, col] / np.sqrt(outer[col, col])
        if sin_angle > 1e-12:
            if float(v @ axis) < 0.0:
                axis = -axis
        else:
            axis = _lexicographic_sign(axis)
    axis = axis / np.linalg.norm(axis)
    return AxisAngle(axis, angle)


def _lexicographic_sign(axis: np.ndarray) -> np.ndarray:
    for component in axis:
        if abs(component) > 1e-12:
            return axis if component > 0 else -axis
    return axis


def exp_angle_axis(axis, angle: float) -> np.ndarray:
    """Rodrigues' formula: ``exp(angle * skew(axis))``."""
    a = check_unit_vector(axis)
    a = a / np.linalg.norm(a)
    k = skew(a)
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


def nth_roots(rotation, n: int) -> list[np.ndarray]:
    """The ``n`` rotations sharing ``rotation``'s axis whose n-th power is it.

    Root ``k`` has angle ``gamma/n - 2*k*pi/n`` (wrapped to ``[-pi, pi)``)
    about the axis of the input, where ``gamma`` is the input's angle.  For
    the identity the conventional axis ``(0, 0, 1)`` is used, which makes
    root 0 exactly the identity.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValidationError(f"n must be a positive integer, got {n!r}")
    r = check_rotation(rotation, dim=3)
    axis, gamma = angle_axis_of(r)
    return [
        exp_angle_axis(axis, wrap_angle(gamma / n - 2.0 * np.pi * k / n))
        for k in range(n)
    ]


def signed_angle_about(rotation, axis) -> float:
    """Signed angle of a rotation assumed to act about ``axis``.

    Exact when the rotation is ``exp(w * skew(axis))``; otherwise returns the
    angle of the component about ``axis``.
    """
    r = check_rotation(rotation, dim=3)
    a = check_unit_vector(axis)
    sin_part = float(a @ unskew(r - r.T) / 2.0)
    cos_part = float(np.trace(r) - 1.0) / 2.0
    return float(np.arctan2(sin_part, cos_part))


def random_rotation(rng: np.random.Generator, dim: int = 3) -> np.ndarray:
    """Haar-uniform random rotation.

    For SO(3): a 4-d standard normal draw normalized to a unit quaternion
    (uniform on the 3-sphere) converted to a matrix.  For SO(2): a uniform
    angle.  The construction is fixed so seeded draws reproduce across
    platforms.
    """
    if dim == 2:
        return rotation_2d(rng.uniform(-np.pi, np.pi))
    if dim != 3:
        raise ValidationError(f"dim must be 2 or 3, got {dim!r}")
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])
