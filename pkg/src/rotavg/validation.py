"""Input validation helpers.

All checks raise :class:`~rotavg.errors.ValidationError` (a ``ValueError``
subclass) with a message naming the offending argument, and return the
validated value as a float ndarray so callers can chain them.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError

ORTHOGONALITY_TOL = 1e-12


def as_float_matrix(value, name: str = "matrix") -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be a 2-d array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite entries")
    return arr


def check_square(value, name: str = "matrix") -> np.ndarray:
    arr = as_float_matrix(value, name)
    if arr.shape[0] != arr.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {arr.shape}")
    return arr


def check_symmetric(value, tol: float = 1e-12, name: str = "matrix") -> np.ndarray:
    arr = check_square(value, name)
    if arr.size and np.max(np.abs(arr - arr.T)) > tol:
        raise ValidationError(f"{name} is not symmetric within {tol:g}")
    return arr


def check_rotation(value, dim: int | None = None, tol: float = ORTHOGONALITY_TOL,
                   name: str = "rotation") -> np.ndarray:
    """Validate a special-orthogonal matrix of dimension 2 or 3."""
    arr = check_square(value, name)
    p = arr.shape[0]
    if p not in (2, 3):
        raise ValidationError(f"{name} must be 2x2 or 3x3, got {p}x{p}")
    if dim is not None and p != dim:
        raise ValidationError(f"{name} must be {dim}x{dim}, got {p}x{p}")
    defect = np.linalg.norm(arr.T @ arr - np.eye(p))
    if defect > tol:
        raise ValidationError(
            f"{name} is not orthogonal within {tol:g} (defect {defect:.3e}); "
            "use project_to_rotation to repair near-rotations"
        )
    if abs(np.linalg.det(arr) - 1.0) > tol:
        raise ValidationError(f"{name} has determinant != +1 (reflection?)")
    return arr


def check_rotation_stack(value, n: int | None = None, dim: int | None = None,
                         tol: float = ORTHOGONALITY_TOL,
                         name: str = "rotations") -> np.ndarray:
    """Validate an (n, p, p) stack of special-orthogonal matrices."""
    arr = np.asarray(value, dtype=float)
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise ValidationError(f"{name} must have shape (n, p, p), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite entries")
    p = arr.shape[1]
    if p not in (2, 3):
        raise ValidationError(f"{name} blocks must be 2x2 or 3x3, got {p}x{p}")
    if dim is not None and p != dim:
        raise ValidationError(f"{name} blocks must be {dim}x{dim}, got {p}x{p}")
    if n is not None and arr.shape[0] != n:
        raise ValidationError(f"{name} must contain {n} blocks, got {arr.shape[0]}")
    eye = np.eye(p)
    defect = np.max(np.abs(np.einsum("nij,nik->njk", arr, arr) - eye))
    if defect > tol:
        raise ValidationError(f"{name} contains a non-orthogonal block (defect {defect:.3e})")
    if np.max(np.abs(np.linalg.det(arr) - 1.0)) > tol:
        raise ValidationError(f"{name} contains a block with determinant != +1")
    return arr


def check_unit_vector(value, tol: float = ORTHOGONALITY_TOL, name: str = "axis") -> np.ndarray:
    arr = np.asarray(value, dtype=float).reshape(-1)
    if arr.shape != (3,):
        raise ValidationError(f"{name} must be a 3-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite entries")
    nrm = np.linalg.norm(arr)
    if abs(nrm - 1.0) > tol:
        raise ValidationError(f"{name} must be unit length within {tol:g}, got norm {nrm!r}")
    return arr


def check_positive(value, name: str) -> float:
    out = float(value)
    if not np.isfinite(out) or out <= 0:
        raise ValidationError(f"{name} must be positive, got {value!r}")
    return out
