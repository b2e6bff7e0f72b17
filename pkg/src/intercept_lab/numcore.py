"""Small dense linear-algebra and 3-D geometry primitives shared by all modules.

Everything operates on plain ``numpy`` arrays: 3-vectors are shape ``(3,)``,
matrices are 2-D arrays.  Problem dimensions never exceed a few hundred, so
dense storage is used throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError

# Eigenvalue floor applied to covariances before inversion/factorization.
PSD_FLOOR = 1e-12

SYM_TOL = 1e-9


def vec3(x, y=None, z=None) -> np.ndarray:
    """Build a float 3-vector from components or any length-3 iterable."""
    if y is None:
        v = np.asarray(x, dtype=float)
        if v.shape != (3,):
            raise ContractError(f"expected a 3-vector, got shape {v.shape}")
        return v
    return np.array([x, y, z], dtype=float)


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Return (m + m.T)/2; cheap guard against drift in covariance updates."""
    return 0.5 * (m + m.T)


def is_symmetric(m: np.ndarray, tol: float = SYM_TOL) -> bool:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    scale = 1.0 + np.abs(m).max(initial=0.0)
    return bool(np.abs(m - m.T).max(initial=0.0) <= tol * scale)


def _satisfies_floor(m: np.ndarray, floor: float) -> bool:
    # Cholesky of (m - floor*I) succeeds iff every eigenvalue exceeds `floor`.
    try:
        np.linalg.cholesky(m - floor * np.eye(m.shape[0]))
        return True
    except np.linalg.LinAlgError:
        return False


def psd_floor(m: np.ndarray, floor: float = PSD_FLOOR) -> np.ndarray:
    """Return the symmetric matrix closest to m with eigenvalues >= floor.

    Skips the eigendecomposition when the floor is already satisfied, which is
    the common case in the filters.
    """
    m = symmetrize(np.asarray(m, dtype=float))
    if _satisfies_floor(m, floor):
        return m
    w, v = np.linalg.eigh(m)
    w = np.maximum(w, floor)
    return symmetrize((v * w) @ v.T)


def cholesky_psd(m: np.ndarray, floor: float = 0.0) -> np.ndarray:
    """Lower-triangular L with L @ L.T == m after flooring eigenvalues at `floor`.

    Raises ContractError for non-symmetric input.  Used both as the PSD
    assertion of record and for drawing correlated Gaussian samples.
    """
    m = np.asarray(m, dtype=float)
    if not is_symmetric(m):
        raise ContractError("cholesky_psd requires a symmetric matrix")
    m = symmetrize(m)
    if _satisfies_floor(m, floor):
        return np.linalg.cholesky(m)
    return np.linalg.cholesky(psd_floor(m, max(floor, PSD_FLOOR)))


def solve_psd(m: np.ndarray, rhs: np.ndarray, floor: float = PSD_FLOOR) -> np.ndarray:
    """Solve m @ x = rhs for symmetric PSD m, flooring eigenvalues first."""
    L = cholesky_psd(m, floor)
    y = np.linalg.solve(L, rhs)
    return np.linalg.solve(L.T, y)


def rot_x(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_axis_derivatives() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Derivatives of the axis rotations w.r.t. their angle, evaluated at zero.

    Returns the three constant skew-symmetric matrices (d/da Rx, d/db Ry,
    d/dg Rz at angle 0), the generators of infinitesimal rotations about
    X, Y and Z.
    """
    d_rx = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]])
    d_ry = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]])
    d_rz = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    return d_rx, d_ry, d_rz


@dataclass(frozen=True)
class Rotation3:
    """A validated proper rotation: orthonormal 3x3 matrix with det +1."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (3, 3):
            raise ContractError(f"rotation matrix must be 3x3, got {m.shape}")
        if np.abs(m.T @ m - np.eye(3)).max() > SYM_TOL:
            raise ContractError("rotation matrix is not orthonormal within 1e-9")
        if abs(np.linalg.det(m) - 1.0) > SYM_TOL:
            raise ContractError("rotation matrix determinant is not +1 within 1e-9")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls) -> "Rotation3":
        return cls(np.eye(3))

    @classmethod
    def about_z(cls, angle: float) -> "Rotation3":
        return cls(rot_z(angle))

    @classmethod
    def from_rpy(cls, roll: float, pitch: float, yaw: float) -> "Rotation3":
        return cls(rot_z(yaw) @ rot_y(pitch) @ rot_x(roll))

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ v

    def inverse_apply(self, v: np.ndarray) -> np.ndarray:
        return self.matrix.T @ v
