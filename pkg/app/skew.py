from __future__ import annotations

from typing import List, Tuple

import numpy as np


SKEW_TOL = 1e-12
UNIT_TOL = 1e-10


def wedge(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix of the map v -> (a.v) b - (b.v) a."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"wedge needs two vectors of equal dimension, got {a.shape} and {b.shape}")
    return np.outer(b, a) - np.outer(a, b)


def is_skew(matrix: np.ndarray, tol: float = SKEW_TOL) -> bool:
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        return False
    return bool(np.max(np.abs(matrix + matrix.T), initial=0.0) <= tol)


def tangent_projector(nu: np.ndarray) -> np.ndarray:
    nu = np.asarray(nu, dtype=float)
    return np.eye(nu.size) - np.outer(nu, nu)


def skew_decompose(matrix: np.ndarray, nu: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Split a skew map into its tangential block and the vector it sends nu to.

    V = P V P + nu ^ (V nu) with P = I - nu nu^T; the two parts are
    trace-orthogonal.
    """
    matrix = np.asarray(matrix, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if abs(np.linalg.norm(nu) - 1.0) > UNIT_TOL:
        raise ValueError(f"skew_decompose needs a unit normal, |nu| = {np.linalg.norm(nu):.3e}")
    if matrix.shape != (nu.size, nu.size):
        raise ValueError(f"matrix shape {matrix.shape} does not match normal of size {nu.size}")
    proj = tangent_projector(nu)
    return proj @ matrix @ proj, matrix @ nu


def upper_entries(matrix: np.ndarray) -> List[float]:
    """Entries S12, S13, ..., S(m-1)m in row order."""
    matrix = np.asarray(matrix, dtype=float)
    rows, cols = np.triu_indices(matrix.shape[0], k=1)
    return [float(v) for v in matrix[rows, cols]]


def upper_entry_labels(dim: int) -> List[str]:
    rows, cols = np.triu_indices(dim, k=1)
    return [f"S{i + 1}{j + 1}" for i, j in zip(rows, cols)]


def hat3(v: np.ndarray) -> np.ndarray:
    """Cross-product matrix: hat3(v) @ w == v x w."""
    x, y, z = np.asarray(v, dtype=float)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
