"""Weak Laplace-Beltrami operators on vertex functions."""

from dataclasses import dataclass
from typing import TYPE_CHECKING
import logging

import numpy as np
from scipy import sparse
from scipy.linalg import eigh

if TYPE_CHECKING:
    from .boundary import Boundary

logger = logging.getLogger(__name__)


def corner_cotangents(vertices: np.ndarray, faces: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Cotangent of every triangle corner and the squared length of the opposite edge.

    Args:
        vertices: (N, 3) positions
        faces: (F, 3) oriented triangles

    Returns:
        (cot, opposite_sq), both shaped (F, 3); column c refers to corner c
    """
    corners = vertices[faces]
    cot = np.empty(faces.shape, dtype=float)
    opposite_sq = np.empty(faces.shape, dtype=float)
    for c in range(3):
        a = corners[:, (c + 1) % 3] - corners[:, c]
        b = corners[:, (c + 2) % 3] - corners[:, c]
        cross = np.linalg.norm(np.cross(a, b), axis=1)
        cot[:, c] = np.einsum("ij,ij->i", a, b) / cross
        opposite = corners[:, (c + 2) % 3] - corners[:, (c + 1) % 3]
        opposite_sq[:, c] = np.einsum("ij,ij->i", opposite, opposite)
    return cot, opposite_sq


def cotangent_stiffness(vertices: np.ndarray, faces: np.ndarray) -> sparse.csr_matrix:
    """
    Cotangent stiffness S with S_ij = -(cot α_ij + cot β_ij)/2 and zero row sums.

    The quadratic form φᵀSφ equals ∫|D_τφ|² for the piecewise linear interpolant.
    """
    n = vertices.shape[0]
    cot, _ = corner_cotangents(vertices, faces)
    rows = []
    cols = []
    vals = []
    for c in range(3):
        i = faces[:, (c + 1) % 3]
        j = faces[:, (c + 2) % 3]
        w = 0.5 * cot[:, c]
        rows.extend([i, j])
        cols.extend([j, i])
        vals.extend([-w, -w])
    off = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    diag = -np.asarray(off.sum(axis=1)).ravel()
    return (off + sparse.diags(diag)).tocsr()


def polygon_stiffness(vertices: np.ndarray, edges: np.ndarray) -> sparse.csr_matrix:
    """Stiffness of P1 functions on a closed polygon: 1/ℓ per edge."""
    n = vertices.shape[0]
    lengths = np.linalg.norm(vertices[edges[:, 1]] - vertices[edges[:, 0]], axis=1)
    w = 1.0 / lengths
    i, j = edges[:, 0], edges[:, 1]
    off = sparse.csr_matrix(
        (np.concatenate([-w, -w]), (np.concatenate([i, j]), np.concatenate([j, i]))), shape=(n, n)
    )
    diag = -np.asarray(off.sum(axis=1)).ravel()
    return (off + sparse.diags(diag)).tocsr()


def mixed_voronoi_areas(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """
    Mixed Voronoi vertex areas; they partition the total surface area exactly.

    Non-obtuse triangles contribute their Voronoi regions; an obtuse triangle
    gives half its area to the obtuse corner and a quarter to the others.
    """
    n = vertices.shape[0]
    cot, opposite_sq = corner_cotangents(vertices, faces)
    corners = vertices[faces]
    area = 0.5 * np.linalg.norm(
        np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0]), axis=1
    )
    voronoi = np.empty(faces.shape, dtype=float)
    for c in range(3):
        c1, c2 = (c + 1) % 3, (c + 2) % 3
        voronoi[:, c] = (opposite_sq[:, c1] * cot[:, c1] + opposite_sq[:, c2] * cot[:, c2]) / 8.0
    obtuse = cot < 0.0
    any_obtuse = obtuse.any(axis=1)
    contrib = np.where(any_obtuse[:, None], np.where(obtuse, 0.5, 0.25) * area[:, None], voronoi)
    areas = np.zeros(n)
    np.add.at(areas, faces.ravel(), contrib.ravel())
    return areas


@dataclass(frozen=True)
class LaplaceOperators:
    """
    Stiffness and lumped mass of the weak Laplace-Beltrami operator.

    Attributes:
        stiffness: Symmetric positive semidefinite S (sparse)
        mass: Diagonal of the lumped mass matrix M (vertex area weights)
    """
    stiffness: sparse.csr_matrix
    mass: np.ndarray

    @property
    def mass_matrix(self) -> sparse.dia_matrix:
        return sparse.diags(self.mass)

    def apply_laplacian(self, values: np.ndarray) -> np.ndarray:
        """Discrete Δ_τ f = -M⁻¹ S f (works column-wise on (N, k) arrays)."""
        sf = self.stiffness @ values
        if sf.ndim == 1:
            return -sf / self.mass
        return -sf / self.mass[:, None]

    def symmetry_error(self) -> float:
        diff = self.stiffness - self.stiffness.T
        return float(abs(diff).max()) if diff.nnz else 0.0

    def constant_residual(self) -> float:
        """Relative size of S·1, zero for an exact discretization of Δ_τ 1 = 0."""
        ones = np.ones(self.stiffness.shape[0])
        scale = float(abs(self.stiffness).sum(axis=1).max())
        return float(np.abs(self.stiffness @ ones).max()) / scale


def laplace_operators(b: "Boundary") -> LaplaceOperators:
    """
    Build the Laplace-Beltrami operators of a boundary.

    Args:
        b: Valid boundary

    Returns:
        LaplaceOperators with the boundary's stiffness and vertex areas
    """
    ops = LaplaceOperators(stiffness=b.stiffness, mass=b.vertex_areas.copy())
    logger.debug(f"Laplace operators on {b.n_vertices} vertices, nnz={ops.stiffness.nnz}")
    return ops


def lowest_eigenvalues(ops: LaplaceOperators, k: int) -> np.ndarray:
    """Lowest k eigenvalues of the pencil (S, M), dense solve."""
    s = ops.stiffness.toarray()
    m = np.diag(ops.mass)
    values = eigh(s, m, eigvals_only=True, subset_by_index=[0, k - 1])
    return np.asarray(values)
