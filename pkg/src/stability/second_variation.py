"""
Assembly of the second-variation quadratic form

    Q[φ] = ∫|D_τφ|² - ∫|B|²φ² + 2γ∫∂_ν v φ² + 2γ ∬ G(x, y) φ(x) φ(y)

on piecewise linear vertex functions, together with the zero-average constraint.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Optional
import logging

import numpy as np
from scipy import sparse

from ..geometry.boundary import Boundary
from ..models.errors import ConstraintViolationError
from ..potential.newtonian import DEFAULT_VERTEX_CAP, PotentialField, kernel_matrix, potential_field

logger = logging.getLogger(__name__)

CONSTRAINT_TOLERANCE = 1e-8


@dataclass(frozen=True)
class SecondVariation:
    """
    Matrices of the second variation over vertex functions.

    Attributes:
        gamma: Coupling γ
        stiffness: S, from ∫|D_τφ|²
        curvature_mass: diag C = A·|B|²
        potential_mass: diag V = 2γ·A·∂_ν v
        kernel: K with φᵀKφ ≈ ∬ Gφφ, None when γ = 0
        mass: diag M = vertex areas
        constraint: a with aᵀφ = ∫φ dσ
    """
    gamma: float
    stiffness: sparse.csr_matrix
    curvature_mass: np.ndarray
    potential_mass: np.ndarray
    kernel: Optional[np.ndarray]
    mass: np.ndarray
    constraint: np.ndarray

    @property
    def size(self) -> int:
        return int(self.mass.shape[0])

    @cached_property
    def matrix(self) -> np.ndarray:
        """Dense symmetric Q = S - C + V + 2γK."""
        q = self.stiffness.toarray()
        q[np.diag_indices_from(q)] += self.potential_mass - self.curvature_mass
        if self.kernel is not None:
            q += 2.0 * self.gamma * self.kernel
        return 0.5 * (q + q.T)

    def symmetry_error(self) -> float:
        parts = [abs(self.stiffness - self.stiffness.T).max() if self.stiffness.nnz else 0.0]
        if self.kernel is not None:
            parts.append(np.abs(self.kernel - self.kernel.T).max())
        return float(max(parts))

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "size": self.size,
            "stiffness_nnz": int(self.stiffness.nnz),
            "has_kernel": self.kernel is not None,
            "total_area": float(self.mass.sum()),
        }


def assemble(
    b: Boundary,
    gamma: float,
    field: Optional[PotentialField] = None,
    vertex_cap: int = DEFAULT_VERTEX_CAP,
    threads: int = 1,
) -> SecondVariation:
    """
    Assemble the second variation of J at E.

    Args:
        b: Boundary
        gamma: Coupling γ ≥ 0
        field: Precomputed potential field
        vertex_cap: Dense assembly guard for the kernel matrix
        threads: Worker threads for kernel rows

    Raises:
        VertexCapExceededError: kernel matrix above vertex_cap
    """
    if gamma < 0:
        raise ValueError("Gamma must be nonnegative")
    areas = b.vertex_areas
    curvature_mass = areas * b.curvature.b_squared
    if gamma > 0:
        field = field if field is not None else potential_field(b, threads)
        potential_mass = 2.0 * gamma * areas * field.normal_derivative
        kernel = kernel_matrix(b, vertex_cap=vertex_cap, threads=threads)
    else:
        potential_mass = np.zeros(b.n_vertices)
        kernel = None
    sv = SecondVariation(
        gamma=gamma,
        stiffness=b.stiffness,
        curvature_mass=curvature_mass,
        potential_mass=potential_mass,
        kernel=kernel,
        mass=areas.copy(),
        constraint=areas.copy(),
    )
    logger.info(f"Assembled second variation on {b.n_vertices} vertices (gamma={gamma})")
    return sv


def check_constraint(sv: SecondVariation, phi: np.ndarray, tolerance: float = CONSTRAINT_TOLERANCE) -> None:
    """
    Raise unless ∫φ dσ vanishes relative to ∫|φ| dσ.

    Raises:
        ConstraintViolationError: the test function has nonzero average
    """
    phi = np.asarray(phi, dtype=float)
    scale = float(np.dot(sv.constraint, np.abs(phi))) or 1.0
    average = float(np.dot(sv.constraint, phi))
    if abs(average) > tolerance * scale:
        raise ConstraintViolationError(
            f"Test function violates the zero-average constraint: aᵀφ = {average:.3e}"
        )


def project_zero_average(sv: SecondVariation, phi: np.ndarray) -> np.ndarray:
    """Remove the area-weighted mean of φ."""
    phi = np.asarray(phi, dtype=float)
    return phi - np.dot(sv.constraint, phi) / sv.constraint.sum()


def quadratic_form(sv: SecondVariation, phi: np.ndarray) -> float:
    """
    Q[φ] for a zero-average vertex function.

    Raises:
        ConstraintViolationError: aᵀφ ≠ 0
    """
    check_constraint(sv, phi)
    phi = np.asarray(phi, dtype=float)
    return float(phi @ (sv.matrix @ phi))


def mass_form(sv: SecondVariation, phi: np.ndarray) -> float:
    """∫φ² dσ with the lumped mass."""
    phi = np.asarray(phi, dtype=float)
    return float(np.dot(sv.mass, phi ** 2))


def rayleigh_quotient(sv: SecondVariation, phi: np.ndarray) -> float:
    return quadratic_form(sv, phi) / mass_form(sv, phi)


def gamma_derivative(sv: SecondVariation, phi: np.ndarray) -> float:
    """dQ/dγ[φ] = 2∫∂_ν v φ² + 2∬Gφφ; Q is affine in γ."""
    phi = np.asarray(phi, dtype=float)
    if sv.gamma == 0 or sv.kernel is None:
        raise ValueError("The γ-derivative needs a form assembled with γ > 0")
    return float(np.dot(sv.potential_mass / sv.gamma, phi ** 2) + 2.0 * phi @ (sv.kernel @ phi))
