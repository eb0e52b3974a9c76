"""
Constrained generalized eigensolve of the second variation and the
locally-constant instability test for disconnected boundaries.
"""

from typing import Optional
import logging

import numpy as np
from scipy.linalg import LinAlgError, eigh

from ..geometry.boundary import Boundary
from ..models.errors import EigensolveError, GeometryError
from ..models.reports import SpectrumReport, Verdict
from ..potential.newtonian import PotentialField
from .second_variation import SecondVariation, assemble, quadratic_form

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 5e-2

# Fraction of the tolerance below which a negative μ₁ is reported as marginal.
MARGINAL_FRACTION = 0.1


def classify(lowest: float, scale: float, tolerance: float = DEFAULT_TOLERANCE) -> Verdict:
    """
    Verdict for the lowest constrained eigenvalue.

    unstable if μ₁ < -tol·scale, marginal if μ₁ < -0.1·tol·scale, stable otherwise.
    """
    if lowest < -tolerance * scale:
        return Verdict.UNSTABLE
    if lowest < -MARGINAL_FRACTION * tolerance * scale:
        return Verdict.MARGINAL
    return Verdict.STABLE


def _householder_to_first_axis(u: np.ndarray) -> np.ndarray:
    """Unit vector w with (I - 2wwᵀ)u = e₁ for a unit vector u."""
    target = np.zeros_like(u)
    target[0] = 1.0
    w = u - target
    norm = np.linalg.norm(w)
    if norm < 1e-14:
        return np.zeros_like(u)
    return w / norm


def spectrum(sv: SecondVariation, k: int = 10, tolerance: float = DEFAULT_TOLERANCE) -> SpectrumReport:
    """
    Lowest k eigenpairs of (Q, M) on {φ : ∫φ dσ = 0}.

    The problem is symmetrized with M^½, the constraint direction M^½·1 is
    rotated onto the first axis by a Householder reflection and dropped, and
    the remaining block is solved densely.

    Args:
        sv: Assembled second variation
        k: Number of eigenpairs, at most N - 1
        tolerance: Verdict margin relative to median |diag Q|

    Raises:
        ValueError: k out of range
        EigensolveError: the dense solver failed
    """
    n = sv.size
    if k < 1 or k > n - 1:
        raise ValueError(f"k must lie in [1, {n - 1}], got {k}")

    q = sv.matrix
    root = np.sqrt(sv.mass)
    inv_root = 1.0 / root
    a = q * inv_root[:, None] * inv_root[None, :]

    u = root / np.linalg.norm(root)
    w = _householder_to_first_axis(u)
    aw = a @ w
    waw = float(w @ aw)
    reflected = a - 2.0 * np.outer(w, aw) - 2.0 * np.outer(aw, w) + 4.0 * waw * np.outer(w, w)
    block = reflected[1:, 1:]
    block = 0.5 * (block + block.T)

    try:
        values, vectors = eigh(block, subset_by_index=[0, k - 1])
    except (LinAlgError, ValueError) as e:
        logger.error(f"Eigensolve failed for a {n - 1}-dimensional block", exc_info=True)
        raise EigensolveError(f"Dense eigensolve failed: {e}", iterations=n - 1) from e

    psi = np.vstack([np.zeros((1, k)), vectors])
    psi = psi - 2.0 * np.outer(w, w @ psi)
    phi = inv_root[:, None] * psi

    scale = float(np.median(np.abs(np.diag(q))))
    verdict = classify(float(values[0]), scale, tolerance)
    logger.info(
        f"Spectrum (gamma={sv.gamma}): mu_1={values[0]:.6f}, scale={scale:.4e}, verdict={verdict.value}"
    )
    return SpectrumReport(
        eigenvalues=np.asarray(values),
        eigenfunctions=phi,
        verdict=verdict,
        tolerance=tolerance,
        scale=scale,
        gamma=sv.gamma,
    )


def locally_constant_function(b: Boundary, first_component: int = 0) -> np.ndarray:
    """
    φ = 1 on one component and -α on the others, α fixing ∫φ dσ = 0.

    Raises:
        GeometryError: boundary with a single component
    """
    if b.n_components < 2:
        raise GeometryError("Two-component test needs a boundary with at least two components")
    labels = b.component_labels
    inside = labels == first_component
    areas = b.vertex_areas
    alpha = areas[inside].sum() / areas[~inside].sum()
    return np.where(inside, 1.0, -alpha)


def two_component_test(
    b: Boundary,
    gamma: float,
    field: Optional[PotentialField] = None,
    sv: Optional[SecondVariation] = None,
) -> float:
    """
    Q[φ] for the locally constant test function.

    The gradient term vanishes identically, leaving the curvature, potential
    and kernel contributions.

    Raises:
        GeometryError: boundary with a single component
    """
    phi = locally_constant_function(b)
    sv = sv if sv is not None else assemble(b, gamma, field=field)
    value = quadratic_form(sv, phi)
    logger.info(f"Two-component test (gamma={gamma}): Q = {value:.6f}")
    return value
