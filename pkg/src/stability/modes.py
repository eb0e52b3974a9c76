"""
Closed-form second-variation spectrum of the ball and vertex test functions.

On the ball the kernel term is diagonal in spherical harmonics (Funk-Hecke):
c₃∫_{S_R}|x - y|⁻¹Y_ℓ(y)dσ(y) = R/(2ℓ+1)·Y_ℓ(x), and on the circle
(1/2π)∫_{S_R} log(1/|x - y|) cos(kθ_y) ds = R/(2k)·cos(kθ_x) for k ≥ 1.
"""

from dataclasses import dataclass
from typing import Optional
import logging

import numpy as np

from ..geometry.boundary import Boundary
from ..geometry.tessellation import fourier_mode, real_spherical_harmonic
from ..models.errors import UnsupportedOperationError

logger = logging.getLogger(__name__)


def ball_mode_eigenvalue(n: int, mode: int, gamma: float, radius: float = 1.0) -> float:
    """
    Exact eigenvalue of the second variation of the ball on mode ℓ (n=3) or k (n=2).

    n=3: (ℓ(ℓ+1) - 2)/R² + 2γR(1/(2ℓ+1) - 1/3)
    n=2: (k² - 1)/R² + γR(1/k - 1)

    Raises:
        ValueError: mode < 1 (constants violate the zero-average constraint) or bad n
    """
    if mode < 1:
        raise ValueError("Mode 0 is excluded by the zero-average constraint")
    if radius <= 0:
        raise ValueError("Radius must be positive")
    if n == 3:
        return (mode * (mode + 1) - 2) / radius ** 2 + 2.0 * gamma * radius * (1.0 / (2 * mode + 1) - 1.0 / 3.0)
    if n == 2:
        return (mode ** 2 - 1) / radius ** 2 + gamma * radius * (1.0 / mode - 1.0)
    raise ValueError(f"Unsupported dimension {n}")


def mode_multiplicity(n: int, mode: int) -> int:
    return 2 * mode + 1 if n == 3 else 2


@dataclass(frozen=True)
class BallMode:
    """One row of the analytic ball spectrum."""
    mode: int
    eigenvalue: float
    multiplicity: int

    def to_dict(self) -> dict:
        return {"mode": self.mode, "eigenvalue": self.eigenvalue, "multiplicity": self.multiplicity}


def ball_spectrum_table(n: int, max_mode: int, gamma: float, radius: float = 1.0) -> list[BallMode]:
    """Analytic eigenvalues for modes 1..max_mode with multiplicities."""
    return [
        BallMode(mode, ball_mode_eigenvalue(n, mode, gamma, radius), mode_multiplicity(n, mode))
        for mode in range(1, max_mode + 1)
    ]


def expanded_ball_spectrum(n: int, max_mode: int, gamma: float, radius: float = 1.0) -> np.ndarray:
    """Sorted eigenvalues repeated by multiplicity, as a discrete solver would list them."""
    values = []
    for row in ball_spectrum_table(n, max_mode, gamma, radius):
        values.extend([row.eigenvalue] * row.multiplicity)
    return np.sort(np.array(values))


def harmonic_function(b: Boundary, mode: int, order: int = 0, center: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Vertex samples of a spherical harmonic (n=3) or Fourier mode (n=2) about a center.

    For n=2, order selects cos (≥ 0) or sin (< 0).
    """
    center = b.volume_centroid if center is None else np.asarray(center, dtype=float)
    rel = b.vertices - center
    if b.dimension == 3:
        return real_spherical_harmonic(mode, order, rel)
    return fourier_mode(-mode if order < 0 else mode, rel)


def translation_mode(b: Boundary, direction: np.ndarray) -> np.ndarray:
    """φ = ν·e, the normal speed of a rigid translation along e."""
    e = np.asarray(direction, dtype=float)
    return b.vertex_normals @ (e / np.linalg.norm(e))


@dataclass(frozen=True)
class SupportFunctionIdentity:
    """
    Two evaluations of Q₀[φ] = ∫|D_τφ|² - |B|²φ² for φ = x·ν - σ, σ = n|E|/P.

    Attributes:
        direct: φᵀ(S - C)φ
        integrated: ∫(σ|B|² - H - x·∇_τH)φ dσ
        sigma: n|E|/P
    """
    direct: float
    integrated: float
    sigma: float

    def relative_difference(self, scale: Optional[float] = None) -> float:
        ref = scale if scale is not None else max(abs(self.direct), abs(self.integrated))
        return abs(self.direct - self.integrated) / ref if ref > 0 else 0.0

    def to_dict(self) -> dict:
        return {"direct": self.direct, "integrated": self.integrated, "sigma": self.sigma}


def support_function_identity(b: Boundary) -> SupportFunctionIdentity:
    """
    Check Δ_τφ = -|B|²φ - |B|²σ + H + x·∇_τH on the shifted support function.

    Positions are taken relative to the volume centroid.

    Raises:
        UnsupportedOperationError: for n=2
    """
    if b.dimension != 3:
        raise UnsupportedOperationError("The support-function identity is evaluated on surfaces in R³")
    curv = b.curvature
    areas = b.vertex_areas
    x = b.vertices - b.volume_centroid
    sigma = b.dimension * b.volume / b.perimeter
    phi = np.einsum("ij,ij->i", x, b.vertex_normals) - sigma
    direct = float(phi @ (b.stiffness @ phi) - np.dot(areas * curv.b_squared, phi ** 2))
    grad_h = b.tangential_gradient(curv.mean)
    rhs = sigma * curv.b_squared - curv.mean - np.einsum("ij,ij->i", x, grad_h)
    integrated = float(np.dot(areas * rhs, phi))
    logger.debug(f"Support identity: direct {direct:.6e}, integrated {integrated:.6e}, sigma {sigma:.6f}")
    return SupportFunctionIdentity(direct=direct, integrated=integrated, sigma=sigma)
