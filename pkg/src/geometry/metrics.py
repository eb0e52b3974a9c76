"""Global and per-vertex geometric measures of a boundary."""

from dataclasses import dataclass
import logging

import numpy as np
from scipy.spatial import ConvexHull, QhullError
from scipy.spatial.distance import directed_hausdorff, pdist

from ..models.errors import OrientationError, UnsupportedOperationError
from .boundary import Boundary, CurvatureField

logger = logging.getLogger(__name__)


def perimeter(b: Boundary) -> float:
    """Total (n-1)-measure P(E) of the boundary."""
    return b.perimeter


def volume(b: Boundary) -> float:
    """
    Enclosed volume |E| by the divergence theorem.

    Raises:
        OrientationError: if the signed volume is not positive
    """
    value = b.volume
    if value <= 0:
        raise OrientationError(f"Signed volume {value:.6e} is not positive")
    return value


def curvatures(b: Boundary) -> CurvatureField:
    """Per-vertex mean curvature, |B|² and principal curvatures."""
    return b.curvature


def diameter(b: Boundary) -> float:
    """Maximum pairwise vertex distance."""
    points = b.vertices
    if len(points) > b.dimension + 1:
        try:
            points = points[ConvexHull(points).vertices]
        except QhullError:
            logger.debug("Convex hull failed, falling back to all vertex pairs")
    return float(pdist(points).max())


def hausdorff_distance(a: Boundary, b: Boundary) -> float:
    """Symmetric Hausdorff distance between the vertex sets of two boundaries."""
    forward = directed_hausdorff(a.vertices, b.vertices)[0]
    backward = directed_hausdorff(b.vertices, a.vertices)[0]
    return float(max(forward, backward))


def euler_characteristic(b: Boundary) -> int:
    return b.euler_characteristic()


def genus_estimate(b: Boundary) -> float:
    """Average genus per component from χ = 2c - 2g (n=3, reported only)."""
    if b.dimension != 3:
        return 0.0
    return (2 * b.n_components - b.euler_characteristic()) / 2.0


def _area_norm(b: Boundary, field: np.ndarray) -> float:
    sq = np.einsum("ij,ij->i", field, field) if field.ndim == 2 else field ** 2
    return float(np.sqrt(np.sum(b.vertex_areas * sq)))


@dataclass(frozen=True)
class IdentityResiduals:
    """
    Discrete L² norms of the two surface identities Δx = -Hν and Δν = -|B|²ν + ∇H.

    Attributes:
        position: ‖Δ_τ x + Hν‖
        normal: ‖Δ_τ ν + |B|²ν - ∇_τ H‖
        position_scale: ‖Hν‖, for relative comparisons
        normal_scale: ‖|B|²ν‖
    """
    position: float
    normal: float
    position_scale: float
    normal_scale: float

    @property
    def relative_position(self) -> float:
        return self.position / self.position_scale

    @property
    def relative_normal(self) -> float:
        return self.normal / self.normal_scale

    def to_dict(self) -> dict:
        return {
            "position": self.position,
            "normal": self.normal,
            "position_scale": self.position_scale,
            "normal_scale": self.normal_scale,
        }


def geometric_identity_residuals(b: Boundary) -> IdentityResiduals:
    """
    Residuals of the surface identities used in the umbilicity argument.

    Raises:
        UnsupportedOperationError: for polygons (n=2)
    """
    if b.dimension != 3:
        raise UnsupportedOperationError("Geometric identity residuals are defined for surfaces in R³ only")
    curv = b.curvature
    nu = b.vertex_normals
    mass = b.vertex_areas[:, None]
    lap_x = -(b.stiffness @ b.vertices) / mass
    lap_nu = -(b.stiffness @ nu) / mass
    h_nu = curv.mean[:, None] * nu
    b2_nu = curv.b_squared[:, None] * nu
    grad_h = b.tangential_gradient(curv.mean)
    result = IdentityResiduals(
        position=_area_norm(b, lap_x + h_nu),
        normal=_area_norm(b, lap_nu + b2_nu - grad_h),
        position_scale=_area_norm(b, h_nu),
        normal_scale=_area_norm(b, b2_nu),
    )
    logger.debug(
        f"Identity residuals: position {result.relative_position:.3e}, normal {result.relative_normal:.3e}"
    )
    return result
