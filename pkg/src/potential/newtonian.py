"""
Newtonian potential, its gradient, the nonlocal energy and the boundary kernel matrix.

Everything is reduced to boundary integrals over the flat panels of a
Boundary:

    v(x)  = c·½ Σ_T ((p_T - x)·ν_T) ∫_T |x - y|⁻¹            (n=3)
    v(x)  = c·[½ Σ_e ((p_e - x)·ν_e) ∫_e log(1/|x - y|) + ½|E|]   (n=2)
    ∇v(x) = -c Σ_T ν_T ∫_T k(x, y)
    NL    = -c ∬ f(|x - y|) ν(x)·ν(y),  f = r/2 (n=3), (r²/4)(1 + log(1/r)) (n=2)

with p_T any point of panel T.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Union
import logging

import numpy as np
from scipy import sparse
from scipy.optimize import minimize
from scipy.spatial.distance import cdist

from ..geometry.boundary import Boundary
from ..models.errors import UnsupportedOperationError, VertexCapExceededError
from .kernel import (
    KernelParams,
    ball_gradient_max,
    ball_nonlocal_energy,
    ball_potential_max,
    equivalent_radius,
)
from .panels import gauss_rule, segment_log_layer, triangle_single_layer

logger = logging.getLogger(__name__)

DEFAULT_VERTEX_CAP = 8000

# Upper bound on the number of (point, panel) pairs held in memory per chunk.
_CHUNK_PAIRS = 2_000_000


@dataclass(frozen=True)
class PotentialField:
    """
    Newtonian potential sampled at the boundary vertices.

    Attributes:
        values: v_E per vertex
        gradient: ∇v_E per vertex, (N, n)
        normal_derivative: ∂_ν v_E per vertex
    """
    values: np.ndarray
    gradient: np.ndarray
    normal_derivative: np.ndarray

    def to_dict(self) -> dict:
        return {
            "values": self.values.tolist(),
            "normal_derivative": self.normal_derivative.tolist(),
        }


def _chunks(count: int, panels: int) -> list[slice]:
    size = max(1, _CHUNK_PAIRS // max(panels, 1))
    return [slice(start, min(start + size, count)) for start in range(0, count, size)]


def _panel_integrals(b: Boundary, points: np.ndarray) -> np.ndarray:
    """Single-layer panel integrals (P, F) of the dimension's kernel, without the constant."""
    corners = b.vertices[b.faces]
    if b.dimension == 3:
        return triangle_single_layer(points, corners)
    return segment_log_layer(points, corners)


def _map_chunks(
    count: int,
    panels: int,
    work: Callable[[slice], np.ndarray],
    threads: int,
) -> list[np.ndarray]:
    slices = _chunks(count, panels)
    if threads > 1 and len(slices) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(work, slices))
    return [work(s) for s in slices]


def _evaluate(b: Boundary, points: np.ndarray, threads: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Potential and gradient at arbitrary points."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != b.dimension:
        raise ValueError(f"Points must have {b.dimension} coordinates")
    c = KernelParams(b.dimension).constant
    normals = b.face_normals
    offsets = np.einsum("ij,ij->i", b.vertices[b.faces[:, 0]], normals)

    def work(rows: slice) -> np.ndarray:
        x = points[rows]
        integrals = _panel_integrals(b, x)
        support = offsets[None, :] - x @ normals.T
        value = 0.5 * np.sum(integrals * support, axis=1)
        if b.dimension == 2:
            value += 0.5 * b.volume
        grad = -(integrals @ normals)
        return np.column_stack([c * value, c * grad])

    out = np.vstack(_map_chunks(len(points), b.n_faces, work, threads))
    return out[:, 0], out[:, 1:]


def potential_at(b: Boundary, x: np.ndarray) -> Union[float, np.ndarray]:
    """
    Newtonian potential v_E at a point, or at each row of an (P, n) array.

    Points may lie anywhere, including on the boundary.
    """
    x = np.asarray(x, dtype=float)
    values, _ = _evaluate(b, x)
    return float(values[0]) if x.ndim == 1 else values


def gradient_at(b: Boundary, x: np.ndarray) -> np.ndarray:
    """∇v_E at a point or at each row of an (P, n) array."""
    x = np.asarray(x, dtype=float)
    _, grad = _evaluate(b, x)
    return grad[0] if x.ndim == 1 else grad


def potential_field(b: Boundary, threads: int = 1) -> PotentialField:
    """Potential, gradient and normal derivative at every vertex."""
    values, grad = _evaluate(b, b.vertices, threads)
    dnu = np.einsum("ij,ij->i", grad, b.vertex_normals)
    logger.debug(f"Potential field on {b.n_vertices} vertices: max v {values.max():.6f}")
    return PotentialField(values=values, gradient=grad, normal_derivative=dnu)


def normal_derivative(b: Boundary, threads: int = 1) -> np.ndarray:
    """∂_ν v_E at every vertex."""
    return potential_field(b, threads).normal_derivative


def _double_layer_profile(n: int) -> Callable[[np.ndarray], np.ndarray]:
    if n == 3:
        return lambda r: 0.5 * r

    def profile(r: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            value = 0.25 * r ** 2 * (1.0 - np.log(r))
        return np.where(r > 0, value, 0.0)

    return profile


def nonlocal_energy(b: Boundary, threads: int = 1, rule: str = "gauss") -> float:
    """
    NL(E) = ∬_{E×E} G(x, y) dx dy by the double boundary reduction.

    The reduced kernel is continuous, so no singular treatment is required.

    Args:
        b: Boundary
        threads: Worker threads
        rule: "gauss" (three points per panel) or "centroid" (one point per
            panel, used for cheap energy comparisons inside flows)
    """
    c = KernelParams(b.dimension).constant
    profile = _double_layer_profile(b.dimension)
    if rule == "gauss":
        points, weights, face_index = gauss_rule(b.vertices, b.faces, b.face_measures)
    elif rule == "centroid":
        points, weights, face_index = b.face_centroids, b.face_measures, np.arange(b.n_faces)
    else:
        raise ValueError(f"Unknown quadrature rule {rule!r}")
    q = weights[:, None] * b.face_normals[face_index]

    def work(rows: slice) -> np.ndarray:
        dist = cdist(points[rows], points)
        return np.array([np.einsum("ij,ij->", q[rows], profile(dist) @ q)])

    parts = _map_chunks(len(points), len(points), work, threads)
    value = -c * float(np.sum(parts))
    logger.debug(f"NL = {value:.8f} from {len(points)} quadrature points")
    return value


def _incidence(b: Boundary) -> sparse.csr_matrix:
    """Panel-to-vertex lumping: each panel shares its integral equally among its corners."""
    k = b.faces.shape[1]
    rows = np.repeat(np.arange(b.n_faces), k)
    data = np.full(rows.size, 1.0 / k)
    return sparse.csr_matrix((data, (rows, b.faces.ravel())), shape=(b.n_faces, b.n_vertices))


def kernel_matrix(b: Boundary, vertex_cap: int = DEFAULT_VERTEX_CAP, threads: int = 1) -> np.ndarray:
    """
    Dense symmetric matrix of c_n ∬ φ_i(x) φ_j(y) k(|x - y|) dσ dσ over hat functions.

    Rows collocate at vertex i with weight A_i; columns integrate exactly over
    each panel and lump the panel integral onto its corners. The result is
    symmetrized.

    Raises:
        VertexCapExceededError: vertex count above vertex_cap
    """
    if b.n_vertices > vertex_cap:
        raise VertexCapExceededError(
            f"Kernel matrix for {b.n_vertices} vertices exceeds the cap of {vertex_cap}"
        )
    c = KernelParams(b.dimension).constant
    lump = _incidence(b).T.tocsr()
    areas = b.vertex_areas

    def work(rows: slice) -> np.ndarray:
        integrals = _panel_integrals(b, b.vertices[rows])
        return c * areas[rows, None] * (lump @ integrals.T).T

    k = np.vstack(_map_chunks(b.n_vertices, b.n_faces, work, threads))
    k = 0.5 * (k + k.T)
    logger.info(f"Assembled {b.n_vertices}x{b.n_vertices} kernel matrix")
    return k


@dataclass(frozen=True)
class KernelRowCheck:
    """
    Row bound max_x ∫_{∂E} |x - y|⁻¹ dσ(y) ≤ C·P(E).

    Attributes:
        ratio: max row integral divided by the perimeter
        reference_ratio: the same ratio on the ball of equal volume
        calibration: C, twice the ball ratio
    """
    ratio: float
    reference_ratio: float
    calibration: float

    @property
    def passed(self) -> bool:
        return self.ratio <= self.calibration

    def to_dict(self) -> dict:
        return {
            "ratio": self.ratio,
            "reference_ratio": self.reference_ratio,
            "calibration": self.calibration,
            "passed": self.passed,
        }


def kernel_row_ratio(b: Boundary, threads: int = 1) -> KernelRowCheck:
    """
    Largest kernel row integral relative to the perimeter (n=3).

    On a sphere of radius R every row integral is 4πR, so the ratio is 1/R;
    the calibration uses the sphere of the same enclosed volume.

    Raises:
        UnsupportedOperationError: for n=2, where the row bound uses a sign-changing kernel
    """
    if b.dimension != 3:
        raise UnsupportedOperationError("Kernel row bound is stated for n ≥ 3 kernels only")

    def work(rows: slice) -> np.ndarray:
        return _panel_integrals(b, b.vertices[rows]).sum(axis=1)

    rows = np.concatenate(_map_chunks(b.n_vertices, b.n_faces, work, threads))
    ratio = float(rows.max()) / b.perimeter
    reference = 1.0 / equivalent_radius(3, b.volume)
    return KernelRowCheck(ratio=ratio, reference_ratio=reference, calibration=2.0 * reference)


@dataclass(frozen=True)
class RearrangementCheck:
    """
    Comparison with the ball of equal volume, which maximizes v, |∇v| and NL.

    Attributes:
        potential_max: max v over E (interior search)
        gradient_max: max |∇v| over the boundary vertices
        nonlocal_energy: NL(E)
        ball_*: the same quantities for the equal-volume ball
        tolerance: relative slack on the potential bound
        energy_tolerance: relative slack on the NL bound
    """
    potential_max: float
    gradient_max: float
    nonlocal_energy: float
    ball_potential_max: float
    ball_gradient_max: float
    ball_nonlocal_energy: float
    tolerance: float = 0.05
    energy_tolerance: float = 0.01

    @property
    def potential_passed(self) -> bool:
        bound = self.ball_potential_max + self.ball_gradient_max
        return self.potential_max + self.gradient_max <= bound * (1.0 + self.tolerance)

    @property
    def energy_passed(self) -> bool:
        return self.nonlocal_energy <= self.ball_nonlocal_energy * (1.0 + self.energy_tolerance)

    @property
    def passed(self) -> bool:
        return self.potential_passed and self.energy_passed

    def to_dict(self) -> dict:
        return {
            "potential_max": self.potential_max,
            "gradient_max": self.gradient_max,
            "nonlocal_energy": self.nonlocal_energy,
            "ball_potential_max": self.ball_potential_max,
            "ball_gradient_max": self.ball_gradient_max,
            "ball_nonlocal_energy": self.ball_nonlocal_energy,
            "potential_passed": self.potential_passed,
            "energy_passed": self.energy_passed,
        }


def maximize_potential(b: Boundary, start: Optional[np.ndarray] = None) -> float:
    """max v_E by a simplex search from the volume centroid."""
    x0 = b.volume_centroid if start is None else np.asarray(start, dtype=float)
    result = minimize(
        lambda x: -potential_at(b, x),
        x0,
        method="Nelder-Mead",
        options={"xatol": 1e-6, "fatol": 1e-10, "maxiter": 400},
    )
    return float(-result.fun)


def rearrangement_check(
    b: Boundary,
    field: Optional[PotentialField] = None,
    nl: Optional[float] = None,
    tolerance: float = 0.05,
) -> RearrangementCheck:
    """Compare max v, max |∇v| and NL with the ball of the same volume."""
    field = field if field is not None else potential_field(b)
    nl = nl if nl is not None else nonlocal_energy(b)
    n = b.dimension
    vol = b.volume
    return RearrangementCheck(
        potential_max=max(maximize_potential(b), float(field.values.max())),
        gradient_max=float(np.linalg.norm(field.gradient, axis=1).max()),
        nonlocal_energy=nl,
        ball_potential_max=ball_potential_max(n, vol),
        ball_gradient_max=ball_gradient_max(n, vol),
        ball_nonlocal_energy=ball_nonlocal_energy(n, vol),
        tolerance=tolerance,
    )

