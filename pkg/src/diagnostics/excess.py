"""
Localized perimeter P(E, B_r(x)), excess and the monotonicity profile.

Faces are clipped exactly against the ball: a triangle is intersected with
the disk that the ball cuts out of its plane, a segment with the ball's
chord. The result is the exact localized perimeter of the polyhedral set.
"""

from dataclasses import dataclass
from typing import Iterable, Optional
import logging
import math

import numpy as np

from ..geometry.boundary import Boundary
from ..models.errors import GeometryError
from ..models.shapes import unit_ball_volume

logger = logging.getLogger(__name__)

# Probe radii must resolve at least two edges.
MIN_RADIUS_EDGES = 2.0
MONOTONICITY_TOLERANCE = 0.01


def _cross2(u: np.ndarray, w: np.ndarray) -> float:
    return float(u[0] * w[1] - u[1] * w[0])


def _edge_disk_area(p: np.ndarray, q: np.ndarray, radius: float) -> float:
    """Signed area of triangle (0, p, q) intersected with the disk of the given radius at 0."""
    d = q - p
    a = float(d @ d)
    if a == 0.0:
        return 0.0
    b = 2.0 * float(p @ d)
    c = float(p @ p) - radius ** 2
    cuts = [0.0, 1.0]
    disc = b * b - 4.0 * a * c
    if disc > 0:
        root = math.sqrt(disc)
        cuts.extend(t for t in ((-b - root) / (2 * a), (-b + root) / (2 * a)) if 0.0 < t < 1.0)
    cuts.sort()

    total = 0.0
    for t0, t1 in zip(cuts[:-1], cuts[1:]):
        u = p + t0 * d
        w = p + t1 * d
        mid = p + 0.5 * (t0 + t1) * d
        if mid @ mid <= radius ** 2:
            total += 0.5 * _cross2(u, w)
        else:
            total += 0.5 * radius ** 2 * math.atan2(_cross2(u, w), float(u @ w))
    return total


def triangle_ball_area(corners: np.ndarray, normal: np.ndarray, center: np.ndarray, radius: float) -> float:
    """Area of a flat triangle inside the ball B_radius(center)."""
    offset = float((corners[0] - center) @ normal)
    if abs(offset) >= radius:
        return 0.0
    disk_radius = math.sqrt(radius ** 2 - offset ** 2)
    foot = center + offset * normal
    e1 = corners[1] - corners[0]
    e1 = e1 / np.linalg.norm(e1)
    e2 = np.cross(normal, e1)
    local = np.column_stack([(corners - foot) @ e1, (corners - foot) @ e2])
    signed = sum(_edge_disk_area(local[i], local[(i + 1) % 3], disk_radius) for i in range(3))
    return abs(signed)


def _segment_ball_lengths(b: Boundary, center: np.ndarray, radius: float) -> np.ndarray:
    start = b.vertices[b.faces[:, 0]] - center
    d = b.vertices[b.faces[:, 1]] - b.vertices[b.faces[:, 0]]
    a = np.einsum("ij,ij->i", d, d)
    half_b = np.einsum("ij,ij->i", start, d)
    c = np.einsum("ij,ij->i", start, start) - radius ** 2
    disc = half_b ** 2 - a * c
    root = np.sqrt(np.clip(disc, 0.0, None))
    t0 = np.clip((-half_b - root) / a, 0.0, 1.0)
    t1 = np.clip((-half_b + root) / a, 0.0, 1.0)
    return np.where(disc > 0, (t1 - t0) * np.sqrt(a), 0.0)


def clipped_perimeter(b: Boundary, x: np.ndarray, r: float) -> float:
    """P(E, B_r(x)): boundary measure inside the open ball."""
    center = np.asarray(x, dtype=float)
    if b.dimension == 2:
        return float(_segment_ball_lengths(b, center, r).sum())

    corners = b.vertices[b.faces]
    dist = np.linalg.norm(corners - center, axis=2)
    inside = np.all(dist <= r, axis=1)
    total = float(b.face_measures[inside].sum())

    # Faces with a vertex inside or a centroid close enough to cross the sphere.
    near = np.linalg.norm(b.face_centroids - center, axis=1) <= r + b.max_edge_length
    for f in np.nonzero(near & ~inside)[0]:
        total += triangle_ball_area(corners[f], b.face_normals[f], center, r)
    return total


def _check_radius(b: Boundary, r: float) -> None:
    h = b.max_edge_length
    if r <= MIN_RADIUS_EDGES * h:
        raise ValueError(f"Radius {r:.4g} does not resolve the mesh (needs r > {MIN_RADIUS_EDGES:g}h = {MIN_RADIUS_EDGES * h:.4g})")


def excess(b: Boundary, x: np.ndarray, r: float) -> float:
    """
    σ(E, x, r) = |P(E, B_r(x)) - ω_{n-1}r^{n-1}| / r^{n-1}.

    Raises:
        ValueError: r ≤ 2h with h the longest edge
    """
    _check_radius(b, r)
    n = b.dimension
    local = clipped_perimeter(b, x, r)
    return abs(local - unit_ball_volume(n - 1) * r ** (n - 1)) / r ** (n - 1)


@dataclass(frozen=True)
class MonotonicityProfile:
    """
    Samples of s ↦ P(E, B_s(x))·s^{1-n}·e^{C₀s}.

    Attributes:
        radii: Increasing radii s
        values: Profile values
        c0: Curvature bound C₀
        passed: Each step is nondecreasing up to the relative tolerance
        marginal: Some step decreased, but within tolerance
    """
    radii: tuple[float, ...]
    values: tuple[float, ...]
    c0: float
    passed: bool
    marginal: bool

    def to_rows(self) -> list[dict]:
        return [{"radius": s, "value": v} for s, v in zip(self.radii, self.values)]

    def to_dict(self) -> dict:
        return {
            "radii": list(self.radii),
            "values": list(self.values),
            "c0": self.c0,
            "passed": self.passed,
            "marginal": self.marginal,
        }


def monotonicity_profile(
    b: Boundary,
    x: np.ndarray,
    c0: float,
    radii: Iterable[float],
    strict: bool = True,
    tolerance: float = MONOTONICITY_TOLERANCE,
) -> MonotonicityProfile:
    """
    Evaluate the monotonicity profile at a boundary point.

    Args:
        b: Boundary
        x: Base point on the boundary
        c0: Bound on |H|
        radii: Radii s, each above 2h
        strict: Enforce |H| ≤ C₀ at every vertex
        tolerance: Allowed relative decrease per step

    Raises:
        GeometryError: strict and some vertex has |H| > C₀ (ids attached)
        ValueError: a radius does not resolve the mesh
    """
    if c0 < 0:
        raise ValueError("C0 must be nonnegative")
    if strict:
        violating = np.nonzero(np.abs(b.curvature.mean) > c0 * (1.0 + 1e-12))[0]
        if len(violating):
            raise GeometryError(
                f"|H| exceeds C0={c0:.6g} at {len(violating)} vertices (max {np.abs(b.curvature.mean).max():.6g})",
                vertex_ids=violating.tolist(),
            )
    radii = sorted(float(s) for s in radii)
    n = b.dimension
    values = []
    for s in radii:
        _check_radius(b, s)
        values.append(clipped_perimeter(b, x, s) * s ** (1 - n) * math.exp(c0 * s))

    ratios = np.array(values[1:]) / np.array(values[:-1]) if len(values) > 1 else np.ones(0)
    passed = bool(np.all(ratios >= 1.0 - tolerance))
    marginal = bool(passed and np.any(ratios < 1.0))
    if marginal:
        logger.info(f"Monotonicity profile at {np.round(x, 4)} dips by {1 - ratios.min():.3e} within tolerance")
    elif not passed:
        logger.warning(f"Monotonicity profile at {np.round(x, 4)} decreases by {1 - ratios.min():.3e}")
    return MonotonicityProfile(
        radii=tuple(radii), values=tuple(values), c0=c0, passed=passed, marginal=marginal
    )


def default_radii(b: Boundary, count: int = 8, upper: Optional[float] = None) -> np.ndarray:
    """Geometric radii from just above 2h up to a fraction of the extent."""
    lower = 2.5 * b.max_edge_length
    if upper is None:
        extent = np.ptp(b.vertices, axis=0).max()
        upper = max(0.75 * extent, 1.5 * lower)
    return np.geomspace(lower, upper, count)
