"""
Tessellation of analytic shapes into Boundary objects.

n=3 shapes are built from subdivided icosahedra, n=2 shapes from uniformly
sampled polygons.
"""

from functools import lru_cache
import logging
import math

import numpy as np
from scipy.special import lpmv

from ..models.errors import GeometryError, UnsupportedOperationError
from ..models.shapes import (
    Annulus,
    Ball,
    BallUnion,
    Ellipsoid,
    PerturbedBall,
    ShapeSpec,
)
from .boundary import Boundary

logger = logging.getLogger(__name__)

_PHI = (1.0 + math.sqrt(5.0)) / 2.0

_ICOSAHEDRON_VERTICES = np.array([
    [-1, _PHI, 0], [1, _PHI, 0], [-1, -_PHI, 0], [1, -_PHI, 0],
    [0, -1, _PHI], [0, 1, _PHI], [0, -1, -_PHI], [0, 1, -_PHI],
    [_PHI, 0, -1], [_PHI, 0, 1], [-_PHI, 0, -1], [-_PHI, 0, 1],
], dtype=float)

_ICOSAHEDRON_FACES = np.array([
    [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
    [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
    [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
    [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
], dtype=np.int64)

# Angular grid used to find the peak of each associated Legendre factor.
_PEAK_GRID = np.linspace(0.0, math.pi, 4001)


def _subdivide(vertices: np.ndarray, faces: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One midpoint subdivision step, new vertices projected onto the unit sphere."""
    n = len(vertices)
    a, b, c = faces[:, 0], faces[:, 1], faces[:, 2]
    pairs = np.concatenate([np.column_stack([a, b]), np.column_stack([b, c]), np.column_stack([c, a])])
    pairs = np.sort(pairs, axis=1)
    unique, inverse = np.unique(pairs, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    mids = 0.5 * (vertices[unique[:, 0]] + vertices[unique[:, 1]])
    mids /= np.linalg.norm(mids, axis=1)[:, None]
    f = len(faces)
    ab = n + inverse[:f]
    bc = n + inverse[f:2 * f]
    ca = n + inverse[2 * f:]
    new_faces = np.concatenate([
        np.column_stack([a, ab, ca]),
        np.column_stack([b, bc, ab]),
        np.column_stack([c, ca, bc]),
        np.column_stack([ab, bc, ca]),
    ])
    return np.vstack([vertices, mids]), new_faces


@lru_cache(maxsize=8)
def _unit_icosphere(level: int) -> tuple[np.ndarray, np.ndarray]:
    vertices = _ICOSAHEDRON_VERTICES / np.linalg.norm(_ICOSAHEDRON_VERTICES, axis=1)[:, None]
    faces = _ICOSAHEDRON_FACES.copy()
    for _ in range(level):
        vertices, faces = _subdivide(vertices, faces)
    x = vertices[faces]
    normals = np.cross(x[:, 1] - x[:, 0], x[:, 2] - x[:, 0])
    inward = np.einsum("ij,ij->i", normals, x.mean(axis=1)) < 0
    faces[inward] = faces[inward][:, ::-1]
    vertices.setflags(write=False)
    faces.setflags(write=False)
    return vertices, faces


def icosphere(level: int) -> tuple[np.ndarray, np.ndarray]:
    """Unit icosphere with 10·4^level + 2 vertices, outward oriented."""
    vertices, faces = _unit_icosphere(level)
    return vertices.copy(), faces.copy()


def unit_circle(count: int) -> tuple[np.ndarray, np.ndarray]:
    """Counterclockwise regular polygon inscribed in the unit circle."""
    theta = 2.0 * np.pi * np.arange(count) / count
    vertices = np.column_stack([np.cos(theta), np.sin(theta)])
    idx = np.arange(count)
    edges = np.column_stack([idx, (idx + 1) % count])
    return vertices, edges


def _peak_legendre(ell: int, m: int) -> float:
    return float(np.abs(lpmv(abs(m), ell, np.cos(_PEAK_GRID))).max())


def real_spherical_harmonic(ell: int, m: int, directions: np.ndarray) -> np.ndarray:
    """
    Real spherical harmonic of degree ell, order m, scaled to peak |Y| = 1.

    m > 0 selects the cos(mφ) family, m < 0 the sin(|m|φ) family.

    Args:
        ell: Degree ≥ 0
        m: Order with |m| ≤ ell
        directions: (N, 3) points; only their direction is used

    Returns:
        (N,) harmonic values
    """
    if ell < 0 or abs(m) > ell:
        raise ValueError(f"Invalid spherical harmonic index ({ell}, {m})")
    d = np.asarray(directions, dtype=float)
    d = d / np.linalg.norm(d, axis=1)[:, None]
    polar = np.clip(d[:, 2], -1.0, 1.0)
    azimuth = np.arctan2(d[:, 1], d[:, 0])
    legendre = lpmv(abs(m), ell, polar) / _peak_legendre(ell, m)
    if m > 0:
        return legendre * np.cos(m * azimuth)
    if m < 0:
        return legendre * np.sin(-m * azimuth)
    return legendre


def fourier_mode(k: int, points: np.ndarray) -> np.ndarray:
    """cos(kθ) for k ≥ 0, sin(|k|θ) for k < 0, with θ the polar angle of each point."""
    p = np.asarray(points, dtype=float)
    theta = np.arctan2(p[:, 1], p[:, 0])
    if k >= 0:
        return np.cos(k * theta)
    return np.sin(-k * theta)


def _sphere(ball: Ball, level: int) -> tuple[np.ndarray, np.ndarray]:
    if ball.dimension == 3:
        unit, faces = icosphere(level)
    else:
        unit, faces = unit_circle(level)
    return np.asarray(ball.center) + ball.radius * unit, faces


def _stack(parts: list[tuple[np.ndarray, np.ndarray]]) -> tuple[np.ndarray, np.ndarray]:
    vertices = []
    faces = []
    offset = 0
    for v, f in parts:
        vertices.append(v)
        faces.append(f + offset)
        offset += len(v)
    return np.vstack(vertices), np.vstack(faces)


def _perturbed(shape: PerturbedBall, level: int) -> tuple[np.ndarray, np.ndarray]:
    if shape.dimension == 3:
        unit, faces = icosphere(level)
        factor = np.ones(len(unit))
        for (ell, m), amplitude in shape.amplitudes.items():
            factor += amplitude * real_spherical_harmonic(ell, m, unit)
    else:
        unit, faces = unit_circle(level)
        factor = np.ones(len(unit))
        for k, amplitude in shape.amplitudes.items():
            factor += amplitude * fourier_mode(k, unit)
    if factor.min() <= 0:
        raise GeometryError(
            f"Perturbation amplitudes make the radial graph nonpositive (min factor {factor.min():.3f})",
            np.flatnonzero(factor <= 0),
        )
    return np.asarray(shape.center) + shape.radius * factor[:, None] * unit, faces


def tessellate(spec: ShapeSpec) -> Boundary:
    """
    Build the discrete boundary of an analytic shape.

    Args:
        spec: Shape and resolution (subdivision level in n=3, vertex count per loop in n=2)

    Returns:
        Validated Boundary

    Raises:
        GeometryError: perturbation makes the radial graph nonpositive
        UnsupportedOperationError: tangent balls requested in n=2
    """
    shape = spec.shape
    level = spec.resolution

    if isinstance(shape, Ball):
        vertices, faces = _sphere(shape, level)
    elif isinstance(shape, BallUnion):
        if shape.dimension == 2 and shape.tangent_pairs():
            raise UnsupportedOperationError(
                f"Tangent balls {shape.tangent_pairs()} cannot be represented as disjoint polygon loops"
            )
        vertices, faces = _stack([_sphere(b, level) for b in shape.balls])
    elif isinstance(shape, Annulus):
        outer = _sphere(Ball(shape.center, shape.outer_radius), level)
        inner_vertices, inner_faces = _sphere(Ball(shape.center, shape.inner_radius), level)
        vertices, faces = _stack([outer, (inner_vertices, inner_faces[:, ::-1].copy())])
    elif isinstance(shape, PerturbedBall):
        vertices, faces = _perturbed(shape, level)
    elif isinstance(shape, Ellipsoid):
        unit, faces = icosphere(level) if shape.dimension == 3 else unit_circle(level)
        vertices = np.asarray(shape.center) + unit * np.asarray(shape.semi_axes)
    else:
        raise GeometryError(f"Unsupported shape type {type(shape).__name__}")

    boundary = Boundary(vertices, faces, name=shape.kind.value)
    logger.info(
        f"Tessellated {shape.kind.value} (n={spec.dimension}, resolution={level}): "
        f"{boundary.n_vertices} vertices, {boundary.n_faces} faces"
    )
    return boundary
