"""
Discrete closed boundaries in R² (oriented polygons) and R³ (oriented triangle meshes).

A Boundary is immutable after construction: geometry is validated once and
all derived quantities are cached on first access.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional
import logging

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from ..models.errors import GeometryError, NonManifoldError, OrientationError
from .operators import (
    cotangent_stiffness,
    mixed_voronoi_areas,
    polygon_stiffness,
)

logger = logging.getLogger(__name__)

# Minimum number of neighbours for the five-parameter quadric fit.
MIN_FIT_POINTS = 6


@dataclass(frozen=True)
class CurvatureField:
    """
    Per-vertex curvature quantities.

    Sign convention: positive for convex sets with outward normal. H is the
    sum of the principal curvatures.

    Attributes:
        mean: H per vertex (1/length)
        b_squared: |B|² per vertex (1/length²)
        principal: (N, n-1) principal curvatures, descending
        degenerate_vertices: Vertex ids whose local fit stencil was rank deficient
    """
    mean: np.ndarray
    b_squared: np.ndarray
    principal: np.ndarray
    degenerate_vertices: list[int] = field(default_factory=list)

    @property
    def umbilic_deviation(self) -> np.ndarray:
        """(κ₁ - κ₂)² per vertex; zero in n=2."""
        if self.principal.shape[1] < 2:
            return np.zeros_like(self.mean)
        return (self.principal[:, 0] - self.principal[:, 1]) ** 2


class Boundary:
    """
    Oriented closed boundary ∂E of a set E ⊂ Rⁿ, n ∈ {2, 3}.

    n=2: faces are directed edges (i, j) forming closed loops, counterclockwise
    around E. n=3: faces are triangles oriented so that the right-hand normal
    points out of E. Inner boundaries (holes) carry reversed orientation, so the
    normal always points out of E.
    """

    def __init__(
        self,
        vertices: np.ndarray,
        faces: np.ndarray,
        min_face_measure: float = 1e-10,
        name: str = "",
    ):
        """
        Validate and store a boundary.

        Args:
            vertices: (N, n) vertex positions
            faces: (F, n) oriented edges (n=2) or triangles (n=3)
            min_face_measure: Degeneracy floor, relative to the mean face measure
            name: Label used in logs

        Raises:
            GeometryError: malformed arrays or degenerate faces
            NonManifoldError: open, non-manifold or inconsistently oriented connectivity
            OrientationError: nonpositive enclosed volume
        """
        vertices = np.array(vertices, dtype=float, copy=True)
        faces = np.array(faces, dtype=np.int64, copy=True)
        if vertices.ndim != 2 or vertices.shape[1] not in (2, 3):
            raise GeometryError(f"Vertices must be an (N, 2) or (N, 3) array, got {vertices.shape}")
        n = vertices.shape[1]
        if faces.ndim != 2 or faces.shape[1] != n:
            raise GeometryError(f"Faces must be an (F, {n}) array, got {faces.shape}")
        if faces.size == 0:
            raise GeometryError("Boundary has no faces")
        if faces.min() < 0 or faces.max() >= len(vertices):
            raise GeometryError("Face indices out of range")
        if not np.all(np.isfinite(vertices)):
            raise GeometryError("Vertices contain non-finite coordinates")

        vertices.setflags(write=False)
        faces.setflags(write=False)
        self.vertices = vertices
        self.faces = faces
        self.dimension = n
        self.min_face_measure = min_face_measure
        self.name = name

        self._validate()
        logger.debug(
            f"Boundary {name or '<unnamed>'}: n={n}, {self.n_vertices} vertices, "
            f"{self.n_faces} faces, {self.n_components} component(s)"
        )

    # ------------------------------------------------------------------
    # validation
    # ------------------------------------------------------------------

    def _validate(self) -> None:
        used = np.zeros(self.n_vertices, dtype=bool)
        used[self.faces.ravel()] = True
        if not used.all():
            raise GeometryError("Vertices not referenced by any face", np.flatnonzero(~used))

        measures = self.face_measures
        floor = self.min_face_measure * float(measures.mean())
        bad = np.flatnonzero(measures <= floor)
        if bad.size:
            raise GeometryError(
                f"{bad.size} degenerate face(s) below measure floor {floor:.3e}",
                np.unique(self.faces[bad]),
            )

        if self.dimension == 2:
            out_degree = np.bincount(self.faces[:, 0], minlength=self.n_vertices)
            in_degree = np.bincount(self.faces[:, 1], minlength=self.n_vertices)
            bad = np.flatnonzero((out_degree != 1) | (in_degree != 1))
            if bad.size:
                raise NonManifoldError("Polygon edges do not form closed loops", bad)
        else:
            directed = self.faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
            keys = directed[:, 0] * self.n_vertices + directed[:, 1]
            unique, counts = np.unique(keys, return_counts=True)
            if np.any(counts > 1):
                dup = unique[counts > 1]
                raise NonManifoldError(
                    "Directed edge used twice (inconsistent orientation or non-manifold edge)",
                    np.unique(np.concatenate([dup // self.n_vertices, dup % self.n_vertices])),
                )
            reverse = directed[:, 1] * self.n_vertices + directed[:, 0]
            missing = ~np.isin(reverse, unique)
            if np.any(missing):
                raise NonManifoldError("Mesh is not closed", np.unique(directed[missing]))

        if self.volume <= 0:
            raise OrientationError(f"Signed enclosed volume {self.volume:.6e} is not positive")

    # ------------------------------------------------------------------
    # connectivity
    # ------------------------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def n_faces(self) -> int:
        return int(self.faces.shape[0])

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique undirected edges (E, 2), smaller index first."""
        if self.dimension == 2:
            pairs = self.faces
        else:
            pairs = self.faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
        pairs = np.sort(pairs, axis=1)
        return np.unique(pairs, axis=0)

    @cached_property
    def adjacency(self) -> sparse.csr_matrix:
        """Symmetric vertex adjacency (boolean CSR)."""
        e = self.edges
        data = np.ones(2 * len(e), dtype=bool)
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        return sparse.csr_matrix((data, (rows, cols)), shape=(self.n_vertices, self.n_vertices))

    @cached_property
    def component_labels(self) -> np.ndarray:
        _, labels = connected_components(self.adjacency, directed=False)
        return labels

    @property
    def n_components(self) -> int:
        return int(self.component_labels.max()) + 1

    @cached_property
    def face_components(self) -> np.ndarray:
        return self.component_labels[self.faces[:, 0]]

    @cached_property
    def loop_order(self) -> tuple[np.ndarray, np.ndarray]:
        """n=2 only: (previous, next) vertex index for every vertex."""
        nxt = np.empty(self.n_vertices, dtype=np.int64)
        prv = np.empty(self.n_vertices, dtype=np.int64)
        nxt[self.faces[:, 0]] = self.faces[:, 1]
        prv[self.faces[:, 1]] = self.faces[:, 0]
        return prv, nxt

    def loops(self) -> list[np.ndarray]:
        """n=2 only: vertex indices of every closed loop in traversal order."""
        _, nxt = self.loop_order
        visited = np.zeros(self.n_vertices, dtype=bool)
        loops = []
        for start in range(self.n_vertices):
            if visited[start]:
                continue
            order = []
            i = start
            while not visited[i]:
                visited[i] = True
                order.append(i)
                i = nxt[i]
            loops.append(np.array(order, dtype=np.int64))
        return loops

    def euler_characteristic(self) -> int:
        """V - E + F (n=3); number of vertices minus edges (0 per loop) in n=2."""
        if self.dimension == 2:
            return self.n_vertices - len(self.edges)
        return self.n_vertices - len(self.edges) + self.n_faces

    # ------------------------------------------------------------------
    # face geometry
    # ------------------------------------------------------------------

    @cached_property
    def face_area_vectors(self) -> np.ndarray:
        """Outward face normals scaled by face measure."""
        x = self.vertices
        f = self.faces
        if self.dimension == 2:
            d = x[f[:, 1]] - x[f[:, 0]]
            return np.column_stack([d[:, 1], -d[:, 0]])
        return 0.5 * np.cross(x[f[:, 1]] - x[f[:, 0]], x[f[:, 2]] - x[f[:, 0]])

    @cached_property
    def face_measures(self) -> np.ndarray:
        """Edge lengths (n=2) or triangle areas (n=3)."""
        return np.linalg.norm(self.face_area_vectors, axis=1)

    @cached_property
    def face_normals(self) -> np.ndarray:
        return self.face_area_vectors / self.face_measures[:, None]

    @cached_property
    def face_centroids(self) -> np.ndarray:
        return self.vertices[self.faces].mean(axis=1)

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        e = self.edges
        return np.linalg.norm(self.vertices[e[:, 1]] - self.vertices[e[:, 0]], axis=1)

    @property
    def max_edge_length(self) -> float:
        return float(self.edge_lengths.max())

    @property
    def min_edge_length(self) -> float:
        return float(self.edge_lengths.min())

    @property
    def mean_edge_length(self) -> float:
        return float(self.edge_lengths.mean())

    def face_quality(self) -> np.ndarray:
        """
        Per-face shape quality in (0, 1].

        n=3: 4√3·A / Σℓ², equal to 1 for an equilateral triangle.
        n=2: ratio of the edge length to the mean edge length of its loop, folded into (0, 1].
        """
        if self.dimension == 2:
            lengths = self.face_measures
            mean = np.bincount(self.face_components, weights=lengths) / np.bincount(self.face_components)
            ratio = lengths / mean[self.face_components]
            return np.minimum(ratio, 1.0 / ratio)
        corners = self.vertices[self.faces]
        sq = sum(
            np.einsum("ij,ij->i", corners[:, (c + 1) % 3] - corners[:, c], corners[:, (c + 1) % 3] - corners[:, c])
            for c in range(3)
        )
        return 4.0 * np.sqrt(3.0) * self.face_measures / sq

    def edge_length_spread(self) -> float:
        return self.max_edge_length / self.min_edge_length

    # ------------------------------------------------------------------
    # global measures
    # ------------------------------------------------------------------

    @cached_property
    def perimeter(self) -> float:
        """Total (n-1)-measure of the boundary."""
        return float(self.face_measures.sum())

    @cached_property
    def face_signed_volumes(self) -> np.ndarray:
        """Signed volume of the cone from the origin over every face."""
        x = self.vertices
        f = self.faces
        if self.dimension == 2:
            a, b = x[f[:, 0]], x[f[:, 1]]
            return 0.5 * (a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])
        return np.einsum("ij,ij->i", x[f[:, 0]], np.cross(x[f[:, 1]], x[f[:, 2]])) / 6.0

    @cached_property
    def volume(self) -> float:
        """Signed enclosed volume by the divergence theorem."""
        return float(self.face_signed_volumes.sum())

    @cached_property
    def volume_gradient(self) -> np.ndarray:
        """∂|E|/∂x_i per vertex: a third of the adjacent face area vectors (n=3), half the rotated chord (n=2)."""
        if self.dimension == 2:
            prv, nxt = self.loop_order
            chord = self.vertices[nxt] - self.vertices[prv]
            return 0.5 * np.column_stack([chord[:, 1], -chord[:, 0]])
        grad = np.zeros_like(self.vertices)
        for c in range(3):
            np.add.at(grad, self.faces[:, c], self.face_area_vectors / 3.0)
        return grad

    def component_volumes(self) -> np.ndarray:
        return np.bincount(self.face_components, weights=self.face_signed_volumes, minlength=self.n_components)

    def component_areas(self) -> np.ndarray:
        return np.bincount(self.face_components, weights=self.face_measures, minlength=self.n_components)

    @cached_property
    def volume_centroid(self) -> np.ndarray:
        """Centroid of the enclosed volume."""
        x = self.vertices[self.faces]
        w = self.face_signed_volumes
        if self.dimension == 2:
            centers = x.sum(axis=1) / 3.0
        else:
            centers = x.sum(axis=1) / 4.0
        return (w[:, None] * centers).sum(axis=0) / w.sum()

    # ------------------------------------------------------------------
    # vertex geometry
    # ------------------------------------------------------------------

    @cached_property
    def vertex_areas(self) -> np.ndarray:
        """Lumped vertex weights: half adjacent lengths (n=2), mixed Voronoi areas (n=3)."""
        if self.dimension == 2:
            areas = np.zeros(self.n_vertices)
            np.add.at(areas, self.faces.ravel(), np.repeat(0.5 * self.face_measures, 2))
            return areas
        return mixed_voronoi_areas(self.vertices, self.faces)

    @cached_property
    def stiffness(self) -> sparse.csr_matrix:
        if self.dimension == 2:
            return polygon_stiffness(self.vertices, self.faces)
        return cotangent_stiffness(self.vertices, self.faces)

    @cached_property
    def _area_weighted_normals(self) -> np.ndarray:
        normals = np.zeros_like(self.vertices)
        for c in range(self.dimension):
            np.add.at(normals, self.faces[:, c], self.face_area_vectors)
        return normals / np.linalg.norm(normals, axis=1)[:, None]

    @cached_property
    def _local_fit(self) -> tuple[np.ndarray, np.ndarray, list[int]]:
        """
        Quadric fit w = a u² + b uv + c v² + d u + e v over the two-ring (n=3).

        Returns refined unit normals, the half difference of the fitted
        principal curvatures, and the ids of rank-deficient stencils.
        """
        x = self.vertices
        n0 = self._area_weighted_normals
        adj = self.adjacency.astype(np.int8)
        ring = ((adj @ adj) + adj).tocsr()
        ring.setdiag(0)
        ring.eliminate_zeros()

        helper = np.where(np.abs(n0[:, 0:1]) < 0.9, np.array([[1.0, 0.0, 0.0]]), np.array([[0.0, 1.0, 0.0]]))
        e1 = helper - np.einsum("ij,ij->i", helper, n0)[:, None] * n0
        e1 /= np.linalg.norm(e1, axis=1)[:, None]
        e2 = np.cross(n0, e1)

        normals = n0.copy()
        half_diff = np.zeros(self.n_vertices)
        degenerate = []
        for i in range(self.n_vertices):
            nbrs = ring.indices[ring.indptr[i]:ring.indptr[i + 1]]
            if len(nbrs) < MIN_FIT_POINTS:
                degenerate.append(i)
                continue
            d = x[nbrs] - x[i]
            u = d @ e1[i]
            v = d @ e2[i]
            w = d @ n0[i]
            design = np.column_stack([u * u, u * v, v * v, u, v])
            coef, _, rank, _ = np.linalg.lstsq(design, w, rcond=None)
            if rank < 5:
                degenerate.append(i)
                continue
            fa, fb, fc, fu, fv = coef
            grad = np.array([fu, fv])
            g = np.eye(2) + np.outer(grad, grad)
            second = -np.array([[2.0 * fa, fb], [fb, 2.0 * fc]]) / np.sqrt(1.0 + grad @ grad)
            shape_op = np.linalg.solve(g, second)
            tr = np.trace(shape_op)
            det = np.linalg.det(shape_op)
            half_diff[i] = np.sqrt(max(0.25 * tr * tr - det, 0.0))
            refined = n0[i] - fu * e1[i] - fv * e2[i]
            normals[i] = refined / np.linalg.norm(refined)

        if degenerate:
            logger.warning(
                f"{len(degenerate)} degenerate curvature stencil(s) on {self.name or 'boundary'}: "
                f"{degenerate[:10]}"
            )
        return normals, half_diff, degenerate

    @cached_property
    def vertex_normals(self) -> np.ndarray:
        """Unit outward normals per vertex."""
        if self.dimension == 2:
            prv, nxt = self.loop_order
            chord = self.vertices[nxt] - self.vertices[prv]
            normals = np.column_stack([chord[:, 1], -chord[:, 0]])
            return normals / np.linalg.norm(normals, axis=1)[:, None]
        return self._local_fit[0]

    @cached_property
    def curvature(self) -> CurvatureField:
        """Per-vertex H, |B|² and principal curvatures."""
        if self.dimension == 2:
            prv, nxt = self.loop_order
            e_in = self.vertices - self.vertices[prv]
            e_out = self.vertices[nxt] - self.vertices
            cross = e_in[:, 0] * e_out[:, 1] - e_in[:, 1] * e_out[:, 0]
            dot = np.einsum("ij,ij->i", e_in, e_out)
            turning = np.arctan2(cross, dot)
            mean = turning / self.vertex_areas
            return CurvatureField(mean=mean, b_squared=mean ** 2, principal=mean[:, None].copy())

        normals, half_diff, degenerate = self._local_fit
        mean_normal = self.stiffness @ self.vertices
        mean = np.einsum("ij,ij->i", mean_normal, normals) / self.vertex_areas
        principal = np.column_stack([0.5 * mean + half_diff, 0.5 * mean - half_diff])
        b_squared = 0.5 * mean ** 2 + 2.0 * half_diff ** 2
        return CurvatureField(mean=mean, b_squared=b_squared, principal=principal, degenerate_vertices=degenerate)

    def tangential_gradient(self, values: np.ndarray) -> np.ndarray:
        """
        Tangential gradient of a vertex function.

        P1 gradients per face, averaged to vertices with face-measure weights
        and projected onto the vertex tangent plane.
        """
        values = np.asarray(values, dtype=float)
        x = self.vertices
        f = self.faces
        if self.dimension == 2:
            d = x[f[:, 1]] - x[f[:, 0]]
            lengths = self.face_measures
            face_grad = ((values[f[:, 1]] - values[f[:, 0]]) / lengths ** 2)[:, None] * d
        else:
            face_grad = np.zeros((self.n_faces, 3))
            normals = self.face_normals
            for c in range(3):
                opposite = x[f[:, (c + 2) % 3]] - x[f[:, (c + 1) % 3]]
                face_grad += values[f[:, c]][:, None] * np.cross(normals, opposite) / (
                    2.0 * self.face_measures[:, None]
                )
        accum = np.zeros_like(x)
        weights = np.zeros(self.n_vertices)
        for c in range(self.dimension):
            np.add.at(accum, f[:, c], face_grad * self.face_measures[:, None])
            np.add.at(weights, f[:, c], self.face_measures)
        grad = accum / weights[:, None]
        nu = self.vertex_normals
        return grad - np.einsum("ij,ij->i", grad, nu)[:, None] * nu

    # ------------------------------------------------------------------
    # derived boundaries
    # ------------------------------------------------------------------

    def with_vertices(self, vertices: np.ndarray, name: Optional[str] = None) -> "Boundary":
        """Same connectivity, new positions."""
        return Boundary(vertices, self.faces, self.min_face_measure, name if name is not None else self.name)

    def scaled(self, factor: float, about: Optional[np.ndarray] = None) -> "Boundary":
        center = np.zeros(self.dimension) if about is None else np.asarray(about, dtype=float)
        return self.with_vertices(center + factor * (self.vertices - center))

    def translated(self, offset: np.ndarray) -> "Boundary":
        return self.with_vertices(self.vertices + np.asarray(offset, dtype=float))

    def rotated(self, rotation: np.ndarray) -> "Boundary":
        rotation = np.asarray(rotation, dtype=float)
        if abs(np.linalg.det(rotation) - 1.0) > 1e-10:
            raise GeometryError("Rotation matrix must be proper orthogonal")
        return self.with_vertices(self.vertices @ rotation.T)

    def __repr__(self) -> str:
        return (
            f"Boundary(name={self.name!r}, n={self.dimension}, vertices={self.n_vertices}, "
            f"faces={self.n_faces}, components={self.n_components})"
        )
