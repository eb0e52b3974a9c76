"""
Isotropic remeshing of flowed boundaries.

Triangle meshes go through edge splits, collapses, valence-improving flips and
tangential smoothing; polygons are resampled uniformly by arc length. The
enclosed volume is restored exactly afterwards. A result that is not a valid
closed manifold, or whose curvature changed too much, is rejected and the
input is returned unchanged.
"""

from collections import defaultdict
from typing import Optional
import logging

import numpy as np
from scipy import sparse
from sortedcontainers import SortedList

from ..geometry.boundary import Boundary
from ..models.errors import GeometryError

logger = logging.getLogger(__name__)

SPLIT_FACTOR = 4.0 / 3.0
COLLAPSE_FACTOR = 4.0 / 5.0
TARGET_VALENCE = 6
SMOOTHING_ITERATIONS = 3
SMOOTHING_WEIGHT = 0.5
MAX_CURVATURE_CHANGE = 0.02


class _MeshEditor:
    """Mutable triangle soup with vertex-to-face incidence for local edits."""

    def __init__(self, vertices: np.ndarray, faces: np.ndarray, normals: np.ndarray):
        self.points: list[np.ndarray] = [np.array(v, dtype=float) for v in vertices]
        self.normals: list[np.ndarray] = [np.array(v, dtype=float) for v in normals]
        self.alive: list[bool] = [True] * len(vertices)
        self.faces: dict[int, list[int]] = {}
        self.vertex_faces: dict[int, set[int]] = defaultdict(set)
        self._next_face = 0
        for tri in faces:
            self._add_face([int(v) for v in tri])

    def _add_face(self, tri: list[int]) -> int:
        fid = self._next_face
        self._next_face += 1
        self.faces[fid] = tri
        for v in tri:
            self.vertex_faces[v].add(fid)
        return fid

    def _remove_face(self, fid: int) -> None:
        for v in self.faces.pop(fid):
            self.vertex_faces[v].discard(fid)

    def edge_faces(self, i: int, j: int) -> list[int]:
        return sorted(self.vertex_faces[i] & self.vertex_faces[j])

    def neighbors(self, v: int) -> set[int]:
        out = set()
        for fid in self.vertex_faces[v]:
            out.update(self.faces[fid])
        out.discard(v)
        return out

    def edges(self) -> set[tuple[int, int]]:
        out = set()
        for a, b, c in self.faces.values():
            out.update({(min(a, b), max(a, b)), (min(b, c), max(b, c)), (min(c, a), max(c, a))})
        return out

    def length(self, i: int, j: int) -> float:
        return float(np.linalg.norm(self.points[i] - self.points[j]))

    def _normal(self, tri: list[int], moved: Optional[dict[int, np.ndarray]] = None) -> np.ndarray:
        p = [moved[v] if moved and v in moved else self.points[v] for v in tri]
        return np.cross(p[1] - p[0], p[2] - p[0])

    @staticmethod
    def _directed(tri: list[int], i: int, j: int) -> Optional[tuple[int, int, int]]:
        """(a, b, c) rotation of tri with a→b the edge {i, j}, or None."""
        for p in range(3):
            a, b, c = tri[p], tri[(p + 1) % 3], tri[(p + 2) % 3]
            if {a, b} == {i, j}:
                return a, b, c
        return None

    def split(self, i: int, j: int) -> Optional[int]:
        fids = self.edge_faces(i, j)
        if len(fids) != 2:
            return None
        m = len(self.points)
        normal = self.normals[i] + self.normals[j]
        normal /= np.linalg.norm(normal)
        # circular-arc sagitta from the endpoint normals
        bulge = np.dot(self.points[j] - self.points[i], self.normals[j] - self.normals[i]) / 8.0
        self.points.append(0.5 * (self.points[i] + self.points[j]) + bulge * normal)
        self.normals.append(normal)
        self.alive.append(True)
        for fid in fids:
            a, b, c = self._directed(self.faces[fid], i, j)
            self._remove_face(fid)
            self._add_face([a, m, c])
            self._add_face([m, b, c])
        return m

    def collapse(self, i: int, j: int, high: float) -> bool:
        fids = self.edge_faces(i, j)
        if len(fids) != 2:
            return False
        opposite = {self._directed(self.faces[f], i, j)[2] for f in fids}
        ni, nj = self.neighbors(i), self.neighbors(j)
        if (ni & nj) != opposite or len(ni | nj) <= 4:
            return False
        if any(len(self.neighbors(k)) <= 3 for k in opposite):
            return False
        target = 0.5 * (self.points[i] + self.points[j])
        ring = (ni | nj) - {i, j}
        if any(np.linalg.norm(target - self.points[k]) > high for k in ring):
            return False
        moved = {i: target, j: target}
        for fid in (self.vertex_faces[i] | self.vertex_faces[j]) - set(fids):
            tri = self.faces[fid]
            before = self._normal(tri)
            after = self._normal([i if v == j else v for v in tri], moved)
            if np.dot(before, after) <= 0.0:
                return False
        for fid in fids:
            self._remove_face(fid)
        for fid in list(self.vertex_faces[j]):
            tri = [i if v == j else v for v in self.faces[fid]]
            self._remove_face(fid)
            self._add_face(tri)
        self.points[i] = target
        merged = self.normals[i] + self.normals[j]
        self.normals[i] = merged / np.linalg.norm(merged)
        self.alive[j] = False
        return True

    def flip(self, i: int, j: int) -> bool:
        fids = self.edge_faces(i, j)
        if len(fids) != 2:
            return False
        first = self._directed(self.faces[fids[0]], i, j)
        second = self._directed(self.faces[fids[1]], i, j)
        if first[0] != i:
            first, second = second, first
        k, l = first[2], second[2]
        if k == l or l in self.neighbors(k):
            return False
        val = {v: len(self.neighbors(v)) for v in (i, j, k, l)}
        if val[i] <= 3 or val[j] <= 3:
            return False
        before = sum((val[v] - TARGET_VALENCE) ** 2 for v in (i, j, k, l))
        after = (
            (val[i] - 1 - TARGET_VALENCE) ** 2 + (val[j] - 1 - TARGET_VALENCE) ** 2
            + (val[k] + 1 - TARGET_VALENCE) ** 2 + (val[l] + 1 - TARGET_VALENCE) ** 2
        )
        if after >= before:
            return False
        old = self._normal(self.faces[fids[0]]) + self._normal(self.faces[fids[1]])
        new_faces = [[i, l, k], [l, j, k]]
        for tri in new_faces:
            n = self._normal(tri)
            if np.dot(n, old) <= 0.2 * np.linalg.norm(n) * np.linalg.norm(old):
                return False
        for fid in fids:
            self._remove_face(fid)
        for tri in new_faces:
            self._add_face(tri)
        return True

    def compact(self) -> tuple[np.ndarray, np.ndarray]:
        used = sorted({v for tri in self.faces.values() for v in tri})
        index = {v: n for n, v in enumerate(used)}
        vertices = np.array([self.points[v] for v in used])
        faces = np.array([[index[v] for v in tri] for _, tri in sorted(self.faces.items())], dtype=np.int64)
        return vertices, faces


def _split_long_edges(mesh: _MeshEditor, high: float) -> int:
    queue = SortedList(
        (-mesh.length(i, j), i, j) for i, j in mesh.edges() if mesh.length(i, j) > high
    )
    splits = 0
    while queue:
        _, i, j = queue.pop(0)
        if not mesh.edge_faces(i, j) or mesh.length(i, j) <= high:
            continue
        m = mesh.split(i, j)
        if m is None:
            continue
        splits += 1
        for k in mesh.neighbors(m):
            length = mesh.length(m, k)
            if length > high:
                queue.add((-length, min(m, k), max(m, k)))
    return splits


def _collapse_short_edges(mesh: _MeshEditor, low: float, high: float) -> int:
    queue = SortedList(
        (mesh.length(i, j), i, j) for i, j in mesh.edges() if mesh.length(i, j) < low
    )
    collapses = 0
    while queue:
        _, i, j = queue.pop(0)
        if not (mesh.alive[i] and mesh.alive[j]) or not mesh.edge_faces(i, j):
            continue
        if mesh.length(i, j) >= low:
            continue
        if mesh.collapse(i, j, high):
            collapses += 1
    return collapses


def _flip_edges(mesh: _MeshEditor, sweeps: int = 3) -> int:
    flips = 0
    for _ in range(sweeps):
        changed = 0
        for i, j in sorted(mesh.edges()):
            if mesh.edge_faces(i, j) and mesh.flip(i, j):
                changed += 1
        flips += changed
        if not changed:
            break
    return flips


def _tangential_smoothing(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    n = len(vertices)
    pairs = faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
    adjacency = sparse.csr_matrix(
        (np.ones(len(pairs) * 2), (np.concatenate([pairs[:, 0], pairs[:, 1]]), np.concatenate([pairs[:, 1], pairs[:, 0]]))),
        shape=(n, n),
    )
    adjacency.sum_duplicates()
    adjacency.data[:] = 1.0
    degree = np.asarray(adjacency.sum(axis=1)).ravel()
    x = vertices.copy()
    for _ in range(SMOOTHING_ITERATIONS):
        corners = x[faces]
        face_normals = np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0])
        normals = np.zeros_like(x)
        for c in range(3):
            np.add.at(normals, faces[:, c], face_normals)
        normals /= np.linalg.norm(normals, axis=1)[:, None]
        shift = (adjacency @ x) / degree[:, None] - x
        shift -= np.einsum("ij,ij->i", shift, normals)[:, None] * normals
        x = x + SMOOTHING_WEIGHT * shift
    return x


def _rescale_volume(b: Boundary, target_volume: float) -> Boundary:
    factor = (target_volume / b.volume) ** (1.0 / b.dimension)
    return b.scaled(factor, about=b.volume_centroid)


def _curvature_l2(b: Boundary) -> float:
    return float(np.sqrt(np.dot(b.vertex_areas, b.curvature.mean ** 2)))


def _resample_loops(b: Boundary) -> Boundary:
    vertices = []
    edges = []
    offset = 0
    for loop in b.loops():
        pts = b.vertices[loop]
        closed = np.vstack([pts, pts[:1]])
        seg = np.linalg.norm(np.diff(closed, axis=0), axis=1)
        arc = np.concatenate([[0.0], np.cumsum(seg)])
        count = len(loop)
        samples = np.arange(count) * arc[-1] / count
        resampled = np.column_stack([np.interp(samples, arc, closed[:, d]) for d in range(2)])
        idx = np.arange(count) + offset
        vertices.append(resampled)
        edges.append(np.column_stack([idx, np.roll(idx, -1)]))
        offset += count
    return Boundary(np.vstack(vertices), np.vstack(edges), b.min_face_measure, b.name)


def _remesh_surface(b: Boundary, target_length: float) -> Boundary:
    high = SPLIT_FACTOR * target_length
    low = COLLAPSE_FACTOR * target_length
    mesh = _MeshEditor(b.vertices, b.faces, b.vertex_normals)
    splits = _split_long_edges(mesh, high)
    collapses = _collapse_short_edges(mesh, low, high)
    flips = _flip_edges(mesh)
    vertices, faces = mesh.compact()
    vertices = _tangential_smoothing(vertices, faces)
    logger.debug(f"Remesh edits: {splits} splits, {collapses} collapses, {flips} flips")
    return Boundary(vertices, faces, b.min_face_measure, b.name)


def remesh(b: Boundary, target_length: Optional[float] = None) -> Boundary:
    """
    Improve mesh quality while keeping the shape and the enclosed volume.

    Args:
        b: Boundary to remesh
        target_length: Desired edge length, the current mean edge length by default

    Returns:
        The remeshed boundary with volume restored exactly, or b itself when the
        result is rejected
    """
    target_volume = b.volume
    target_length = target_length if target_length is not None else b.mean_edge_length
    try:
        if b.dimension == 2:
            candidate = _resample_loops(b)
        else:
            candidate = _remesh_surface(b, target_length)
        candidate = _rescale_volume(candidate, target_volume)
    except GeometryError as e:
        logger.warning(f"Remesh rejected, keeping the original mesh: {e}")
        return b

    if candidate.n_components != b.n_components:
        logger.warning("Remesh rejected: component count changed")
        return b
    before = _curvature_l2(b)
    after = _curvature_l2(candidate)
    change = abs(after - before) / before if before > 0 else 0.0
    if change > MAX_CURVATURE_CHANGE:
        logger.warning(f"Remesh rejected: curvature L2 norm changed by {change:.2%}")
        return b
    logger.info(
        f"Remeshed {b.n_vertices} -> {candidate.n_vertices} vertices, "
        f"min quality {b.face_quality().min():.3f} -> {candidate.face_quality().min():.3f}"
    )
    return candidate
