"""
Closed-form single-layer integrals over flat boundary panels.

For a flat triangle T and a point x these evaluate ∫_T |x - y|⁻¹ dσ(y); for a
straight segment e they evaluate ∫_e log(1/|x - y|) ds(y). Both are exact for
the polyhedral (polygonal) set, so no separate singular quadrature is needed
when x lies on or near a panel.
"""

import numpy as np

# Relative floor on the in-plane edge distance below which an edge term vanishes.
_EDGE_EPS = 1e-14


def _log_r_plus_l(r: np.ndarray, l: np.ndarray, r0_sq: np.ndarray) -> np.ndarray:
    """log(R + l) without cancellation for l < 0, using R + l = R0² / (R - l)."""
    positive = l >= 0
    num = np.where(positive, r + l, r0_sq)
    den = np.where(positive, 1.0, r - l)
    return np.log(num) - np.log(den)


def triangle_single_layer(points: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """
    ∫_T 1/|x - y| dσ(y) for every (point, triangle) pair.

    Args:
        points: (P, 3) evaluation points
        triangles: (T, 3, 3) corner coordinates, counterclockwise about the face normal

    Returns:
        (P, T) array of panel integrals
    """
    points = np.asarray(points, dtype=float)
    triangles = np.asarray(triangles, dtype=float)
    normal = np.cross(triangles[:, 1] - triangles[:, 0], triangles[:, 2] - triangles[:, 0])
    normal /= np.linalg.norm(normal, axis=1)[:, None]

    # signed height of each point above each face plane, (P, T)
    height = points @ normal.T - np.einsum("ij,ij->i", triangles[:, 0], normal)[None, :]
    abs_h = np.abs(height)
    h_sq = height ** 2

    total = np.zeros((len(points), len(triangles)))
    for k in range(3):
        a = triangles[:, k]
        b = triangles[:, (k + 1) % 3]
        edge = b - a
        length = np.linalg.norm(edge, axis=1)
        s = edge / length[:, None]
        m = np.cross(s, normal)

        t0 = np.einsum("ij,ij->i", a, m)[None, :] - points @ m.T
        l_minus = np.einsum("ij,ij->i", a, s)[None, :] - points @ s.T
        l_plus = l_minus + length[None, :]
        r0_sq = t0 ** 2 + h_sq
        r_minus = np.sqrt(l_minus ** 2 + r0_sq)
        r_plus = np.sqrt(l_plus ** 2 + r0_sq)

        active = r0_sq > (_EDGE_EPS * length[None, :]) ** 2
        safe_r0 = np.where(active, r0_sq, 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            log_ratio = _log_r_plus_l(r_plus, l_plus, safe_r0) - _log_r_plus_l(r_minus, l_minus, safe_r0)
            angle = np.arctan(t0 * l_plus / (safe_r0 + abs_h * r_plus)) - np.arctan(
                t0 * l_minus / (safe_r0 + abs_h * r_minus)
            )
        total += np.where(active, t0 * log_ratio - abs_h * angle, 0.0)
    return total


def _log_antiderivative(l: np.ndarray, d: np.ndarray) -> np.ndarray:
    """G(l) = l·log(l² + d²) - 2l + 2|d|·atan(l/|d|), continuous at d = 0 and l = 0."""
    abs_d = np.abs(d)
    sq = l ** 2 + d ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        log_term = np.where(sq > 0, l * np.log(np.where(sq > 0, sq, 1.0)), 0.0)
        atan_term = np.where(abs_d > 0, 2.0 * abs_d * np.arctan(l / np.where(abs_d > 0, abs_d, 1.0)), 0.0)
    return log_term - 2.0 * l + atan_term


def segment_log_layer(points: np.ndarray, segments: np.ndarray) -> np.ndarray:
    """
    ∫_e log(1/|x - y|) ds(y) for every (point, segment) pair.

    Args:
        points: (P, 2) evaluation points
        segments: (E, 2, 2) endpoint coordinates

    Returns:
        (P, E) array of panel integrals
    """
    points = np.asarray(points, dtype=float)
    segments = np.asarray(segments, dtype=float)
    a = segments[:, 0]
    edge = segments[:, 1] - a
    length = np.linalg.norm(edge, axis=1)
    s = edge / length[:, None]
    m = np.column_stack([s[:, 1], -s[:, 0]])

    d = np.einsum("ij,ij->i", a, m)[None, :] - points @ m.T
    l_minus = np.einsum("ij,ij->i", a, s)[None, :] - points @ s.T
    l_plus = l_minus + length[None, :]
    return -0.5 * (_log_antiderivative(l_plus, d) - _log_antiderivative(l_minus, d))


def gauss_rule(vertices: np.ndarray, faces: np.ndarray, face_measures: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Three-point rule on every panel.

    Triangles use the interior degree-2 rule (weights A/3); segments use
    Gauss-Legendre (weights 5/18, 8/18, 5/18 of the length).

    Returns:
        (points (3F, n), weights (3F,), face index (3F,))
    """
    corners = vertices[faces]
    if faces.shape[1] == 2:
        offsets = 0.5 * (1.0 + np.array([-np.sqrt(0.6), 0.0, np.sqrt(0.6)]))
        direction = corners[:, 1] - corners[:, 0]
        pts = corners[:, 0][:, None, :] + offsets[None, :, None] * direction[:, None, :]
        weights = face_measures[:, None] * (np.array([5.0, 8.0, 5.0]) / 18.0)[None, :]
    else:
        bary = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])
        pts = np.einsum("qc,fcd->fqd", bary, corners)
        weights = np.repeat(face_measures[:, None] / 3.0, 3, axis=1)
    face_index = np.repeat(np.arange(len(faces)), 3)
    return pts.reshape(-1, vertices.shape[1]), weights.ravel(), face_index
