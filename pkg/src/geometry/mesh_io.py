"""ASCII OFF (triangle meshes) and CSV vertex-loop (polygons) ingestion and export."""

from pathlib import Path
from typing import Union
import csv
import logging

import numpy as np

from ..models.errors import GeometryError
from .boundary import Boundary

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

LOOP_CSV_HEADER = ["loop", "x", "y"]


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def _off_tokens(text: str) -> list[str]:
    tokens = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            tokens.extend(line.split())
    return tokens


def read_off(path: PathLike, min_face_measure: float = 1e-10) -> Boundary:
    """
    Read an ASCII OFF triangle mesh.

    Raises:
        GeometryError: malformed file or non-triangular faces
    """
    path = Path(path)
    tokens = _off_tokens(path.read_text(encoding="utf-8"))
    if not tokens or tokens[0] != "OFF":
        raise GeometryError(f"{path} is not an OFF file")
    try:
        n_vertices, n_faces = int(tokens[1]), int(tokens[2])
        pos = 4
        vertices = np.array(tokens[pos:pos + 3 * n_vertices], dtype=float).reshape(n_vertices, 3)
        pos += 3 * n_vertices
        faces = []
        for _ in range(n_faces):
            count = int(tokens[pos])
            if count != 3:
                raise GeometryError(f"{path}: only triangular faces are supported, got a {count}-gon")
            faces.append([int(t) for t in tokens[pos + 1:pos + 4]])
            pos += 1 + count
    except (IndexError, ValueError) as e:
        if isinstance(e, GeometryError):
            raise
        raise GeometryError(f"{path}: malformed OFF data ({e})") from e
    logger.info(f"Read {n_vertices} vertices and {n_faces} faces from {path}")
    return Boundary(vertices, np.array(faces, dtype=np.int64), min_face_measure, name=path.stem)


def write_off(b: Boundary, path: PathLike) -> Path:
    if b.dimension != 3:
        raise GeometryError("OFF export requires a triangle mesh (n=3)")
    path = Path(path)
    lines = ["OFF", f"{b.n_vertices} {b.n_faces} {len(b.edges)}"]
    lines.extend(" ".join(_fmt(c) for c in v) for v in b.vertices)
    lines.extend(f"3 {f[0]} {f[1]} {f[2]}" for f in b.faces)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.debug(f"Wrote OFF mesh to {path}")
    return path


def read_loop_csv(path: PathLike, min_face_measure: float = 1e-10) -> Boundary:
    """
    Read closed polygon loops from CSV with columns loop, x, y.

    Consecutive rows of one loop are joined by edges and the last row closes
    the loop. Outer loops must run counterclockwise, holes clockwise.
    """
    path = Path(path)
    loops: dict[str, list[tuple[float, float]]] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not set(LOOP_CSV_HEADER) <= set(reader.fieldnames):
            raise GeometryError(f"{path}: expected columns {LOOP_CSV_HEADER}")
        for row in reader:
            try:
                loops.setdefault(row["loop"], []).append((float(row["x"]), float(row["y"])))
            except ValueError as e:
                raise GeometryError(f"{path}: bad coordinate in row {reader.line_num}") from e

    vertices = []
    edges = []
    offset = 0
    for label, points in loops.items():
        if len(points) < 3:
            raise GeometryError(f"{path}: loop {label} has fewer than 3 vertices")
        idx = np.arange(len(points)) + offset
        edges.append(np.column_stack([idx, np.roll(idx, -1)]))
        vertices.extend(points)
        offset += len(points)
    if not vertices:
        raise GeometryError(f"{path}: no vertices")
    logger.info(f"Read {len(loops)} loop(s), {len(vertices)} vertices from {path}")
    return Boundary(np.array(vertices), np.vstack(edges), min_face_measure, name=path.stem)


def write_loop_csv(b: Boundary, path: PathLike) -> Path:
    if b.dimension != 2:
        raise GeometryError("Loop CSV export requires a polygon (n=2)")
    path = Path(path)
    rows = [
        [str(label), _fmt(b.vertices[i, 0]), _fmt(b.vertices[i, 1])]
        for label, loop in enumerate(b.loops())
        for i in loop
    ]
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LOOP_CSV_HEADER)
        writer.writerows(rows)
    logger.debug(f"Wrote {b.n_components} loop(s) to {path}")
    return path
