"""Triangle meshes for the 12 agent shape classes.

Ten shapes are generated procedurally; the two complex ones (teapot,
suzanne) are parsed from OBJ assets bundled with the package.  All meshes
are centred on the object-space origin and fit inside the unit sphere, so
an agent's scale samples are the only size control.

Flat-faced shapes duplicate vertices per face and carry face normals;
smooth shapes share vertices and carry area-weighted averaged normals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .rng import Stream

SHAPE_NAMES = (
    "cuboid",
    "isospheroid",
    "pyramid",
    "l_block",
    "t_block",
    "spheroid",
    "cone",
    "capsule",
    "cylinder",
    "torus",
    "teapot",
    "suzanne",
)

OBJ_SHAPES = ("teapot", "suzanne")

_ASSET_DIR = Path(__file__).parent / "assets"


@dataclass
class Mesh:
    vertices: np.ndarray  # (V, 3) float64, object space
    normals: np.ndarray  # (V, 3) float64, unit length
    triangles: np.ndarray  # (F, 3) int32, indices into vertices
    bounding_radius: float


class ObjError(ValueError):
    """Malformed OBJ input; message carries the offending line number."""


def _make_mesh(vertices: np.ndarray, normals: np.ndarray, triangles: np.ndarray) -> Mesh:
    vertices = np.asarray(vertices, dtype=np.float64)
    normals = np.asarray(normals, dtype=np.float64)
    triangles = np.asarray(triangles, dtype=np.int32)
    radius = float(np.linalg.norm(vertices, axis=1).max()) if len(vertices) else 0.0
    return Mesh(vertices, normals, triangles, radius)


def _averaged_normals(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Area-weighted per-vertex normals (cross products summed, then unit)."""
    normals = np.zeros_like(vertices)
    v0 = vertices[triangles[:, 0]]
    v1 = vertices[triangles[:, 1]]
    v2 = vertices[triangles[:, 2]]
    face = np.cross(v1 - v0, v2 - v0)
    for corner in range(3):
        np.add.at(normals, triangles[:, corner], face)
    length = np.linalg.norm(normals, axis=1, keepdims=True)
    length[length == 0.0] = 1.0
    return normals / length


def _flat_mesh(positions: np.ndarray, faces: Sequence[Sequence[int]]) -> Mesh:
    """Duplicate vertices per face, assign face normals, fan-triangulate."""
    verts: list[np.ndarray] = []
    norms: list[np.ndarray] = []
    tris: list[tuple[int, int, int]] = []
    for face in faces:
        pts = positions[list(face)]
        n = np.cross(pts[1] - pts[0], pts[2] - pts[0])
        n = n / np.linalg.norm(n)
        base = len(verts)
        for p in pts:
            verts.append(p)
            norms.append(n)
        for i in range(1, len(face) - 1):
            tris.append((base, base + i, base + i + 1))
    return _make_mesh(np.array(verts), np.array(norms), np.array(tris))


def _smooth_mesh(vertices: np.ndarray, triangles: Sequence[Sequence[int]]) -> Mesh:
    vertices = np.asarray(vertices, dtype=np.float64)
    triangles = np.asarray(triangles, dtype=np.int32)
    return _make_mesh(vertices, _averaged_normals(vertices, triangles), triangles)


# Cube face corner offsets, wound counter-clockwise seen from outside.
_CUBE_FACES = {
    (1, 0, 0): ((1, 0, 0), (1, 1, 0), (1, 1, 1), (1, 0, 1)),
    (-1, 0, 0): ((0, 0, 0), (0, 0, 1), (0, 1, 1), (0, 1, 0)),
    (0, 1, 0): ((0, 1, 0), (0, 1, 1), (1, 1, 1), (1, 1, 0)),
    (0, -1, 0): ((0, 0, 0), (1, 0, 0), (1, 0, 1), (0, 0, 1)),
    (0, 0, 1): ((0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)),
    (0, 0, -1): ((0, 0, 0), (0, 1, 0), (1, 1, 0), (1, 0, 0)),
}


def _cell_block(cells: Iterable[tuple[int, int]]) -> Mesh:
    """Union of unit cubes on a 2D grid (depth 1), internal faces removed,
    then recentred and scaled so the longest extent is 1."""
    cell_set = {(x, y, 0) for x, y in cells}
    corner_index: dict[tuple[int, int, int], int] = {}
    positions: list[tuple[int, int, int]] = []

    def corner(p: tuple[int, int, int]) -> int:
        if p not in corner_index:
            corner_index[p] = len(positions)
            positions.append(p)
        return corner_index[p]

    faces = []
    for cx, cy, cz in sorted(cell_set):
        for (dx, dy, dz), offsets in _CUBE_FACES.items():
            if (cx + dx, cy + dy, cz + dz) in cell_set:
                continue
            faces.append([corner((cx + ox, cy + oy, cz + oz)) for ox, oy, oz in offsets])

    pos = np.array(positions, dtype=np.float64)
    lo, hi = pos.min(axis=0), pos.max(axis=0)
    pos = (pos - (lo + hi) / 2.0) / (hi - lo).max()
    return _flat_mesh(pos, faces)


def cuboid() -> Mesh:
    offsets = np.array(sorted({c for quad in _CUBE_FACES.values() for c in quad}), dtype=np.float64)
    positions = offsets - 0.5
    index = {tuple(int(v) for v in o): i for i, o in enumerate(offsets)}
    faces = [[index[c] for c in quad] for quad in _CUBE_FACES.values()]
    return _flat_mesh(positions, faces)


def pyramid() -> Mesh:
    positions = np.array(
        [
            [-0.5, -0.5, -0.5],
            [0.5, -0.5, -0.5],
            [0.5, -0.5, 0.5],
            [-0.5, -0.5, 0.5],
            [0.0, 0.5, 0.0],
        ]
    )
    faces = [[0, 1, 2, 3], [1, 0, 4], [2, 1, 4], [3, 2, 4], [0, 3, 4]]
    return _flat_mesh(positions, faces)


_ICO_T = (1.0 + math.sqrt(5.0)) / 2.0
_ICO_VERTS = np.array(
    [
        (-1, _ICO_T, 0), (1, _ICO_T, 0), (-1, -_ICO_T, 0), (1, -_ICO_T, 0),
        (0, -1, _ICO_T), (0, 1, _ICO_T), (0, -1, -_ICO_T), (0, 1, -_ICO_T),
        (_ICO_T, 0, -1), (_ICO_T, 0, 1), (-_ICO_T, 0, -1), (-_ICO_T, 0, 1),
    ],
    dtype=np.float64,
)
_ICO_FACES = [
    (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
    (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
    (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
    (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
]


def icosphere(subdivisions: int = 2, radius: float = 0.5) -> Mesh:
    """Flat-faced geodesic sphere: icosahedron with midpoint subdivision."""
    verts = [v / np.linalg.norm(v) * radius for v in _ICO_VERTS]
    faces = list(_ICO_FACES)
    for _ in range(subdivisions):
        midpoint: dict[tuple[int, int], int] = {}

        def mid(a: int, b: int) -> int:
            key = (a, b) if a < b else (b, a)
            if key not in midpoint:
                p = verts[a] + verts[b]
                verts.append(p / np.linalg.norm(p) * radius)
                midpoint[key] = len(verts) - 1
            return midpoint[key]

        next_faces = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            next_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = next_faces
    return _flat_mesh(np.array(verts), faces)


def l_block() -> Mesh:
    return _cell_block([(0, 0), (0, 1), (0, 2), (1, 0)])


def t_block() -> Mesh:
    return _cell_block([(0, 0), (1, 0), (2, 0), (1, 1)])


def _ring(radius: float, y: float, segments: int) -> list[tuple[float, float, float]]:
    step = 2.0 * math.pi / segments
    return [(radius * math.cos(i * step), y, radius * math.sin(i * step)) for i in range(segments)]


def _lathe(profile: Sequence[tuple[float, float]], segments: int) -> Mesh:
    """Surface of revolution around +Y for a profile of (radius, y) points.

    Zero-radius profile points become single pole vertices; consecutive
    points are joined by quad bands (triangle fans at poles).  A profile
    starting and ending at radius 0 yields a closed surface.
    """
    rows: list[list[int]] = []
    verts: list[tuple[float, float, float]] = []
    for radius, y in profile:
        if radius == 0.0:
            rows.append([len(verts)] * segments)
            verts.append((0.0, y, 0.0))
        else:
            rows.append(list(range(len(verts), len(verts) + segments)))
            verts.extend(_ring(radius, y, segments))
    tris: list[tuple[int, int, int]] = []
    for row_a, row_b in zip(rows, rows[1:]):
        for i in range(segments):
            j = (i + 1) % segments
            a0, a1 = row_a[i], row_a[j]
            b0, b1 = row_b[i], row_b[j]
            if a0 != a1:
                tris.append((a0, b0, a1))
            if b0 != b1:
                tris.append((a1, b0, b1))
    return _smooth_mesh(np.array(verts), tris)


def uv_sphere(segments: int = 24, radius: float = 0.5) -> Mesh:
    rings = max(2, segments // 2)
    profile = [(0.0, -radius)]
    for i in range(1, rings):
        lat = -0.5 * math.pi + math.pi * i / rings
        profile.append((radius * math.cos(lat), radius * math.sin(lat)))
    profile.append((0.0, radius))
    return _lathe(profile, segments)


def cone(segments: int = 24, radius: float = 0.5, height: float = 1.0) -> Mesh:
    profile = [(0.0, -height / 2), (radius, -height / 2), (0.0, height / 2)]
    return _lathe(profile, segments)


def cylinder(segments: int = 24, radius: float = 0.35, height: float = 1.0) -> Mesh:
    h = height / 2
    profile = [(0.0, -h), (radius, -h), (radius, h), (0.0, h)]
    return _lathe(profile, segments)


def capsule(segments: int = 24, radius: float = 0.25, height: float = 1.0) -> Mesh:
    """Cylinder of total height `height` with hemispherical caps."""
    half = height / 2 - radius
    rings = max(2, segments // 4)
    profile = [(0.0, -half - radius)]
    for i in range(1, rings + 1):
        lat = -0.5 * math.pi + 0.5 * math.pi * i / rings
        profile.append((radius * math.cos(lat), -half + radius * math.sin(lat)))
    for i in range(rings):
        lat = 0.5 * math.pi * i / rings
        profile.append((radius * math.cos(lat), half + radius * math.sin(lat)))
    profile.append((0.0, half + radius))
    return _lathe(profile, segments)


def torus(
    major_radius: float = 0.35,
    minor_radius: float = 0.15,
    segments_major: int = 24,
    segments_minor: int = 24,
) -> Mesh:
    verts = []
    for i in range(segments_major):
        theta = 2.0 * math.pi * i / segments_major
        ct, st = math.cos(theta), math.sin(theta)
        for j in range(segments_minor):
            phi = 2.0 * math.pi * j / segments_minor
            r = major_radius + minor_radius * math.cos(phi)
            verts.append((r * ct, minor_radius * math.sin(phi), r * st))
    tris = []
    for i in range(segments_major):
        i2 = (i + 1) % segments_major
        for j in range(segments_minor):
            j2 = (j + 1) % segments_minor
            a = i * segments_minor + j
            b = i2 * segments_minor + j
            c = i2 * segments_minor + j2
            d = i * segments_minor + j2
            tris += [(a, c, b), (a, d, c)]
    return _smooth_mesh(np.array(verts), tris)


_PRIMITIVE_BUILDERS = {
    "cuboid": lambda tess, subdiv: cuboid(),
    "isospheroid": lambda tess, subdiv: icosphere(subdivisions=subdiv),
    "pyramid": lambda tess, subdiv: pyramid(),
    "l_block": lambda tess, subdiv: l_block(),
    "t_block": lambda tess, subdiv: t_block(),
    "spheroid": lambda tess, subdiv: uv_sphere(segments=tess),
    "cone": lambda tess, subdiv: cone(segments=tess),
    "capsule": lambda tess, subdiv: capsule(segments=tess),
    "cylinder": lambda tess, subdiv: cylinder(segments=tess),
    "torus": lambda tess, subdiv: torus(segments_major=tess, segments_minor=tess),
}


def generate_primitive(shape_id: str, tessellation: int = 24, icosphere_subdivisions: int = 2) -> Mesh:
    """Build one of the ten procedural shapes.

    `tessellation` is the segment count for curved shapes (must be >= 3);
    the icosphere uses its subdivision count instead.
    """
    if shape_id in OBJ_SHAPES:
        raise ValueError(f"shape {shape_id!r} is loaded from an OBJ asset, not generated")
    builder = _PRIMITIVE_BUILDERS.get(shape_id)
    if builder is None:
        raise ValueError(f"unknown shape: {shape_id!r}")
    if tessellation < 3:
        raise ValueError(f"tessellation must be >= 3, got {tessellation}")
    return builder(tessellation, icosphere_subdivisions)


def _parse_floats(parts: list[str], count: int, line_no: int) -> list[float]:
    if len(parts) < count:
        raise ObjError(f"line {line_no}: expected {count} numeric fields, got {len(parts)}")
    try:
        return [float(p) for p in parts[:count]]
    except ValueError as exc:
        raise ObjError(f"line {line_no}: malformed number: {exc}") from None


def _resolve_index(token: str, count: int, line_no: int, kind: str) -> int:
    try:
        idx = int(token)
    except ValueError:
        raise ObjError(f"line {line_no}: malformed {kind} index {token!r}") from None
    if idx == 0:
        raise ObjError(f"line {line_no}: {kind} index 0 (OBJ indices are 1-based)")
    resolved = count + idx if idx < 0 else idx - 1
    if not 0 <= resolved < count:
        raise ObjError(f"line {line_no}: {kind} index {idx} out of range (have {count})")
    return resolved


def load_obj(source: str | bytes) -> Mesh:
    """Parse the OBJ subset: v, vn, and f records, everything else skipped.

    Faces with more than three corners are fan-triangulated.  Normals come
    from vn records when every face corner carries one, otherwise they are
    computed as area-weighted per-vertex averages.  The mesh is recentred
    on its bounding-box centre and shrunk, if needed, to fit the unit
    sphere.
    """
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    positions: list[list[float]] = []
    obj_normals: list[list[float]] = []
    faces: list[list[tuple[int, int | None]]] = []

    for line_no, raw in enumerate(source.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        record = parts[0]
        if record == "v":
            positions.append(_parse_floats(parts[1:], 3, line_no))
        elif record == "vn":
            obj_normals.append(_parse_floats(parts[1:], 3, line_no))
        elif record == "f":
            if len(parts) - 1 < 3:
                raise ObjError(f"line {line_no}: face needs at least 3 indices")
            corners = []
            for token in parts[1:]:
                fields = token.split("/")
                v_idx = _resolve_index(fields[0], len(positions), line_no, "vertex")
                n_idx = None
                if len(fields) >= 3 and fields[2]:
                    n_idx = _resolve_index(fields[2], len(obj_normals), line_no, "normal")
                corners.append((v_idx, n_idx))
            faces.append(corners)
        # other records (vt, o, g, s, usemtl, ...) are skipped

    if not positions or not faces:
        raise ObjError("OBJ input defines no usable geometry")

    pos = np.array(positions, dtype=np.float64)
    use_vn = bool(obj_normals) and all(n_idx is not None for f in faces for _, n_idx in f)

    if use_vn:
        vn = np.array(obj_normals, dtype=np.float64)
        corner_map: dict[tuple[int, int], int] = {}
        verts: list[int] = []
        norms: list[int] = []

        def corner_id(key: tuple[int, int]) -> int:
            if key not in corner_map:
                corner_map[key] = len(verts)
                verts.append(key[0])
                norms.append(key[1])
            return corner_map[key]

        tris = []
        for face in faces:
            ids = [corner_id((v, n)) for v, n in face]  # type: ignore[arg-type]
            for i in range(1, len(ids) - 1):
                tris.append((ids[0], ids[i], ids[i + 1]))
        vertices = pos[verts]
        normals = vn[norms]
        length = np.linalg.norm(normals, axis=1, keepdims=True)
        length[length == 0.0] = 1.0
        normals = normals / length
        triangles = np.array(tris, dtype=np.int32)
    else:
        tris = []
        for face in faces:
            ids = [v for v, _ in face]
            for i in range(1, len(ids) - 1):
                tris.append((ids[0], ids[i], ids[i + 1]))
        vertices = pos
        triangles = np.array(tris, dtype=np.int32)
        normals = _averaged_normals(vertices, triangles)

    lo, hi = vertices.min(axis=0), vertices.max(axis=0)
    vertices = vertices - (lo + hi) / 2.0
    max_norm = float(np.linalg.norm(vertices, axis=1).max())
    if max_norm > 1.0:
        vertices = vertices / max_norm
    return _make_mesh(vertices, normals, triangles)


def mesh_to_obj(mesh: Mesh) -> str:
    """Serialise a mesh to OBJ text (v, vn, and f v//vn records)."""
    lines = []
    for x, y, z in mesh.vertices:
        lines.append(f"v {x!r} {y!r} {z!r}")
    for x, y, z in mesh.normals:
        lines.append(f"vn {x!r} {y!r} {z!r}")
    for a, b, c in mesh.triangles:
        lines.append(f"f {a + 1}//{a + 1} {b + 1}//{b + 1} {c + 1}//{c + 1}")
    return "\n".join(lines) + "\n"


def load_shape_asset(shape_id: str, path: str | Path | None = None) -> Mesh:
    """Load one of the bundled OBJ shapes, or a user-supplied replacement."""
    if shape_id not in OBJ_SHAPES:
        raise ValueError(f"shape {shape_id!r} has no OBJ asset")
    asset = Path(path) if path is not None else _ASSET_DIR / f"{shape_id}.obj"
    return load_obj(asset.read_text())


def build_mesh_library(
    asset_paths: Mapping[str, str | Path] | None = None,
    tessellation: int = 24,
    icosphere_subdivisions: int = 2,
) -> dict[str, Mesh]:
    """Build all 12 shape meshes once, up front (never per frame)."""
    paths = dict(asset_paths or {})
    library: dict[str, Mesh] = {}
    for name in SHAPE_NAMES:
        if name in OBJ_SHAPES:
            library[name] = load_shape_asset(name, paths.get(name))
        else:
            library[name] = generate_primitive(name, tessellation, icosphere_subdivisions)
    return library


@dataclass
class NoiseField:
    """Static per-agent surface noise: normal perturbations on a 6-face
    object-space grid, sampled by cube-face projection so the pattern
    sticks to the surface as the agent rotates."""

    offsets: np.ndarray  # (6, res, res, 3)
    amplitude: float

    def sample(self, points: np.ndarray) -> np.ndarray:
        """Perturbation vectors for (N, 3) object-space points."""
        points = np.atleast_2d(points)
        if self.amplitude == 0.0:
            return np.zeros_like(points)
        res = self.offsets.shape[1]
        n = len(points)
        axis = np.argmax(np.abs(points), axis=1)
        rows = np.arange(n)
        dominant = points[rows, axis]
        denom = np.maximum(np.abs(dominant), 1e-12)
        face = axis * 2 + (dominant < 0.0)
        u = np.clip(points[rows, (axis + 1) % 3] / denom, -1.0, 1.0)
        w = np.clip(points[rows, (axis + 2) % 3] / denom, -1.0, 1.0)
        iu = np.minimum(((u + 1.0) * 0.5 * res).astype(np.int64), res - 1)
        iw = np.minimum(((w + 1.0) * 0.5 * res).astype(np.int64), res - 1)
        return self.offsets[face, iu, iw]


def build_noise_field(amplitude: float, rng_stream: Stream, resolution: int = 64) -> NoiseField:
    """Draw the whole noise texture i.i.d. N(0, amplitude) per component."""
    if amplitude < 0.0:
        raise ValueError(f"noise amplitude must be >= 0, got {amplitude}")
    if amplitude == 0.0:
        offsets = np.zeros((6, resolution, resolution, 3))
    else:
        count = 6 * resolution * resolution * 3
        offsets = rng_stream.normal_array(count).reshape(6, resolution, resolution, 3) * amplitude
    return NoiseField(offsets=offsets, amplitude=amplitude)
