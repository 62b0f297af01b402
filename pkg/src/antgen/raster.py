"""Headless software renderer.

Perspective projection, z-buffered triangle rasterisation with a top-left
fill rule, Lambertian shading with per-agent surface-noise normal jitter,
exponential depth fog, and Gaussian background noise.  Output is a FrameSet:
intensity in [0, 1], per-pixel agent id (0 = background) and camera-space
depth (+inf for background).

Rasterisation uses integer edge functions on 1/256-subpixel coordinates, so
coverage decisions are exact: shared triangle edges never double-fill or
crack, and output is bit-deterministic by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .geometry import Mesh, NoiseField
from .rng import Stream, derive_stream

if TYPE_CHECKING:
    from .scene import Agent, SceneState

_SUBPIXEL = 256  # subpixel grid per pixel; coordinates snap to 1/256 px
_GUARD = 1.2  # side clip planes sit 20% outside the viewport


@dataclass(frozen=True)
class CameraConfig:
    """Static pinhole camera at the origin, viewing +Z, up +Y."""

    resolution: tuple[int, int] = (346, 260)
    fov_degrees: float = 60.0
    near: float = 0.1
    far: float = 100.0

    @property
    def focal_length(self) -> float:
        """Pixels per unit tangent, from the vertical field of view."""
        return (self.resolution[1] / 2.0) / math.tan(math.radians(self.fov_degrees) / 2.0)

    @property
    def tan_half_fov(self) -> float:
        return math.tan(math.radians(self.fov_degrees) / 2.0)

    @property
    def aspect(self) -> float:
        return self.resolution[0] / self.resolution[1]


@dataclass(frozen=True)
class RenderConfig:
    background_mean: float = 0.1
    background_sigma: float = 0.0
    fog_density: float = 0.0
    fog_target: float = 0.1
    light_direction: tuple[float, float, float] = (-0.3, 0.6, -0.74)  # toward the light
    ambient: float = 0.15


@dataclass
class FrameSet:
    intensity: np.ndarray  # (Y, X) float64 in [0, 1]
    agent_id: np.ndarray  # (Y, X) int32, 0 = background
    depth: np.ndarray  # (Y, X) float64, +inf where background


def project(vertex: Sequence[float], camera: CameraConfig) -> tuple[float, float, float]:
    """Pinhole projection of one camera-space point to (screen x, screen y, depth)."""
    x, y, z = float(vertex[0]), float(vertex[1]), float(vertex[2])
    f = camera.focal_length
    res_x, res_y = camera.resolution
    return (res_x / 2.0 + f * (x / z), res_y / 2.0 - f * (y / z), z)


def rotation_matrix(degrees_xyz: Sequence[float]) -> np.ndarray:
    """Euler rotation R = Rx @ Ry @ Rz (fixed composition order, degrees)."""
    ax, ay, az = (math.radians(a) for a in degrees_xyz)
    cx, sx = math.cos(ax), math.sin(ax)
    cy, sy = math.cos(ay), math.sin(ay)
    cz, sz = math.cos(az), math.sin(az)
    rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return rx @ ry @ rz


def _clip_polygon(corners: list[np.ndarray], plane: tuple[np.ndarray, float]) -> list[np.ndarray]:
    """Sutherland-Hodgman clip of a polygon (rows: x,y,z + attributes) against
    dot(normal, xyz) + offset >= 0.  Attributes interpolate linearly."""
    normal, offset = plane
    if not corners:
        return []
    dists = [float(c[:3] @ normal) + offset for c in corners]
    out: list[np.ndarray] = []
    for i, corner in enumerate(corners):
        j = (i + 1) % len(corners)
        d_i, d_j = dists[i], dists[j]
        if d_i >= 0.0:
            out.append(corner)
        if (d_i >= 0.0) != (d_j >= 0.0):
            t = d_i / (d_i - d_j)
            out.append(corner + t * (corners[j] - corner))
    return out


def _frustum_clip_planes(camera: CameraConfig) -> list[tuple[np.ndarray, float]]:
    """Near plane plus four guard side planes, inward normals (unnormalised)."""
    gx = camera.aspect * camera.tan_half_fov * _GUARD
    gy = camera.tan_half_fov * _GUARD
    return [
        (np.array([0.0, 0.0, 1.0]), -camera.near),
        (np.array([1.0, 0.0, gx]), 0.0),
        (np.array([-1.0, 0.0, gx]), 0.0),
        (np.array([0.0, 1.0, gy]), 0.0),
        (np.array([0.0, -1.0, gy]), 0.0),
    ]


def _is_top_left(ax: int, ay: int, bx: int, by: int) -> bool:
    """Top-left fill rule for edge a->b in y-down screen space."""
    return (ay == by and ax > bx) or ay > by


class _FrameBuffers:
    """Mutable per-frame render targets, including deferred-shading attributes."""

    def __init__(self, res_x: int, res_y: int):
        self.depth = np.full((res_y, res_x), np.inf)
        self.agent_id = np.zeros((res_y, res_x), dtype=np.int32)
        self.normal = np.zeros((res_y, res_x, 3))
        self.objpos = np.zeros((res_y, res_x, 3))


def _raster_triangle(
    buffers: _FrameBuffers,
    aid: int,
    sx: np.ndarray,
    sy: np.ndarray,
    z: np.ndarray,
    normals: np.ndarray,
    objpos: np.ndarray,
) -> None:
    """Rasterise one screen-space triangle into the buffers.

    sx/sy/z are per-vertex screen coordinates and camera depths; normals and
    objpos are (3, 3) per-vertex attributes interpolated perspective-correct.
    """
    res_y, res_x = buffers.depth.shape
    qx = np.rint(sx * _SUBPIXEL).astype(np.int64)
    qy = np.rint(sy * _SUBPIXEL).astype(np.int64)

    area = (qx[1] - qx[0]) * (qy[2] - qy[0]) - (qy[1] - qy[0]) * (qx[2] - qx[0])
    if area == 0:
        return
    order = (0, 1, 2)
    if area < 0:
        order = (0, 2, 1)
        area = -area
    qx, qy, z = qx[list(order)], qy[list(order)], z[list(order)]
    normals, objpos = normals[list(order)], objpos[list(order)]

    x_lo = max(0, int(math.floor(qx.min() / _SUBPIXEL - 0.5)))
    x_hi = min(res_x - 1, int(math.ceil(qx.max() / _SUBPIXEL - 0.5)))
    y_lo = max(0, int(math.floor(qy.min() / _SUBPIXEL - 0.5)))
    y_hi = min(res_y - 1, int(math.ceil(qy.max() / _SUBPIXEL - 0.5)))
    if x_lo > x_hi or y_lo > y_hi:
        return

    # Pixel centres in subpixel units: x*256 + 128.
    px = np.arange(x_lo, x_hi + 1, dtype=np.int64) * _SUBPIXEL + _SUBPIXEL // 2
    py = np.arange(y_lo, y_hi + 1, dtype=np.int64) * _SUBPIXEL + _SUBPIXEL // 2
    pxg = px[np.newaxis, :]
    pyg = py[:, np.newaxis]

    inside = None
    w = []
    for a, b in ((1, 2), (2, 0), (0, 1)):
        wk = (qx[b] - qx[a]) * (pyg - qy[a]) - (qy[b] - qy[a]) * (pxg - qx[a])
        accept = wk > 0 if not _is_top_left(qx[a], qy[a], qx[b], qy[b]) else wk >= 0
        inside = accept if inside is None else (inside & accept)
        w.append(wk)
    if not inside.any():
        return

    lam0 = w[0] / area
    lam1 = w[1] / area
    lam2 = w[2] / area
    inv_z = 1.0 / z
    inv_z_p = lam0 * inv_z[0] + lam1 * inv_z[1] + lam2 * inv_z[2]
    # Outside the triangle inv_z_p may be <= 0; those pixels are masked out.
    with np.errstate(divide="ignore", invalid="ignore"):
        z_p = 1.0 / inv_z_p

    patch = (slice(y_lo, y_hi + 1), slice(x_lo, x_hi + 1))
    with np.errstate(invalid="ignore"):
        closer = inside & (z_p < buffers.depth[patch])
    if not closer.any():
        return

    def interp(attr: np.ndarray) -> np.ndarray:
        a_over_z = attr * inv_z[:, np.newaxis]
        out = (
            lam0[..., np.newaxis] * a_over_z[0]
            + lam1[..., np.newaxis] * a_over_z[1]
            + lam2[..., np.newaxis] * a_over_z[2]
        )
        return out * z_p[..., np.newaxis]

    buffers.depth[patch][closer] = z_p[closer]
    buffers.agent_id[patch][closer] = aid
    buffers.normal[patch][closer] = interp(normals)[closer]
    buffers.objpos[patch][closer] = interp(objpos)[closer]


def _draw_agent(
    buffers: _FrameBuffers,
    agent: "Agent",
    mesh: Mesh,
    camera: CameraConfig,
    clip_planes: list[tuple[np.ndarray, float]],
) -> None:
    rot = rotation_matrix(agent.rotation)
    scale = np.asarray(agent.scale, dtype=np.float64)
    verts_cam = (mesh.vertices * scale) @ rot.T + np.asarray(agent.position)
    normals_cam = (mesh.normals / scale) @ rot.T
    length = np.linalg.norm(normals_cam, axis=1, keepdims=True)
    length[length == 0.0] = 1.0
    normals_cam = normals_cam / length

    f = camera.focal_length
    res_x, res_y = camera.resolution
    gx = camera.aspect * camera.tan_half_fov * _GUARD
    gy = camera.tan_half_fov * _GUARD

    tri_verts = verts_cam[mesh.triangles]  # (F, 3, 3)
    vx, vy, vz = tri_verts[..., 0], tri_verts[..., 1], tri_verts[..., 2]
    in_near = vz >= camera.near
    in_sides = (vx <= gx * vz) & (-vx <= gx * vz) & (vy <= gy * vz) & (-vy <= gy * vz)
    all_in = (in_near & in_sides).all(axis=1)
    any_visible = in_near.any(axis=1)

    for t_idx in range(len(mesh.triangles)):
        if not any_visible[t_idx]:
            continue
        idx = mesh.triangles[t_idx]
        if all_in[t_idx]:
            tris = [(verts_cam[idx], normals_cam[idx], mesh.vertices[idx])]
        else:
            corners = [
                np.concatenate([verts_cam[i], normals_cam[i], mesh.vertices[i]]) for i in idx
            ]
            for plane in clip_planes:
                corners = _clip_polygon(corners, plane)
                if not corners:
                    break
            if len(corners) < 3:
                continue
            poly = np.array(corners)
            tris = [
                (poly[[0, i, i + 1], 0:3], poly[[0, i, i + 1], 3:6], poly[[0, i, i + 1], 6:9])
                for i in range(1, len(poly) - 1)
            ]
        for pts, nrm, obj in tris:
            z = pts[:, 2]
            sx = res_x / 2.0 + f * (pts[:, 0] / z)
            sy = res_y / 2.0 - f * (pts[:, 1] / z)
            _raster_triangle(buffers, agent.id, sx, sy, z, nrm, obj)


def rasterize_scene(
    agents: Iterable["Agent"],
    class_meshes: Sequence[Mesh],
    camera: CameraConfig,
    render_cfg: RenderConfig,
    frame_rng: Stream | None = None,
    noise_fields: Mapping[int, NoiseField] | None = None,
) -> FrameSet:
    """Render one scene state.

    Agents are drawn in ascending id order; the z-test keeps the strictly
    closer surface and resolves exact depth ties in favour of the earlier
    drawn (lower) agent id, which makes output independent of evaluation
    order.  Fog pulls covered pixels toward fog_target with distance;
    background pixels keep their (optionally noisy) background value.
    """
    res_x, res_y = camera.resolution
    if render_cfg.background_sigma > 0.0 and frame_rng is not None:
        noise = frame_rng.normal_array(res_x * res_y).reshape(res_y, res_x)
        intensity = np.clip(render_cfg.background_mean + render_cfg.background_sigma * noise, 0.0, 1.0)
    else:
        intensity = np.full((res_y, res_x), float(np.clip(render_cfg.background_mean, 0.0, 1.0)))

    buffers = _FrameBuffers(res_x, res_y)
    clip_planes = _frustum_clip_planes(camera)
    for agent in sorted(agents, key=lambda a: a.id):
        _draw_agent(buffers, agent, class_meshes[agent.class_index], camera, clip_planes)

    covered = buffers.agent_id > 0
    if covered.any():
        light = np.asarray(render_cfg.light_direction, dtype=np.float64)
        light = light / np.linalg.norm(light)
        fields = noise_fields or {}
        for aid in np.unique(buffers.agent_id[covered]):
            pix = buffers.agent_id == aid
            normals = buffers.normal[pix]
            field = fields.get(int(aid))
            if field is not None and field.amplitude > 0.0:
                normals = normals + field.sample(buffers.objpos[pix])
            length = np.linalg.norm(normals, axis=1, keepdims=True)
            length[length == 0.0] = 1.0
            normals = normals / length
            lambert = np.maximum(0.0, normals @ light)
            shade = np.clip(render_cfg.ambient + (1.0 - render_cfg.ambient) * lambert, 0.0, 1.0)
            if render_cfg.fog_density > 0.0:
                fade = np.exp(-render_cfg.fog_density * buffers.depth[pix])
                shade = render_cfg.fog_target + (shade - render_cfg.fog_target) * fade
            intensity[pix] = np.clip(shade, 0.0, 1.0)

    return FrameSet(intensity=intensity, agent_id=buffers.agent_id, depth=buffers.depth)


def render_sequence(
    states: Iterable["SceneState"],
    class_meshes: Sequence[Mesh],
    camera: CameraConfig,
    render_cfg: RenderConfig,
    seed: int,
    noise_fields: Mapping[int, NoiseField] | None = None,
) -> Iterator[FrameSet]:
    """Render a state stream; background noise streams derive from
    (seed, "bg", frame_index) so frames are independent and reproducible."""
    for state in states:
        rng = derive_stream(seed, "bg", state.frame_index)
        yield rasterize_scene(state.agents, class_meshes, camera, render_cfg, rng, noise_fields)
