"""Minimal z-buffered perspective rasterizer for color, normal and mask frames.

Deterministic by construction: float64 arithmetic, top-left fill rule, pixel
centers at half-integer coordinates, no anti-aliasing.  Camera-space vertex
positions are computed as (v - center) @ R^T, so translating the scene and
the camera center by the same world vector reproduces identical bits.

Normal maps encode camera-space normals n as (n + 1) / 2; background pixels
hold (0.5, 0.5, 0.5), the encoding of the zero vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import CameraPose, Intrinsics

_Z_NEAR = 1e-6

BACKGROUND_NORMAL = np.array([0.5, 0.5, 0.5])


@dataclass
class TriMesh:
    """Triangle mesh with per-vertex colors and unit normals (world space).

    Faces are wound counter-clockwise seen from outside (against the normal).
    """

    vertices: np.ndarray
    faces: np.ndarray
    vertex_colors: np.ndarray
    vertex_normals: np.ndarray

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        self.vertex_colors = np.asarray(self.vertex_colors, dtype=np.float64).reshape(-1, 3)
        self.vertex_normals = np.asarray(self.vertex_normals, dtype=np.float64).reshape(-1, 3)
        n = len(self.vertices)
        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= n):
            raise ValueError(f"face index out of range for {n} vertices")
        if len(self.vertex_colors) != n or len(self.vertex_normals) != n:
            raise ValueError("vertex attribute arrays must match vertex count")
        if n:
            norm_err = np.abs(np.linalg.norm(self.vertex_normals, axis=1) - 1.0).max()
            if norm_err > 1e-4:
                raise ValueError(f"vertex normals not unit length (max err {norm_err:.3e})")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)


def empty_mesh() -> TriMesh:
    z = np.zeros((0, 3))
    return TriMesh(z, np.zeros((0, 3), dtype=np.int64), z, z)


def merge_meshes(meshes) -> TriMesh:
    meshes = [m for m in meshes if m.n_vertices]
    if not meshes:
        return empty_mesh()
    offsets = np.cumsum([0] + [m.n_vertices for m in meshes[:-1]])
    return TriMesh(
        vertices=np.concatenate([m.vertices for m in meshes]),
        faces=np.concatenate([m.faces + o for m, o in zip(meshes, offsets)]),
        vertex_colors=np.concatenate([m.vertex_colors for m in meshes]),
        vertex_normals=np.concatenate([m.vertex_normals for m in meshes]),
    )


@dataclass
class RenderOutput:
    color: np.ndarray       # (H, W, 3) in [0, 1]
    normal_map: np.ndarray  # (H, W, 3) in [0, 1], (n + 1) / 2 encoding
    depth: np.ndarray       # (H, W), +inf on background
    mask: np.ndarray        # (H, W) bool, True where geometry was hit


def encode_normals(n: np.ndarray) -> np.ndarray:
    return (n + 1.0) / 2.0


def decode_normals(encoded: np.ndarray) -> np.ndarray:
    return encoded * 2.0 - 1.0


def _edge_is_top_left(dx: float, dy: float) -> bool:
    # Winding here makes interior edge values positive; "left" edges run
    # downward (dy > 0), "top" edges are horizontal with interior below.
    return dy > 0.0 or (dy == 0.0 and dx < 0.0)


def render(mesh: TriMesh, pose: CameraPose, intrinsics: Intrinsics,
           background=(0.0, 0.0, 0.0), ambient: float = 0.35) -> RenderOutput:
    """Rasterize `mesh` through a pinhole camera.

    Z-buffered, back-face culled, perspective-correct attribute interpolation.
    Color is Lambertian under a headlight along the optical axis:
    albedo * (ambient + (1 - ambient) * max(0, -n_z)) with camera-space n.
    An empty mesh yields an all-background output.
    """
    H, W = intrinsics.height, intrinsics.width
    color = np.empty((H, W, 3), dtype=np.float64)
    color[:] = np.asarray(background, dtype=np.float64)
    normal_cam = np.zeros((H, W, 3), dtype=np.float64)
    depth = np.full((H, W), np.inf, dtype=np.float64)

    if mesh.n_vertices and len(mesh.faces):
        R = pose.rotation
        verts_cam = (mesh.vertices - pose.center) @ R.T
        normals_cam = mesh.vertex_normals @ R.T

        z = verts_cam[:, 2]
        su = intrinsics.fx * verts_cam[:, 0] / z + intrinsics.cx
        sv = intrinsics.fy * verts_cam[:, 1] / z + intrinsics.cy

        for f in mesh.faces:
            _raster_triangle(f, verts_cam, su, sv, z, normals_cam, mesh.vertex_colors,
                             color, normal_cam, depth, H, W, ambient)

    mask = np.isfinite(depth)
    normal_map = np.where(mask[..., None], encode_normals(normal_cam),
                          BACKGROUND_NORMAL)
    return RenderOutput(color=color, normal_map=normal_map, depth=depth, mask=mask)


def _raster_triangle(face, verts_cam, su, sv, z, normals_cam, colors,
                     color_buf, normal_buf, depth_buf, H, W, ambient):
    i0, i1, i2 = face
    z0, z1, z2 = z[i0], z[i1], z[i2]
    if z0 <= _Z_NEAR or z1 <= _Z_NEAR or z2 <= _Z_NEAR:
        return
    p = np.array([[su[i0], sv[i0]], [su[i1], sv[i1]], [su[i2], sv[i2]]])

    # Front faces (outward normal toward the camera) project clockwise in the
    # y-down image plane; area2 computed CCW-positive is then negative.
    area2 = (p[1, 0] - p[0, 0]) * (p[2, 1] - p[0, 1]) - (p[1, 1] - p[0, 1]) * (p[2, 0] - p[0, 0])
    if area2 >= 0.0:
        return
    inv_area = 1.0 / (-area2)

    x_lo = max(int(np.floor(p[:, 0].min() - 0.5)), 0)
    x_hi = min(int(np.ceil(p[:, 0].max() - 0.5)), W - 1)
    y_lo = max(int(np.floor(p[:, 1].min() - 0.5)), 0)
    y_hi = min(int(np.ceil(p[:, 1].max() - 0.5)), H - 1)
    if x_lo > x_hi or y_lo > y_hi:
        return

    px = np.arange(x_lo, x_hi + 1) + 0.5
    py = np.arange(y_lo, y_hi + 1) + 0.5
    gx, gy = np.meshgrid(px, py)

    # Edge functions oriented so the interior is positive; boundary pixels
    # are owned by top/left edges only.
    ws = []
    inside = np.ones_like(gx, dtype=bool)
    for a, b in ((1, 2), (2, 0), (0, 1)):
        dx, dy = p[b, 0] - p[a, 0], p[b, 1] - p[a, 1]
        w = dy * (gx - p[a, 0]) - dx * (gy - p[a, 1])
        if _edge_is_top_left(dx, dy):
            inside &= w >= 0.0
        else:
            inside &= w > 0.0
        ws.append(w)
    if not inside.any():
        return

    l0 = ws[0] * inv_area
    l1 = ws[1] * inv_area
    l2 = ws[2] * inv_area
    inv_z = l0 / z0 + l1 / z1 + l2 / z2
    frag_depth = 1.0 / inv_z

    ys, xs = np.nonzero(inside)
    rows, cols = ys + y_lo, xs + x_lo
    closer = frag_depth[ys, xs] < depth_buf[rows, cols]
    if not closer.any():
        return
    ys, xs = ys[closer], xs[closer]
    rows, cols = rows[closer], cols[closer]

    def interp(a0, a1, a2):
        num = (l0[ys, xs, None] * a0 / z0 + l1[ys, xs, None] * a1 / z1
               + l2[ys, xs, None] * a2 / z2)
        return num * frag_depth[ys, xs, None]

    n = interp(normals_cam[i0], normals_cam[i1], normals_cam[i2])
    n_len = np.linalg.norm(n, axis=-1, keepdims=True)
    n = np.divide(n, n_len, out=np.zeros_like(n), where=n_len > 0)
    albedo = interp(colors[i0], colors[i1], colors[i2])
    shade = ambient + (1.0 - ambient) * np.maximum(0.0, -n[:, 2])
    depth_buf[rows, cols] = frag_depth[ys, xs]
    normal_buf[rows, cols] = n
    color_buf[rows, cols] = np.clip(albedo * shade[:, None], 0.0, 1.0)
