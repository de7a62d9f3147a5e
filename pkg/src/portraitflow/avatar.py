"""Procedural head-and-torso avatar with linear blendshapes and rigid head pose.

The avatar is a desk-scale stand-in for captured subjects: an ellipsoid head
with decal facial features (eyes, mouth, brows) whose geometry responds
linearly to a 6-d expression vector, a world-static torso box, and eight
uniquely colored fiducial dots used by the analytic evaluation probes.

World frame: y down, head center at the origin, face toward -z.  The torso
stays world-static while the head rotates about the neck pivot, so rendered
normal maps carry head-pose information independent of camera motion.

Sequence kinds:
  phone_like    static near-frontal camera, dynamic expression and head pose
  studio_like   static random-viewpoint camera, dynamic expression and pose
  view_sweep    spin/spiral camera path, frozen expression and pose
  dynamic_sweep spin/spiral camera path, dynamic expression and pose
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from . import camera as cam
from .rasterizer import TriMesh, empty_mesh, merge_meshes, render

SEQUENCE_KINDS = ("phone_like", "studio_like", "view_sweep", "dynamic_sweep")

EXPRESSION_DIM = 6
EXPRESSION_NAMES = ("left_eye_open", "right_eye_open", "mouth_open",
                    "mouth_width", "left_brow_raise", "right_brow_raise")

KEYPOINT_NAMES = ("left_eye_center", "right_eye_center",
                  "left_eyelid_apex", "right_eyelid_apex",
                  "left_mouth_corner", "right_mouth_corner",
                  "nose_tip", "chin")

# Fiducial dots keep fixed colors across identities; the evaluation probes
# segment them by chromaticity, which Lambertian shading preserves.
KEYPOINT_COLORS = {
    "left_eye_center": (1.00, 0.00, 1.00),
    "right_eye_center": (0.00, 1.00, 1.00),
    "left_eyelid_apex": (1.00, 1.00, 0.00),
    "right_eyelid_apex": (0.10, 0.90, 0.10),
    "left_mouth_corner": (1.00, 0.55, 0.00),
    "right_mouth_corner": (0.55, 0.00, 1.00),
    "nose_tip": (0.00, 0.45, 1.00),
    "chin": (0.95, 0.35, 0.55),
}

BACKGROUND_COLOR = (0.10, 0.10, 0.12)

BASE_SKIN_COLOR = (0.85, 0.68, 0.55)
BASE_FEATURE_COLORS = {
    "eye": (0.05, 0.05, 0.60),
    "mouth": (0.80, 0.08, 0.10),
    "brow": (0.30, 0.18, 0.08),
}
TORSO_COLOR = (0.25, 0.32, 0.45)

# Face layout: anchor directions from the head center (unit-ish, y down) and
# decal sizes in meters.  Aperture of each eye is EYE_APERTURE_MIN +
# eye_open * EYE_APERTURE_GAIN, an affine law the probes rely on.
EYE_DIRS = {"left": (-0.40, -0.26, -0.88), "right": (0.40, -0.26, -0.88)}
BROW_DIRS = {"left": (-0.40, -0.62, -0.72), "right": (0.40, -0.62, -0.72)}
MOUTH_DIR = (0.0, 0.42, -0.90)
NOSE_DIR = (0.0, 0.02, -1.0)
CHIN_DIR = (0.0, 0.80, -0.60)

EYE_HALF_WIDTH = 0.026
EYE_APERTURE_MIN = 0.006
EYE_APERTURE_GAIN = 0.016
MOUTH_HALF_WIDTH = 0.030
MOUTH_WIDTH_GAIN = 0.012
MOUTH_APERTURE_MIN = 0.005
MOUTH_APERTURE_GAIN = 0.019
BROW_HALF_SIZE = (0.022, 0.0045)
BROW_RAISE_GAIN = 0.018
DOT_RADIUS = 0.0065

PATCH_LIFT = 0.003   # decal offset above the head surface
DOT_LIFT = 0.006     # fiducial dots sit above the decals

HEAD_SEGMENTS = (14, 22)  # latitude rings x longitude steps


@dataclass
class IdentityParams:
    seed: int
    head_radii: np.ndarray          # ellipsoid semi-axes (x, y, z), meters
    skin_color: tuple
    feature_colors: dict            # keys: eye, mouth, brow
    torso_size: np.ndarray          # box extents (x, y, z), meters

    def __post_init__(self):
        self.head_radii = np.asarray(self.head_radii, dtype=np.float64)
        self.torso_size = np.asarray(self.torso_size, dtype=np.float64)
        if (self.head_radii <= 0).any() or (self.torso_size <= 0).any():
            raise ValueError("head radii and torso size must be positive")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "head_radii": [float(x) for x in self.head_radii],
            "skin_color": [float(x) for x in self.skin_color],
            "feature_colors": {k: [float(x) for x in v] for k, v in self.feature_colors.items()},
            "torso_size": [float(x) for x in self.torso_size],
        }

    @staticmethod
    def from_dict(d: dict) -> "IdentityParams":
        return IdentityParams(
            seed=d["seed"], head_radii=np.array(d["head_radii"]),
            skin_color=tuple(d["skin_color"]),
            feature_colors={k: tuple(v) for k, v in d["feature_colors"].items()},
            torso_size=np.array(d["torso_size"]),
        )


def sample_identity(seed: int) -> IdentityParams:
    rng = np.random.default_rng(seed)
    radii = np.array([0.095, 0.115, 0.095]) * (1.0 + rng.uniform(-0.12, 0.12, size=3))
    skin = np.clip(np.array(BASE_SKIN_COLOR) + rng.uniform(-0.06, 0.06, size=3), 0.0, 1.0)
    feature = {}
    for name, base in BASE_FEATURE_COLORS.items():
        feature[name] = tuple(np.clip(np.array(base) + rng.uniform(-0.04, 0.04, size=3), 0.0, 1.0))
    torso = np.array([0.30, 0.26, 0.14]) * (1.0 + rng.uniform(-0.15, 0.15, size=3))
    return IdentityParams(seed=seed, head_radii=radii, skin_color=tuple(skin),
                          feature_colors=feature, torso_size=torso)


@dataclass
class ExpressionParams:
    values: np.ndarray  # in [0, 1]^EXPRESSION_DIM

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).reshape(EXPRESSION_DIM)
        if (self.values < 0).any() or (self.values > 1).any():
            raise ValueError("expression components must lie in [0, 1]")

    @staticmethod
    def neutral() -> "ExpressionParams":
        return ExpressionParams(np.zeros(EXPRESSION_DIM))


@dataclass
class HeadPose:
    yaw: float = 0.0
    pitch: float = 0.0
    roll: float = 0.0
    neck_offset: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.neck_offset = np.asarray(self.neck_offset, dtype=np.float64).reshape(3)
        if abs(self.yaw) > math.pi or abs(self.pitch) > math.pi / 2 or abs(self.roll) > math.pi:
            raise ValueError("head pose angles out of range")

    def rotation(self) -> np.ndarray:
        cy, sy = math.cos(self.yaw), math.sin(self.yaw)
        cp, sp = math.cos(self.pitch), math.sin(self.pitch)
        cr, sr = math.cos(self.roll), math.sin(self.roll)
        ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
        rx = np.array([[1, 0, 0], [0, cp, -sp], [0, sp, cp]])
        rz = np.array([[cr, -sr, 0], [sr, cr, 0], [0, 0, 1]])
        return rz @ rx @ ry

    def as_vector(self) -> np.ndarray:
        return np.concatenate([[self.yaw, self.pitch, self.roll], self.neck_offset])

    @staticmethod
    def from_vector(v) -> "HeadPose":
        v = np.asarray(v, dtype=np.float64).reshape(6)
        return HeadPose(yaw=float(v[0]), pitch=float(v[1]), roll=float(v[2]), neck_offset=v[3:])


@dataclass
class Keypoints3D:
    points: dict  # name -> (3,) world position

    def as_array(self) -> np.ndarray:
        return np.stack([self.points[n] for n in KEYPOINT_NAMES], axis=0)


# ---------------------------------------------------------------------------
# Rig construction
# ---------------------------------------------------------------------------

def _ellipsoid_point(direction, radii):
    d = np.asarray(direction, dtype=np.float64)
    d = d / np.linalg.norm(d)
    return d * radii  # component-wise scaling keeps the point on the ellipsoid


def _ellipsoid_normal(point, radii):
    n = point / (radii ** 2)
    return n / np.linalg.norm(n)


def _tangent_frame(normal):
    """(right, up) unit vectors spanning the tangent plane, up toward -y."""
    up = np.array([0.0, -1.0, 0.0])
    e2 = up - np.dot(up, normal) * normal
    e2 = e2 / np.linalg.norm(e2)
    e1 = np.cross(e2, normal)
    return e1, e2


class _MeshBuilder:
    def __init__(self):
        self.vertices, self.colors, self.normals, self.faces = [], [], [], []
        # blendshape displacements: component -> list of (vertex index, (3,))
        self.blend = {k: [] for k in range(EXPRESSION_DIM)}

    def add_vertex(self, pos, color, normal, blend=None) -> int:
        idx = len(self.vertices)
        self.vertices.append(np.asarray(pos, dtype=np.float64))
        self.colors.append(np.asarray(color, dtype=np.float64))
        self.normals.append(np.asarray(normal, dtype=np.float64))
        if blend:
            for k, disp in blend.items():
                self.blend[k].append((idx, np.asarray(disp, dtype=np.float64)))
        return idx

    def add_face(self, a, b, c):
        self.faces.append((a, b, c))


def _add_ellipsoid(b: _MeshBuilder, radii, color, n_lat, n_lon):
    top = b.add_vertex((0.0, -radii[1], 0.0), color, (0.0, -1.0, 0.0))
    bottom = b.add_vertex((0.0, radii[1], 0.0), color, (0.0, 1.0, 0.0))
    rings = []
    for i in range(1, n_lat):
        theta = math.pi * i / n_lat
        ring = []
        for j in range(n_lon):
            phi = 2.0 * math.pi * j / n_lon
            d = np.array([math.sin(theta) * math.sin(phi),
                          -math.cos(theta),
                          -math.sin(theta) * math.cos(phi)])
            p = d * radii
            ring.append(b.add_vertex(p, color, _ellipsoid_normal(p, radii)))
        rings.append(ring)
    for j in range(n_lon):
        jn = (j + 1) % n_lon
        b.add_face(top, rings[0][j], rings[0][jn])
        b.add_face(bottom, rings[-1][jn], rings[-1][j])
    for i in range(len(rings) - 1):
        for j in range(n_lon):
            jn = (j + 1) % n_lon
            a, c = rings[i][j], rings[i][jn]
            d, e = rings[i + 1][j], rings[i + 1][jn]
            b.add_face(a, e, c)
            b.add_face(a, d, e)


def _add_disc(b: _MeshBuilder, center, e1, e2, normal, half_w, half_h, color,
              n_seg, blend_fn=None):
    """Elliptical decal; blend_fn(tau) gives per-rim-vertex blend displacements."""
    cidx = b.add_vertex(center, color, normal,
                        blend=blend_fn(None) if blend_fn else None)
    rim = []
    for s in range(n_seg):
        tau = 2.0 * math.pi * s / n_seg
        pos = center + e1 * (half_w * math.cos(tau)) + e2 * (half_h * math.sin(tau))
        rim.append(b.add_vertex(pos, color, normal,
                                blend=blend_fn(tau) if blend_fn else None))
    for s in range(n_seg):
        b.add_face(cidx, rim[s], rim[(s + 1) % n_seg])


def _add_quad(b: _MeshBuilder, center, e1, e2, normal, half_w, half_h, color, blend=None):
    corners = [center - e1 * half_w - e2 * half_h, center + e1 * half_w - e2 * half_h,
               center + e1 * half_w + e2 * half_h, center - e1 * half_w + e2 * half_h]
    idx = [b.add_vertex(p, color, normal, blend=blend) for p in corners]
    # e1 x e2 = normal, so (0, 1, 2) and (0, 2, 3) wind outward
    b.add_face(idx[0], idx[1], idx[2])
    b.add_face(idx[0], idx[2], idx[3])


def _add_box(b: _MeshBuilder, center, half_sizes, color):
    hx, hy, hz = half_sizes
    axes = [(np.array([1.0, 0, 0]), hx, (hy, hz)), (np.array([0, 1.0, 0]), hy, (hz, hx)),
            (np.array([0, 0, 1.0]), hz, (hx, hy))]
    for n, hn, (ha, hb) in axes:
        for sign in (1.0, -1.0):
            normal = n * sign
            u = np.roll(n, 1) * sign  # flips winding with the face
            v = np.roll(n, 2)
            _add_quad(b, np.asarray(center) + normal * hn, u * 1.0, v * 1.0, normal,
                      ha, hb, color)


class AvatarRig:
    """Precomputed base mesh, blendshape basis and fiducial anchors for one identity."""

    def __init__(self, identity: IdentityParams):
        self.identity = identity
        radii = identity.head_radii
        self.neck_pivot = np.array([0.0, radii[1], 0.0])
        torso_center = self.neck_pivot + np.array([0.0, 0.02 + identity.torso_size[1] / 2.0, 0.0])

        b = _MeshBuilder()
        _add_ellipsoid(b, radii, identity.skin_color, *HEAD_SEGMENTS)
        self._keypoint_base = {}
        self._keypoint_blend = {k: {} for k in KEYPOINT_NAMES}

        for side, k_eye in (("left", 0), ("right", 1)):
            p = _ellipsoid_point(EYE_DIRS[side], radii)
            n = _ellipsoid_normal(p, radii)
            e1, e2 = _tangent_frame(n)
            patch_c = p + n * PATCH_LIFT

            def eye_blend(tau, e2=e2, k=k_eye):
                if tau is None:
                    return None
                return {k: e2 * (EYE_APERTURE_GAIN * math.sin(tau))}

            _add_disc(b, patch_c, e1, e2, n, EYE_HALF_WIDTH, EYE_APERTURE_MIN,
                      identity.feature_colors["eye"], n_seg=12, blend_fn=eye_blend)

            center_name = f"{side}_eye_center"
            apex_name = f"{side}_eyelid_apex"
            self._add_dot(b, p + n * DOT_LIFT, e1, e2, n, center_name)
            apex = p + e2 * EYE_APERTURE_MIN + n * DOT_LIFT
            self._add_dot(b, apex, e1, e2, n, apex_name,
                          blend={k_eye: e2 * EYE_APERTURE_GAIN})

        p = _ellipsoid_point(MOUTH_DIR, radii)
        n = _ellipsoid_normal(p, radii)
        e1, e2 = _tangent_frame(n)
        mouth_c = p + n * PATCH_LIFT

        def mouth_blend(tau, e1=e1, e2=e2):
            if tau is None:
                return None
            return {2: e2 * (MOUTH_APERTURE_GAIN * math.sin(tau)),
                    3: e1 * (MOUTH_WIDTH_GAIN * math.cos(tau))}

        _add_disc(b, mouth_c, e1, e2, n, MOUTH_HALF_WIDTH, MOUTH_APERTURE_MIN,
                  identity.feature_colors["mouth"], n_seg=12, blend_fn=mouth_blend)
        for side, sgn in (("left", -1.0), ("right", 1.0)):
            corner = p + e1 * (sgn * MOUTH_HALF_WIDTH) + n * DOT_LIFT
            self._add_dot(b, corner, e1, e2, n, f"{side}_mouth_corner",
                          blend={3: e1 * (sgn * MOUTH_WIDTH_GAIN)})

        for side, k_brow in (("left", 4), ("right", 5)):
            p = _ellipsoid_point(BROW_DIRS[side], radii)
            n = _ellipsoid_normal(p, radii)
            e1, e2 = _tangent_frame(n)
            _add_quad(b, p + n * PATCH_LIFT, e1, e2, n, BROW_HALF_SIZE[0], BROW_HALF_SIZE[1],
                      identity.feature_colors["brow"],
                      blend={k_brow: e2 * BROW_RAISE_GAIN})

        for name, direction in (("nose_tip", NOSE_DIR), ("chin", CHIN_DIR)):
            p = _ellipsoid_point(direction, radii)
            n = _ellipsoid_normal(p, radii)
            e1, e2 = _tangent_frame(n)
            self._add_dot(b, p + n * DOT_LIFT, e1, e2, n, name)

        self.n_head_vertices = len(b.vertices)
        _add_box(b, torso_center, np.asarray(identity.torso_size) / 2.0, TORSO_COLOR)

        self.base_vertices = np.stack(b.vertices)
        self.base_colors = np.stack(b.colors)
        self.base_normals = np.stack(b.normals)
        self.faces = np.array(b.faces, dtype=np.int64)
        self._blend = {}
        for k, entries in b.blend.items():
            if entries:
                idx = np.array([i for i, _ in entries], dtype=np.int64)
                disp = np.stack([d for _, d in entries])
                self._blend[k] = (idx, disp)

    def _add_dot(self, b, center, e1, e2, n, name, blend=None):
        self._keypoint_base[name] = np.asarray(center, dtype=np.float64)
        if blend:
            self._keypoint_blend[name] = blend
        _add_disc(b, center, e1, e2, n, DOT_RADIUS, DOT_RADIUS, KEYPOINT_COLORS[name],
                  n_seg=8, blend_fn=(lambda tau: dict(blend)) if blend else None)

    def blendshape_support(self, k: int) -> np.ndarray:
        """Indices of vertices displaced by expression component k."""
        if k not in self._blend:
            return np.zeros(0, dtype=np.int64)
        return np.unique(self._blend[k][0])

    def blendshape_max_norms(self) -> np.ndarray:
        """Per-component max vertex displacement norm at full activation."""
        out = np.zeros(EXPRESSION_DIM)
        for k, (idx, disp) in self._blend.items():
            out[k] = np.linalg.norm(disp, axis=1).max()
        return out

    def mesh(self, expression: ExpressionParams, pose: HeadPose) -> TriMesh:
        verts = self.base_vertices.copy()
        for k, (idx, disp) in self._blend.items():
            e = expression.values[k]
            if e != 0.0:
                np.add.at(verts, idx, e * disp)
        normals = self.base_normals.copy()
        R = pose.rotation()
        nh = self.n_head_vertices
        verts[:nh] = (verts[:nh] - self.neck_pivot) @ R.T + self.neck_pivot + pose.neck_offset
        normals[:nh] = normals[:nh] @ R.T
        return TriMesh(verts, self.faces, self.base_colors, normals)

    def keypoints(self, expression: ExpressionParams, pose: HeadPose) -> Keypoints3D:
        R = pose.rotation()
        pts = {}
        for name in KEYPOINT_NAMES:
            p = self._keypoint_base[name].copy()
            for k, disp in self._keypoint_blend[name].items():
                p = p + expression.values[k] * disp
            pts[name] = (p - self.neck_pivot) @ R.T + self.neck_pivot + pose.neck_offset
        return Keypoints3D(points=pts)

    def eye_aperture(self, eye_open: float) -> float:
        """3D eyelid aperture: apex-to-center distance, affine in eye_open."""
        return EYE_APERTURE_MIN + eye_open * EYE_APERTURE_GAIN


def build_mesh(identity: IdentityParams, expression: ExpressionParams,
               pose: HeadPose) -> TriMesh:
    return AvatarRig(identity).mesh(expression, pose)


def keypoints(identity: IdentityParams, expression: ExpressionParams,
              pose: HeadPose) -> Keypoints3D:
    return AvatarRig(identity).keypoints(expression, pose)


# ---------------------------------------------------------------------------
# Temporal signals and sequence generation
# ---------------------------------------------------------------------------

HEAD_POSE_BOUNDS = np.array([
    [-0.6, 0.6],      # yaw
    [-0.35, 0.35],    # pitch
    [-0.25, 0.25],    # roll
    [-0.012, 0.012], [-0.012, 0.012], [-0.012, 0.012],  # neck offset
])


def smooth_random_walk(rng, T: int, lo, hi, theta: float = 0.12,
                       sigma: float = 0.10) -> np.ndarray:
    """Mean-reverting random walk clamped to [lo, hi] per channel, (T, d)."""
    lo = np.atleast_1d(np.asarray(lo, dtype=np.float64))
    hi = np.atleast_1d(np.asarray(hi, dtype=np.float64))
    d = lo.shape[0]
    span = hi - lo
    mean = lo + span * rng.uniform(0.3, 0.7, size=d)
    x = lo + span * rng.uniform(0.2, 0.8, size=d)
    out = np.empty((T, d))
    for t in range(T):
        out[t] = x
        x = x + theta * (mean - x) + sigma * span * rng.normal(size=d)
        x = np.clip(x, lo, hi)
    return out


@dataclass
class SequenceSample:
    """One clip: frames, normal maps, camera track and per-frame annotations.

    Image arrays are float32 in [0, 1], already quantized to 8-bit levels so
    in-memory sequences match their on-disk PNG round trip exactly.
    """

    frames: np.ndarray        # (T, H, W, 3)
    normal_maps: np.ndarray   # (T, H, W, 3)
    trajectory: cam.Trajectory
    expressions: np.ndarray   # (T, EXPRESSION_DIM)
    head_poses: np.ndarray    # (T, 6): yaw, pitch, roll, neck offset
    identity: IdentityParams
    kind: str
    seed: int = 0

    def __post_init__(self):
        T = len(self.frames)
        if T % 4 != 1:
            raise ValueError(f"sequence length {T} must be 1 mod 4")
        lengths = {len(self.normal_maps), len(self.trajectory.poses),
                   len(self.expressions), len(self.head_poses)}
        if lengths != {T}:
            raise ValueError(f"per-frame arrays disagree on length: {lengths} vs {T}")
        if self.kind not in SEQUENCE_KINDS:
            raise ValueError(f"unknown sequence kind {self.kind!r}")

    @property
    def T(self) -> int:
        return len(self.frames)

    def cropped(self, T: int) -> "SequenceSample":
        """Prefix crop to T frames (T must be 1 mod 4)."""
        if T > self.T:
            raise ValueError(f"cannot crop to {T} frames from {self.T}")
        traj = cam.Trajectory(poses=self.trajectory.poses[:T],
                              intrinsics=self.trajectory.intrinsics,
                              kind=self.trajectory.kind)
        return SequenceSample(self.frames[:T], self.normal_maps[:T], traj,
                              self.expressions[:T], self.head_poses[:T],
                              self.identity, self.kind, self.seed)


def quantize_frame(img: np.ndarray) -> np.ndarray:
    """Round to 8-bit levels, returned as float32 in [0, 1]."""
    u8 = np.clip(np.round(np.asarray(img) * 255.0), 0, 255).astype(np.uint8)
    return (u8.astype(np.float32)) / np.float32(255.0)


def _sub_seed(rng) -> int:
    return int(rng.integers(0, 2 ** 31 - 1))


def generate_sequence(kind: str, seed: int, T: int, resolution: int,
                      identity: IdentityParams | None = None,
                      spatial_factor: int = 4) -> SequenceSample:
    """Render one annotated sequence of the requested kind (deterministic)."""
    if kind not in SEQUENCE_KINDS:
        raise ValueError(f"unknown sequence kind {kind!r}")
    if T % 4 != 1:
        raise ValueError(f"frame count T={T} must satisfy T = 1 (mod 4)")
    if resolution % spatial_factor != 0:
        raise ValueError(f"resolution {resolution} not divisible by spatial factor {spatial_factor}")

    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xA11CE]))
    if identity is None:
        identity = sample_identity(_sub_seed(rng))
    intr = cam.intrinsics_from_fov(resolution, resolution, 72.0)
    look_at = (0.0, 0.0, 0.0)

    if kind == "phone_like":
        yaw = math.radians(rng.uniform(-15, 15))
        elev = math.radians(rng.uniform(-3, 8))
        dist = rng.uniform(0.28, 0.38)
        pose = cam.look_at_pose(cam.spherical_to_center(yaw, elev, dist, look_at), look_at)
        traj = cam.static_trajectory(pose, T, intr)
    elif kind == "studio_like":
        yaw = math.radians(rng.uniform(-75, 75))
        elev = math.radians(rng.uniform(-5, 25))
        dist = rng.uniform(0.25, 0.40)
        pose = cam.look_at_pose(cam.spherical_to_center(yaw, elev, dist, look_at), look_at)
        traj = cam.static_trajectory(pose, T, intr)
    else:
        if rng.random() < 0.5:
            traj = cam.spin_trajectory(_sub_seed(rng), T, intrinsics=intr, look_at=look_at)
        else:
            traj = cam.spiral_trajectory(_sub_seed(rng), T, intrinsics=intr, look_at=look_at)

    if kind == "view_sweep":
        expr = np.tile(rng.uniform(0.0, 1.0, size=EXPRESSION_DIM), (T, 1))
        hp_lo, hp_hi = HEAD_POSE_BOUNDS[:, 0], HEAD_POSE_BOUNDS[:, 1]
        head = np.tile(hp_lo + (hp_hi - hp_lo) * rng.uniform(0.25, 0.75, size=6), (T, 1))
    else:
        expr = smooth_random_walk(rng, T, np.zeros(EXPRESSION_DIM), np.ones(EXPRESSION_DIM))
        head = smooth_random_walk(rng, T, HEAD_POSE_BOUNDS[:, 0], HEAD_POSE_BOUNDS[:, 1],
                                  theta=0.10, sigma=0.06)

    rig = AvatarRig(identity)
    frames = np.empty((T, resolution, resolution, 3), dtype=np.float32)
    normals = np.empty_like(frames)
    for i in range(T):
        mesh = rig.mesh(ExpressionParams(expr[i]), HeadPose.from_vector(head[i]))
        out = render(mesh, traj.poses[i], intr, background=BACKGROUND_COLOR)
        frames[i] = quantize_frame(out.color)
        normals[i] = quantize_frame(out.normal_map)

    return SequenceSample(frames=frames, normal_maps=normals, trajectory=traj,
                          expressions=expr.astype(np.float64), head_poses=head,
                          identity=identity, kind=kind, seed=seed)


# ---------------------------------------------------------------------------
# On-disk datasets
# ---------------------------------------------------------------------------

@dataclass
class DatasetConfig:
    seed: int = 0
    identities: int = 4
    sequences_per_kind: dict = field(default_factory=lambda: {
        "phone_like": 1, "studio_like": 1, "view_sweep": 1, "dynamic_sweep": 1})
    T: int = 81
    resolution: int = 32

    def __post_init__(self):
        for k in self.sequences_per_kind:
            if k not in SEQUENCE_KINDS:
                raise ValueError(f"unknown sequence kind {k!r}")


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def _save_png(path: Path, img: np.ndarray) -> None:
    u8 = np.clip(np.round(np.asarray(img) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(u8, mode="RGB").save(path, format="PNG")


def save_sequence(sample: SequenceSample, seq_dir: Path) -> None:
    seq_dir = Path(seq_dir)
    (seq_dir / "frames").mkdir(parents=True, exist_ok=True)
    (seq_dir / "normals").mkdir(parents=True, exist_ok=True)
    _dump_json(seq_dir / "meta.json", {
        "kind": sample.kind, "T": sample.T, "seed": sample.seed,
        "identity": sample.identity.to_dict(),
    })
    _dump_json(seq_dir / "camera.json", sample.trajectory.to_dict())
    _dump_json(seq_dir / "expression.json", [[float(x) for x in row] for row in sample.expressions])
    _dump_json(seq_dir / "headpose.json", [[float(x) for x in row] for row in sample.head_poses])
    for i in range(sample.T):
        _save_png(seq_dir / "frames" / f"{i:05d}.png", sample.frames[i])
        _save_png(seq_dir / "normals" / f"{i:05d}.png", sample.normal_maps[i])


def load_sequence(seq_dir) -> SequenceSample:
    seq_dir = Path(seq_dir)
    meta = json.loads((seq_dir / "meta.json").read_text())
    traj = cam.Trajectory.from_dict(json.loads((seq_dir / "camera.json").read_text()))
    expr = np.array(json.loads((seq_dir / "expression.json").read_text()))
    head = np.array(json.loads((seq_dir / "headpose.json").read_text()))
    T = meta["T"]
    frames, normals = [], []
    for i in range(T):
        frames.append(np.asarray(Image.open(seq_dir / "frames" / f"{i:05d}.png"),
                                 dtype=np.float32) / np.float32(255.0))
        normals.append(np.asarray(Image.open(seq_dir / "normals" / f"{i:05d}.png"),
                                  dtype=np.float32) / np.float32(255.0))
    return SequenceSample(frames=np.stack(frames), normal_maps=np.stack(normals),
                          trajectory=traj, expressions=expr, head_poses=head,
                          identity=IdentityParams.from_dict(meta["identity"]),
                          kind=meta["kind"], seed=meta["seed"])


def sequence_seed(root_seed: int, kind: str, identity_index: int, j: int) -> int:
    kind_idx = SEQUENCE_KINDS.index(kind)
    ss = np.random.SeedSequence([root_seed, kind_idx, identity_index, j])
    return int(ss.generate_state(1)[0])


def identity_seed(root_seed: int, identity_index: int) -> int:
    ss = np.random.SeedSequence([root_seed, 0x1D, identity_index])
    return int(ss.generate_state(1)[0])


def generate_dataset(config: DatasetConfig, out_dir, force: bool = False,
                     identity_indices=None, progress=None) -> dict:
    """Write a dataset tree `<out>/<kind>/<seq_id>/...`, fully seed-determined.

    Returns the manifest dict (also written to `<out>/dataset.json`).
    """
    out_dir = Path(out_dir)
    if out_dir.exists() and any(out_dir.iterdir()) and not force:
        raise FileExistsError(f"output directory {out_dir} is not empty (use force)")
    out_dir.mkdir(parents=True, exist_ok=True)

    if identity_indices is None:
        identity_indices = range(config.identities)
    manifest = {"seed": config.seed, "T": config.T, "resolution": config.resolution,
                "kinds": {}}
    for kind in SEQUENCE_KINDS:
        n_per = config.sequences_per_kind.get(kind, 0)
        if n_per == 0:
            continue
        seq_dirs = []
        for ident_idx in identity_indices:
            identity = sample_identity(identity_seed(config.seed, ident_idx))
            for j in range(n_per):
                seed = sequence_seed(config.seed, kind, ident_idx, j)
                sample = generate_sequence(kind, seed, config.T, config.resolution,
                                           identity=identity)
                seq_id = f"id{ident_idx:03d}_{j:02d}"
                save_sequence(sample, out_dir / kind / seq_id)
                seq_dirs.append(f"{kind}/{seq_id}")
                if progress:
                    progress(f"{kind}/{seq_id}")
        manifest["kinds"][kind] = seq_dirs
    _dump_json(out_dir / "dataset.json", manifest)
    return manifest


def load_dataset_manifest(root) -> dict:
    return json.loads((Path(root) / "dataset.json").read_text())
