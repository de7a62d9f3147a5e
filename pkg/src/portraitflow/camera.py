"""Camera pose algebra, orbit/spiral trajectory synthesis and Plucker ray maps.

Coordinate conventions (used throughout the package):

  World frame (right-handed):  x right, y DOWN, z forward.  "Up" is -y.
  Camera frame:                x right, y down, z forward (optical axis).
  Poses are stored world-to-camera:  x_cam = R @ x_world + t.
  Image frame:                 u right, v down, origin at the top-left
                               corner, pixel (u, v) has center (u+0.5, v+0.5).

A camera placed on the -z side of a subject and looking at it therefore has
an identity-like rotation, which keeps the axis-ray examples exact.

Ray maps are (H, W, 6) arrays: channels 0..2 hold the unit ray direction d,
channels 3..5 the moment m = o x d, both expressed in the reference camera's
frame, where o is the (relative) camera center.  <d, m> = 0 by construction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator

TRAJECTORY_KINDS = ("spin", "spiral", "static")

_ORTHO_TOL = 1e-6


class InvalidPoseError(ValueError):
    """Raised when a rotation matrix is not a proper orthonormal rotation."""


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not (0 <= self.cx < self.width):
            raise ValueError(f"cx={self.cx} outside [0, {self.width})")
        if not (0 <= self.cy < self.height):
            raise ValueError(f"cy={self.cy} outside [0, {self.height})")

    def to_dict(self) -> dict:
        return {
            "fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
            "width": self.width, "height": self.height,
        }

    @staticmethod
    def from_dict(d: dict) -> "Intrinsics":
        return Intrinsics(d["fx"], d["fy"], d["cx"], d["cy"], d["width"], d["height"])


def intrinsics_from_fov(width: int, height: int, fov_deg: float = 72.0) -> Intrinsics:
    """Square-pixel intrinsics from a horizontal=vertical field of view."""
    fx = (width / 2.0) / math.tan(math.radians(fov_deg) / 2.0)
    fy = (height / 2.0) / math.tan(math.radians(fov_deg) / 2.0)
    return Intrinsics(fx=fx, fy=fy, cx=width / 2.0, cy=height / 2.0, width=width, height=height)


def default_intrinsics(resolution: int = 64) -> Intrinsics:
    return intrinsics_from_fov(resolution, resolution, 72.0)


@dataclass(frozen=True)
class CameraPose:
    """World-to-camera rigid transform: x_cam = rotation @ x_world + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)
        err = np.abs(R.T @ R - np.eye(3)).max()
        if err > _ORTHO_TOL:
            raise InvalidPoseError(f"rotation is not orthonormal (max |R^T R - I| = {err:.3e})")
        det = np.linalg.det(R)
        if abs(det - 1.0) > _ORTHO_TOL:
            raise InvalidPoseError(f"rotation determinant {det:.6f} != +1")

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return -self.rotation.T @ self.translation

    def matrix(self) -> np.ndarray:
        """4x4 homogeneous world-to-camera matrix."""
        M = np.eye(4)
        M[:3, :3] = self.rotation
        M[:3, 3] = self.translation
        return M


def identity_pose() -> CameraPose:
    return CameraPose(np.eye(3), np.zeros(3))


def compose(outer: CameraPose, inner: CameraPose) -> CameraPose:
    """Transform applying `inner` first, then `outer`."""
    return CameraPose(outer.rotation @ inner.rotation,
                      outer.rotation @ inner.translation + outer.translation)


def relative_pose(driving: CameraPose, reference: CameraPose) -> CameraPose:
    """Transform mapping reference-camera coordinates to driving-camera coordinates.

    relative_pose(p, p) is the identity pose up to floating-point roundoff.
    """
    R = driving.rotation @ reference.rotation.T
    t = driving.translation - R @ reference.translation
    return CameraPose(R, t)


def look_at_pose(center, target) -> CameraPose:
    """World-to-camera pose for a camera at `center` looking at `target`.

    The camera's y axis is aligned with world +y (down) as closely as the
    viewing direction allows; degenerate for straight-up/-down viewing.
    """
    center = np.asarray(center, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    z = target - center
    nz = np.linalg.norm(z)
    if nz == 0.0:
        raise ValueError("camera center coincides with look-at target")
    z = z / nz
    down = np.array([0.0, 1.0, 0.0])
    y = down - np.dot(down, z) * z
    ny = np.linalg.norm(y)
    if ny < 1e-9:
        raise ValueError("viewing direction parallel to the vertical axis")
    y = y / ny
    x = np.cross(y, z)
    R = np.stack([x, y, z], axis=0)
    return CameraPose(R, -R @ center)


def viewpoint_spherical(center, look_at) -> tuple[float, float, float]:
    """(yaw, elevation, distance) of a camera center relative to a look-at point.

    Yaw is measured about the vertical axis, zero at the -z (frontal) side;
    elevation is positive above the horizontal plane through `look_at`.
    Angles in radians.
    """
    v = np.asarray(center, dtype=np.float64) - np.asarray(look_at, dtype=np.float64)
    dist = float(np.linalg.norm(v))
    yaw = math.atan2(v[0], -v[2])
    elevation = math.atan2(-v[1], math.hypot(v[0], v[2]))
    return yaw, elevation, dist


def spherical_to_center(yaw: float, elevation: float, distance: float, look_at) -> np.ndarray:
    """Inverse of viewpoint_spherical (angles in radians)."""
    u = np.array([
        math.cos(elevation) * math.sin(yaw),
        -math.sin(elevation),
        -math.cos(elevation) * math.cos(yaw),
    ])
    return np.asarray(look_at, dtype=np.float64) + distance * u


@dataclass
class Trajectory:
    """Per-frame camera path with shared intrinsics."""

    poses: list
    intrinsics: Intrinsics
    kind: str

    def __post_init__(self):
        if self.kind not in TRAJECTORY_KINDS:
            raise ValueError(f"unknown trajectory kind {self.kind!r}")
        if len(self.poses) == 0:
            raise ValueError("trajectory must contain at least one pose")

    def __len__(self) -> int:
        return len(self.poses)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "intrinsics": self.intrinsics.to_dict(),
            "poses": [
                {"R": [float(x) for x in p.rotation.reshape(-1)],
                 "t": [float(x) for x in p.translation]}
                for p in self.poses
            ],
        }

    @staticmethod
    def from_dict(d: dict) -> "Trajectory":
        poses = [CameraPose(np.array(p["R"]).reshape(3, 3), np.array(p["t"])) for p in d["poses"]]
        return Trajectory(poses=poses, intrinsics=Intrinsics.from_dict(d["intrinsics"]), kind=d["kind"])

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @staticmethod
    def load(path) -> "Trajectory":
        return Trajectory.from_dict(json.loads(Path(path).read_text()))


def static_trajectory(pose: CameraPose, frames: int, intrinsics: Intrinsics) -> Trajectory:
    if frames < 1:
        raise ValueError("frames must be >= 1")
    return Trajectory(poses=[pose] * frames, intrinsics=intrinsics, kind="static")


# ---------------------------------------------------------------------------
# Orbit ("spin") trajectories: closed oval path around the look-at point.
# ---------------------------------------------------------------------------

# Axis ratio of the oval orbit; the upper end is a config default, the path
# degrades to a circle when the distance range leaves no room for an oval.
SPIN_AXIS_RATIO_RANGE = (1.0, 1.3)


def spin_trajectory(seed: int, frames: int,
                    distance_range: tuple[float, float] = (0.25, 0.40),
                    max_elevation_deg: float = 5.0,
                    look_at=(0.0, 0.0, 0.0),
                    intrinsics: Intrinsics | None = None) -> Trajectory:
    """Closed oval orbit around `look_at`, always looking at it.

    Every camera-to-target distance lies in `distance_range` and the
    elevation stays within +-max_elevation_deg.  Deterministic per seed.
    """
    if frames < 1:
        raise ValueError("frames must be >= 1")
    dmin, dmax = distance_range
    if not (0.0 < dmin <= dmax):
        raise ValueError(f"invalid distance range ({dmin}, {dmax})")
    if intrinsics is None:
        intrinsics = default_intrinsics()

    rng = np.random.default_rng(seed)
    ratio_hi = min(SPIN_AXIS_RATIO_RANGE[1], dmax / dmin)
    ratio = rng.uniform(SPIN_AXIS_RATIO_RANGE[0], ratio_hi)
    r_major = rng.uniform(dmin * ratio, dmax)
    r_minor = r_major / ratio
    phase = rng.uniform(0.0, 2.0 * math.pi)
    orientation = rng.uniform(0.0, 2.0 * math.pi)
    direction = 1.0 if rng.random() < 0.5 else -1.0
    elev_amp = math.radians(rng.uniform(0.0, max_elevation_deg)) if max_elevation_deg > 0 else 0.0
    elev_lobes = int(rng.integers(1, 3))
    elev_phase = rng.uniform(0.0, 2.0 * math.pi)

    look_at = np.asarray(look_at, dtype=np.float64)
    poses = []
    for k in range(frames):
        psi = phase + direction * 2.0 * math.pi * k / frames
        a, b = r_major, r_minor
        rho = a * b / math.hypot(b * math.cos(psi - orientation), a * math.sin(psi - orientation))
        elev = elev_amp * math.sin(elev_lobes * (psi - phase) + elev_phase)
        center = spherical_to_center(psi, elev, rho, look_at)
        poses.append(look_at_pose(center, look_at))
    return Trajectory(poses=poses, intrinsics=intrinsics, kind="spin")


# ---------------------------------------------------------------------------
# Spiral trajectories: monotone-yaw sweep through random anchor locations.
# ---------------------------------------------------------------------------

def spiral_anchors(seed: int, n_seeds: int,
                   yaw_range_deg: tuple[float, float] = (-90.0, 90.0),
                   distance_range: tuple[float, float] = (0.25, 0.40),
                   look_at=(0.0, 0.0, 0.0),
                   max_elevation_deg: float = 20.0) -> np.ndarray:
    """Sample the (yaw, elevation, distance) anchor locations of a spiral sweep.

    Yaws are sorted so the sweep is monotone, with a seed-dependent direction.
    Returns an (n_seeds, 3) array of spherical coordinates (radians, meters).
    """
    lo, hi = yaw_range_deg
    if n_seeds < 2:
        raise ValueError("n_seeds must be >= 2")
    if not lo < hi:
        raise ValueError(f"invalid yaw range ({lo}, {hi})")
    rng = np.random.default_rng(seed)
    yaws = np.sort(np.radians(rng.uniform(lo, hi, size=n_seeds)))
    if rng.random() < 0.5:
        yaws = yaws[::-1]
    elevations = np.radians(rng.uniform(-max_elevation_deg, max_elevation_deg, size=n_seeds))
    distances = rng.uniform(distance_range[0], distance_range[1], size=n_seeds)
    return np.stack([yaws, elevations, distances], axis=1)


def spiral_position_curve(anchors_sph: np.ndarray, look_at=(0.0, 0.0, 0.0)):
    """Interpolating curve through spiral anchors.

    Returns (anchor_positions, fn) where fn maps curve parameters in
    [0, n_seeds-1] to 3D positions and fn(i) reproduces anchor i exactly.
    Interpolation is monotone piecewise-cubic per spherical channel, so yaw,
    elevation and distance never overshoot their anchor ranges.
    """
    anchors_sph = np.asarray(anchors_sph, dtype=np.float64)
    n = anchors_sph.shape[0]
    u = np.arange(n, dtype=np.float64)
    interps = [PchipInterpolator(u, anchors_sph[:, j]) for j in range(3)]
    look_at = np.asarray(look_at, dtype=np.float64)

    def fn(params):
        params = np.atleast_1d(np.asarray(params, dtype=np.float64))
        sph = np.stack([ip(params) for ip in interps], axis=1)
        return np.stack([spherical_to_center(y, e, d, look_at) for y, e, d in sph], axis=0)

    anchor_positions = fn(u)
    return anchor_positions, fn


def spiral_trajectory(seed: int, frames: int, n_seeds: int = 4,
                      yaw_range_deg: tuple[float, float] = (-90.0, 90.0),
                      distance_range: tuple[float, float] = (0.25, 0.40),
                      look_at=(0.0, 0.0, 0.0),
                      max_elevation_deg: float = 20.0,
                      intrinsics: Intrinsics | None = None) -> Trajectory:
    """Smooth sweep through n_seeds random anchors, resampled by arc length.

    Every frame's yaw relative to `look_at` lies inside yaw_range_deg and its
    distance inside distance_range.  Deterministic per seed.
    """
    if frames < 1:
        raise ValueError("frames must be >= 1")
    if intrinsics is None:
        intrinsics = default_intrinsics()
    anchors_sph = spiral_anchors(seed, n_seeds, yaw_range_deg, distance_range,
                                 look_at, max_elevation_deg)
    _, curve = spiral_position_curve(anchors_sph, look_at)

    # Arc-length reparametrization from a dense chordal approximation.
    dense = np.linspace(0.0, n_seeds - 1.0, max(64 * n_seeds, 16 * frames))
    pts = curve(dense)
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] == 0.0:
        params = np.zeros(frames)
    else:
        targets = np.linspace(0.0, s[-1], frames)
        params = np.interp(targets, s, dense)

    look_at = np.asarray(look_at, dtype=np.float64)
    poses = [look_at_pose(c, look_at) for c in curve(params)]
    return Trajectory(poses=poses, intrinsics=intrinsics, kind="spiral")


# ---------------------------------------------------------------------------
# Plucker ray maps
# ---------------------------------------------------------------------------

def plucker_ray_map(relative: CameraPose, intrinsics: Intrinsics,
                    out_h: int, out_w: int) -> np.ndarray:
    """Plucker ray map of a (relative) camera on an out_h x out_w grid.

    The grid covers the full image plane of `intrinsics` and is sampled at
    cell centers, so the map can be produced directly at latent resolution.
    Directions and moments are expressed in the reference frame that
    `relative` maps out of (moments taken about that frame's origin).
    Returns (out_h, out_w, 6) float64.
    """
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output grid must be at least 1x1, got {out_h}x{out_w}")
    sx = intrinsics.width / out_w
    sy = intrinsics.height / out_h
    u = (np.arange(out_w) + 0.5) * sx
    v = (np.arange(out_h) + 0.5) * sy
    uu, vv = np.meshgrid(u, v)
    d_cam = np.stack([(uu - intrinsics.cx) / intrinsics.fx,
                      (vv - intrinsics.cy) / intrinsics.fy,
                      np.ones_like(uu)], axis=-1)
    d_cam /= np.linalg.norm(d_cam, axis=-1, keepdims=True)
    # x_ref = R^T (x_cam - t): directions rotate by R^T, the center maps to -R^T t.
    d_ref = d_cam @ relative.rotation
    origin = -relative.rotation.T @ relative.translation
    m = np.cross(np.broadcast_to(origin, d_ref.shape), d_ref)
    return np.concatenate([d_ref, m], axis=-1)


def identity_ray_map(intrinsics: Intrinsics, out_h: int, out_w: int) -> np.ndarray:
    """Ray map of the identity camera (zero relative motion): moments vanish."""
    return plucker_ray_map(identity_pose(), intrinsics, out_h, out_w)


def validate_ray_map(ray_map: np.ndarray, tol: float = 1e-6) -> None:
    """Check unit directions and the Plucker incidence constraint <d, m> = 0."""
    ray_map = np.asarray(ray_map)
    if ray_map.shape[-1] != 6:
        raise ValueError(f"ray map must have 6 channels, got {ray_map.shape[-1]}")
    d, m = ray_map[..., :3], ray_map[..., 3:]
    norm_err = np.abs(np.linalg.norm(d, axis=-1) - 1.0).max()
    if norm_err > tol:
        raise ValueError(f"ray directions not unit length (max err {norm_err:.3e})")
    dot_err = np.abs((d * m).sum(axis=-1)).max()
    if dot_err > tol:
        raise ValueError(f"Plucker constraint violated (max |<d,m>| {dot_err:.3e})")


def ray_maps_for_trajectory(trajectory: Trajectory, out_h: int, out_w: int,
                            reference_index: int = 0,
                            frame_indices=None) -> np.ndarray:
    """Per-frame ray maps of a trajectory relative to one of its own frames.

    Returns (len(frame_indices), out_h, out_w, 6); all frames by default.
    """
    ref = trajectory.poses[reference_index]
    if frame_indices is None:
        frame_indices = range(len(trajectory.poses))
    maps = [plucker_ray_map(relative_pose(trajectory.poses[i], ref), trajectory.intrinsics,
                            out_h, out_w)
            for i in frame_indices]
    return np.stack(maps, axis=0)
