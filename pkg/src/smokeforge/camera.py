"""Camera pose algebra: convention conversion, pivot offsets for generated
views, the relative-rotation-angle metric, synthetic orbit trajectories and
the timestep perturbation pairing.

Poses are camera-to-world (R, t), tagged with the axis convention they live
in: "source" (as estimated by the pose network) or "splat" (as consumed by
the splatting/rendering stack, which looks along -Z). The two differ by
negating the y and z axes.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

CONVENTION_SOURCE = "source"
CONVENTION_SPLAT = "splat"
_CONVENTIONS = (CONVENTION_SOURCE, CONVENTION_SPLAT)
_AXIS_FLIP = np.diag([1.0, -1.0, -1.0])

MULTIVIEW_YAW_OFFSETS_DEG = (-10.0, 10.0, 20.0, 30.0)


class PoseError(ValueError):
    pass


@dataclass
class CameraPose:
    rotation: np.ndarray
    translation: np.ndarray
    convention: str = CONVENTION_SPLAT

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        self.translation = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if self.convention not in _CONVENTIONS:
            raise PoseError(f"unknown convention tag {self.convention!r}")
        if np.abs(self.rotation @ self.rotation.T - np.eye(3)).max() > 1e-9:
            raise PoseError("rotation is not orthonormal")
        if abs(np.linalg.det(self.rotation) - 1.0) > 1e-9:
            raise PoseError("rotation determinant must be +1")

    @classmethod
    def identity(cls, convention=CONVENTION_SPLAT):
        return cls(np.eye(3), np.zeros(3), convention)

    def to_dict(self):
        return {"R": [float(x) for x in self.rotation.ravel()],
                "t": [float(x) for x in self.translation],
                "convention": self.convention}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["R"], dtype=np.float64).reshape(3, 3),
                   np.array(d["t"], dtype=np.float64), d["convention"])


@dataclass
class Intrinsics:
    focal: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.focal <= 0:
            raise PoseError("focal length must be positive")
        if not (0 <= self.cx <= self.width and 0 <= self.cy <= self.height):
            raise PoseError("principal point must lie inside the image")


@dataclass
class TrajectorySpec:
    pitch_deg: float = 10.0
    azimuth_start_deg: float = -105.0
    azimuth_end_deg: float = -45.0
    frame_count: int = 270
    radius: float = 5.0
    target: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.frame_count < 2:
            raise PoseError("trajectory needs at least 2 frames")
        if self.radius <= 0:
            raise PoseError("orbit radius must be positive")


def convert_convention(pose):
    """Flip the y and z axes (left-multiply by diag(1,-1,-1,1)) and toggle
    the convention tag. Involutive: converting twice returns the pose."""
    return CameraPose(_AXIS_FLIP @ pose.rotation,
                      _AXIS_FLIP @ pose.translation,
                      CONVENTION_SPLAT if pose.convention == CONVENTION_SOURCE
                      else CONVENTION_SOURCE)


def relative_rotation_angle(a, b):
    """Geodesic angle between two camera rotations:
    arccos((tr(R_b^T R_a) - 1) / 2), in [0, pi]."""
    if a.convention != b.convention:
        raise PoseError(f"poses use different conventions "
                        f"({a.convention!r} vs {b.convention!r})")
    tr = float(np.trace(b.rotation.T @ a.rotation))
    return math.acos(min(1.0, max(-1.0, (tr - 1.0) / 2.0)))


def rotation_y(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rotation_x(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def offset_pose_about_pivot(base, yaw, pitch, pivot):
    """World-space rotation dR = R_y(yaw) R_x(pitch) about the pivot:
    R = dR R0, t = dR (t0 - c) + c. Angles in radians. Preserves the
    camera's distance to the pivot."""
    c = np.asarray(pivot, dtype=np.float64).reshape(3)
    dR = rotation_y(yaw) @ rotation_x(pitch)
    return CameraPose(dR @ base.rotation,
                      dR @ (base.translation - c) + c,
                      base.convention)


def multiview_pose_set(base, pivot):
    """The four generated-view poses: yaw offsets of -10, 10, 20 and 30
    degrees about the pivot, zero pitch."""
    return [offset_pose_about_pivot(base, math.radians(d), 0.0, pivot)
            for d in MULTIVIEW_YAW_OFFSETS_DEG]


def trajectory_azimuth(spec, t):
    """Azimuth swept linearly from start to end over t in [0, frame_count]."""
    if not 0 <= t <= spec.frame_count:
        raise PoseError(f"t={t} outside [0, {spec.frame_count}]")
    frac = t / spec.frame_count
    return spec.azimuth_start_deg + (spec.azimuth_end_deg - spec.azimuth_start_deg) * frac


def _look_at(position, target, up=(0.0, 1.0, 0.0)):
    # camera-to-world basis with the view direction along -Z
    z = position - np.asarray(target, dtype=np.float64)
    z = z / np.linalg.norm(z)
    x = np.cross(np.asarray(up, dtype=np.float64), z)
    x = x / np.linalg.norm(x)
    y = np.cross(z, x)
    return np.stack([x, y, z], axis=1)


def synthetic_trajectory(spec, t):
    """Orbit pose at frame t: fixed pitch, linear azimuth sweep, camera at
    the orbit radius looking at the target."""
    az = math.radians(trajectory_azimuth(spec, t))
    pitch = math.radians(spec.pitch_deg)
    target = np.asarray(spec.target, dtype=np.float64)
    offset = rotation_y(az) @ rotation_x(-pitch) @ np.array([0.0, 0.0, spec.radius])
    position = target + offset
    return CameraPose(_look_at(position, target), position, CONVENTION_SPLAT)


def perturbation_pair(t, delta, length):
    """Index of the pose paired with timestep t when the camera is shifted
    forward by delta along the trajectory: (t + delta) mod length."""
    if length <= 0:
        raise ValueError("sequence length must be positive")
    if not 0 <= t < length:
        raise ValueError(f"t={t} outside [0, {length})")
    if delta < 0:
        raise ValueError("delta must be non-negative")
    return (t + delta) % length


def perturbation_delta(progress):
    """Pose-shift schedule over training progress in [0,1]: starts at 2 and
    grows to 4 halfway through."""
    return 2 if progress < 0.5 else 4


def save_poses(path, poses):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([p.to_dict() for p in poses], fh, indent=1)


def load_poses(path):
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return [CameraPose.from_dict(d) for d in data]
