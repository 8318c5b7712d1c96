"""Rigid-body transforms between named frames.

Conventions used throughout the package:

- A Pose with parent frame A and child frame B maps coordinates of a point
  expressed in B to coordinates in A via ``p_A = R * p_B + t``.
- Rotations are unit quaternions (w, x, y, z), renormalized after every
  composition so repeated online pose updates cannot drift.
- Frames are plain string identifiers; composing poses across mismatched
  frames raises FrameChainError.
- Angles are radians everywhere in memory; configuration files use degrees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

Vec3 = NDArray[np.float64]  # shape (3,)
Quat = NDArray[np.float64]  # shape (4,), ordered (w, x, y, z)

_QUAT_NORM_TOL = 1e-9


class FrameChainError(ValueError):
    """Composition or transform was attempted across mismatched frames."""


def quat_normalize(q: Quat) -> Quat:
    q = np.asarray(q, dtype=np.float64)
    norm = float(np.linalg.norm(q))
    if norm < 1e-12:
        raise ValueError("quaternion norm is zero")
    return q / norm


def quat_multiply(a: Quat, b: Quat) -> Quat:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conjugate(q: Quat) -> Quat:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_to_matrix(q: Quat) -> NDArray[np.float64]:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_from_axis_angle(axis, angle: float) -> Quat:
    axis = np.asarray(axis, dtype=np.float64)
    norm = float(np.linalg.norm(axis))
    if norm < 1e-12:
        raise ValueError("rotation axis is zero")
    half = 0.5 * angle
    return np.concatenate(([math.cos(half)], math.sin(half) * axis / norm))


def quat_from_yaw_pitch_roll(yaw: float, pitch: float, roll: float) -> Quat:
    """View-steering rotation for a z-forward / x-right / y-down frame.

    Positive yaw turns the view right, positive pitch up, positive roll
    clockwise (about the view axis). Applied as yaw, then pitch, then roll.
    """
    qy = quat_from_axis_angle((0.0, 1.0, 0.0), yaw)
    qx = quat_from_axis_angle((1.0, 0.0, 0.0), pitch)
    qz = quat_from_axis_angle((0.0, 0.0, 1.0), roll)
    return quat_multiply(quat_multiply(qy, qx), qz)


def quat_rotate(q: Quat, pts: NDArray) -> NDArray:
    """Rotate one (3,) point or an (N, 3) batch by quaternion q."""
    rot = quat_to_matrix(q)
    pts = np.asarray(pts, dtype=np.float64)
    return pts @ rot.T


@dataclass(frozen=True)
class Pose:
    """SE(3) transform mapping child-frame coordinates into the parent frame."""

    rotation: Quat
    translation: Vec3
    parent_frame: str
    child_frame: str

    def __post_init__(self):
        q = quat_normalize(self.rotation)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(t)):
            raise ValueError("translation has non-finite components")
        q.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", q)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity(parent_frame: str, child_frame: str | None = None) -> Pose:
        child = parent_frame if child_frame is None else child_frame
        return Pose(np.array([1.0, 0.0, 0.0, 0.0]), np.zeros(3), parent_frame, child)

    @staticmethod
    def from_axis_angle(
        axis, angle: float, translation, parent_frame: str, child_frame: str
    ) -> Pose:
        return Pose(quat_from_axis_angle(axis, angle), translation, parent_frame, child_frame)

    def rotation_matrix(self) -> NDArray[np.float64]:
        return quat_to_matrix(self.rotation)

    def with_frames(self, parent_frame: str, child_frame: str) -> Pose:
        return Pose(self.rotation, self.translation, parent_frame, child_frame)


def compose(a: Pose, b: Pose) -> Pose:
    """Chain two poses: the result maps b's child frame into a's parent frame."""
    if a.child_frame != b.parent_frame:
        raise FrameChainError(
            f"cannot compose {a.parent_frame}<-{a.child_frame} "
            f"with {b.parent_frame}<-{b.child_frame}"
        )
    q = quat_normalize(quat_multiply(a.rotation, b.rotation))
    t = quat_rotate(a.rotation, b.translation) + a.translation
    return Pose(q, t, a.parent_frame, b.child_frame)


def invert(p: Pose) -> Pose:
    q_inv = quat_conjugate(p.rotation)
    t_inv = -quat_rotate(q_inv, p.translation)
    return Pose(quat_normalize(q_inv), t_inv, p.child_frame, p.parent_frame)


def transform_point(p: Pose, pt) -> Vec3:
    """Map a point expressed in p.child_frame into p.parent_frame."""
    pt = np.asarray(pt, dtype=np.float64).reshape(3)
    return quat_rotate(p.rotation, pt) + p.translation


def transform_points(p: Pose, pts: NDArray) -> NDArray[np.float64]:
    """Vectorized transform_point for an (N, 3) array."""
    pts = np.asarray(pts, dtype=np.float64)
    return pts @ p.rotation_matrix().T + p.translation


def rotation_angle(q: Quat) -> float:
    """Magnitude of the rotation encoded by q, in radians."""
    w = min(1.0, abs(float(q[0])))
    return 2.0 * math.acos(w)


def poses_close(a: Pose, b: Pose, angle_tol: float = _QUAT_NORM_TOL, trans_tol: float = _QUAT_NORM_TOL) -> bool:
    """True when the two poses differ by less than the given tolerances."""
    dq = quat_multiply(quat_conjugate(a.rotation), b.rotation)
    return (
        rotation_angle(quat_normalize(dq)) <= angle_tol
        and float(np.linalg.norm(a.translation - b.translation)) <= trans_tol
    )
