"""Intrinsic camera models: pinhole and equidistant fisheye.

Camera frame convention: z forward, x right, y down. Pixel (0, 0) is the
center of the top-left pixel, so integer coordinates land exactly on pixel
centers. A projection is valid only while the incoming ray stays within
``fov_limit`` of the optical axis and the image point lies inside
[0, width) x [0, height).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numpy.typing import NDArray

from .geometry import Pose

# Fixed-point distortion inversion: tolerance in pixels, iteration cap.
_INVERSION_TOL_PX = 1e-8
_INVERSION_MAX_ITER = 20

# Round-off guard for the half-open [0, size) bounds check: projections a few
# ulps below zero are genuine border pixels and are clamped, not rejected.
_EDGE_TOL_PX = 1e-6


class CameraModel(Enum):
    PINHOLE = "pinhole"
    EQUIDISTANT_FISHEYE = "equidistant_fisheye"


class DistortionInversionError(RuntimeError):
    """Fixed-point distortion inversion failed to converge."""


@dataclass(frozen=True)
class PixelCoord:
    """Continuous image coordinate with an explicit validity flag."""

    u: float
    v: float
    valid: bool = True


@dataclass(frozen=True)
class CameraIntrinsics:
    """Projection parameters for one lens.

    ``distortion`` holds four coefficients whose meaning depends on the
    model: radial-tangential (k1, k2, p1, p2) for PINHOLE, equidistant
    (k1, k2, k3, k4) for EQUIDISTANT_FISHEYE. ``fov_limit`` is the maximum
    angle in radians between a ray and the optical axis for which the
    projection is considered valid.
    """

    model: CameraModel
    width: int
    height: int
    fx: float
    fy: float
    cx: float
    cy: float
    distortion: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    fov_limit: float = field(default=np.pi / 2)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be at least 1x1")
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")
        if len(self.distortion) != 4:
            raise ValueError("distortion must have exactly 4 coefficients")
        if not 0 < self.fov_limit <= np.pi:
            raise ValueError("fov_limit must be in (0, pi]")
        if self.model is CameraModel.PINHOLE and self.fov_limit >= np.pi / 2:
            raise ValueError("pinhole fov_limit must be below pi/2")
        object.__setattr__(self, "distortion", tuple(float(k) for k in self.distortion))


@dataclass(frozen=True)
class Camera:
    """A named lens and its mounting pose (parent: rig reference frame)."""

    name: str
    intrinsics: CameraIntrinsics
    extrinsic: Pose


def _distort_radtan(x, y, dist):
    k1, k2, p1, p2 = dist
    r2 = x * x + y * y
    radial = 1.0 + k1 * r2 + k2 * r2 * r2
    xd = x * radial + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x)
    yd = y * radial + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y
    return xd, yd


def _equidistant_poly(theta, dist):
    k1, k2, k3, k4 = dist
    t2 = theta * theta
    return 1.0 + t2 * (k1 + t2 * (k2 + t2 * (k3 + t2 * k4)))


def project_points(
    intr: CameraIntrinsics,
    pts: NDArray,
    include_fov_boundary: bool = True,
) -> tuple[NDArray[np.float64], NDArray[np.bool_]]:
    """Project camera-frame points to pixel coordinates.

    Returns an (N, 2) array of (u, v) and an (N,) validity mask. Invalid
    entries (behind camera, outside fov_limit, or outside image bounds) keep
    finite placeholder coordinates but are masked False. Rays exactly on the
    FOV boundary count as valid unless ``include_fov_boundary`` is False.
    """
    pts = np.asarray(pts, dtype=np.float64)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    rho = np.hypot(x, y)
    theta = np.arctan2(rho, z)  # angle to optical axis, in [0, pi]
    if include_fov_boundary:
        valid = theta <= intr.fov_limit
    else:
        valid = theta < intr.fov_limit

    if intr.model is CameraModel.PINHOLE:
        valid &= z > 0
        safe_z = np.where(z > 0, z, 1.0)
        xd, yd = _distort_radtan(x / safe_z, y / safe_z, intr.distortion)
        u = intr.fx * xd + intr.cx
        v = intr.fy * yd + intr.cy
    else:
        d = theta * _equidistant_poly(theta, intr.distortion)
        # d/rho stands in for (cos, sin) of the azimuth; cheaper than trig.
        scale = d / np.where(rho > 0, rho, 1.0)
        u = intr.fx * x * scale + intr.cx
        v = intr.fy * y * scale + intr.cy

    valid &= (u > -_EDGE_TOL_PX) & (u < intr.width) & (v > -_EDGE_TOL_PX) & (v < intr.height)
    uv = np.stack(
        [
            np.where(valid, np.maximum(u, 0.0), 0.0),
            np.where(valid, np.maximum(v, 0.0), 0.0),
        ],
        axis=1,
    )
    if single:
        return uv[0], valid[0]
    return uv, valid


def project(intr: CameraIntrinsics, pt) -> PixelCoord:
    """Scalar wrapper around project_points."""
    uv, valid = project_points(intr, np.asarray(pt, dtype=np.float64).reshape(1, 3))
    return PixelCoord(float(uv[0, 0]), float(uv[0, 1]), bool(valid[0]))


def _unproject_pinhole(intr, mx, my):
    x, y = mx.copy(), my.copy()
    scale = max(intr.fx, intr.fy)
    for _ in range(_INVERSION_MAX_ITER):
        k1, k2, p1, p2 = intr.distortion
        r2 = x * x + y * y
        radial = 1.0 + k1 * r2 + k2 * r2 * r2
        dx = 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x)
        dy = p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y
        x_new = (mx - dx) / radial
        y_new = (my - dy) / radial
        step = np.maximum(np.abs(x_new - x), np.abs(y_new - y)) * scale
        x, y = x_new, y_new
        if float(step.max(initial=0.0)) < _INVERSION_TOL_PX:
            break
    xd, yd = _distort_radtan(x, y, intr.distortion)
    residual = np.hypot((xd - mx) * intr.fx, (yd - my) * intr.fy)
    norm = np.sqrt(x * x + y * y + 1.0)
    rays = np.stack([x / norm, y / norm, 1.0 / norm], axis=1)
    return rays, residual <= 1e-6


def _unproject_equidistant(intr, mx, my):
    d = np.hypot(mx, my)
    theta = d.copy()
    for _ in range(_INVERSION_MAX_ITER):
        poly = _equidistant_poly(theta, intr.distortion)
        theta_new = np.clip(d / poly, 0.0, np.pi)
        step = np.abs(theta_new - theta) * max(intr.fx, intr.fy)
        theta = theta_new
        if float(step.max(initial=0.0)) < _INVERSION_TOL_PX:
            break
    residual = np.abs(theta * _equidistant_poly(theta, intr.distortion) - d)
    residual *= max(intr.fx, intr.fy)
    scale = np.sin(theta) / np.where(d > 0, d, 1.0)
    rays = np.stack([mx * scale, my * scale, np.cos(theta)], axis=1)
    return rays, residual <= 1e-6


def unproject_points(
    intr: CameraIntrinsics, uv: NDArray
) -> tuple[NDArray[np.float64], NDArray[np.bool_]]:
    """Back-project pixel coordinates to unit rays in the camera frame.

    Distortion is inverted by fixed-point iteration. The returned mask marks
    rays whose forward projection reproduces the input within 1e-6 px; for
    fisheye pixels beyond the lens image circle the polynomial is
    extrapolated, which keeps synthetic rendering continuous across the rim.
    """
    uv = np.atleast_2d(np.asarray(uv, dtype=np.float64))
    mx = (uv[:, 0] - intr.cx) / intr.fx
    my = (uv[:, 1] - intr.cy) / intr.fy
    if intr.model is CameraModel.PINHOLE:
        return _unproject_pinhole(intr, mx, my)
    return _unproject_equidistant(intr, mx, my)


def unproject(intr: CameraIntrinsics, px: PixelCoord) -> NDArray[np.float64]:
    """Scalar unprojection; raises DistortionInversionError on non-convergence."""
    rays, ok = unproject_points(intr, np.array([[px.u, px.v]]))
    if not ok[0]:
        raise DistortionInversionError(
            f"distortion inversion did not converge at ({px.u}, {px.v}) "
            f"after {_INVERSION_MAX_ITER} iterations"
        )
    return rays[0]
