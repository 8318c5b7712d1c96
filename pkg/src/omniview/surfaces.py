"""Projection surfaces: the 3D shape sampled behind each virtual view.

Each surface maps an output pixel coordinate to a 3D point in the surface
frame P. The surface pose (parent: rig reference frame R, child: P) then
places those points in front of the cameras. Output pixel (u, v) covers the
unit square [u, u+1) x [v, v+1); grids are sampled at pixel centers
(u + 0.5, v + 0.5) to avoid a half-pixel bias against the source images.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from numpy.typing import NDArray

from .geometry import Pose


@dataclass(frozen=True)
class PerspectiveParams:
    """Plane at z = focal_length; horizontal_fov spans the image width."""

    focal_length: float
    horizontal_fov: float

    def __post_init__(self):
        if self.focal_length <= 0:
            raise ValueError("focal_length must be positive")
        if not 0 < self.horizontal_fov < np.pi:
            raise ValueError("horizontal_fov must be in (0, pi)")

    def pixel_size(self, width: int) -> float:
        return 2.0 * self.focal_length * np.tan(self.horizontal_fov / 2.0) / width


@dataclass(frozen=True)
class MercatorParams:
    """Cylinder of radius cylinder_radius covering 360 deg of azimuth.

    vertical_half_fov is the elevation angle subtended by the half-height of
    the cylinder, so the full vertical field of view is twice this value.
    """

    vertical_half_fov: float
    cylinder_radius: float

    def __post_init__(self):
        if not 0 < self.vertical_half_fov < np.pi / 2:
            raise ValueError("vertical_half_fov must be in (0, pi/2)")
        if self.cylinder_radius <= 0:
            raise ValueError("cylinder_radius must be positive")

    def cylinder_height(self) -> float:
        return 2.0 * self.cylinder_radius * np.tan(self.vertical_half_fov)


@dataclass(frozen=True)
class SphericalParams:
    """Sphere cap of angular size fov; radius is sphere_radius.

    The polar radius is normalized so the inscribed circle of the image
    reaches the full half-FOV; corners outside that circle are invalid.
    """

    fov: float
    sphere_radius: float

    def __post_init__(self):
        if not 0 < self.fov <= 2 * np.pi:
            raise ValueError("fov must be in (0, 2*pi]")
        if self.sphere_radius <= 0:
            raise ValueError("sphere_radius must be positive")


SurfaceParams = Union[PerspectiveParams, MercatorParams, SphericalParams]


@dataclass(frozen=True)
class ProjectionSpec:
    """Surface shape, output resolution, and surface pose T_R_P."""

    surface: SurfaceParams
    width: int
    height: int
    surface_pose: Pose

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("output resolution must be at least 1x1")

    def with_pose(self, pose: Pose) -> ProjectionSpec:
        return ProjectionSpec(self.surface, self.width, self.height, pose)

    def with_surface(self, surface: SurfaceParams) -> ProjectionSpec:
        return ProjectionSpec(surface, self.width, self.height, self.surface_pose)


def perspective_surface(spec: ProjectionSpec, u, v):
    """Plane sample points; always valid."""
    params = spec.surface
    m_p = params.pixel_size(spec.width)
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    x = (u - spec.width / 2.0) * m_p
    y = (v - spec.height / 2.0) * m_p
    z = np.full_like(x, params.focal_length)
    return np.stack([x, y, z], axis=-1)


def mercator_surface(spec: ProjectionSpec, u, v):
    """Cylinder sample points; azimuth spans the full 2*pi across the width."""
    params = spec.surface
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    alpha_p = 2.0 * np.pi / spec.width
    c_h = params.cylinder_height()
    azimuth = -u * alpha_p
    x = params.cylinder_radius * np.cos(azimuth)
    y = params.cylinder_radius * np.sin(azimuth)
    z = c_h * (0.5 - v / spec.height)
    return np.stack([x, y, np.broadcast_to(z, x.shape).copy()], axis=-1)


def spherical_surface(spec: ProjectionSpec, u, v):
    """Sphere sample points plus validity (corners beyond the inscribed circle)."""
    params = spec.surface
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    p_x = u / spec.width - 0.5
    p_y = 0.5 - v / spec.height
    r = 2.0 * np.sqrt(p_x * p_x + p_y * p_y)
    gamma = np.arctan2(p_y, p_x)
    theta = r * params.fov / 2.0
    sin_t = np.sin(theta)
    pts = np.stack(
        [
            params.sphere_radius * sin_t * np.cos(gamma),
            -params.sphere_radius * sin_t * np.sin(gamma),
            params.sphere_radius * np.cos(theta),
        ],
        axis=-1,
    )
    return pts, r <= 1.0


def surface_points(spec: ProjectionSpec, u, v):
    """Dispatch on the surface type; returns (points, valid)."""
    if isinstance(spec.surface, PerspectiveParams):
        pts = perspective_surface(spec, u, v)
        return pts, np.ones(pts.shape[:-1], dtype=bool)
    if isinstance(spec.surface, MercatorParams):
        pts = mercator_surface(spec, u, v)
        return pts, np.ones(pts.shape[:-1], dtype=bool)
    if isinstance(spec.surface, SphericalParams):
        return spherical_surface(spec, u, v)
    raise TypeError(f"unknown surface type: {type(spec.surface).__name__}")


def sample_surface(spec: ProjectionSpec) -> tuple[NDArray[np.float64], NDArray[np.bool_]]:
    """Sample the full output grid at pixel centers.

    Returns points with shape (height, width, 3) in frame P and a
    (height, width) validity mask, row-major.
    """
    u = np.arange(spec.width, dtype=np.float64) + 0.5
    v = np.arange(spec.height, dtype=np.float64) + 0.5
    uu, vv = np.meshgrid(u, v)
    return surface_points(spec, uu, vv)
