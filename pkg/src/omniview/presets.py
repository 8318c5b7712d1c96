"""Ready-made synthetic rigs, scenes, and view specs.

These presets are the package's desk-scale stand-ins for real hardware: a
compact omnidirectional camera modeled as two back-to-back 210 deg fisheye
lenses with a 2 cm baseline, plus checkered test environments that make
projection errors visible. Tests, the CLI demo fixtures, and the streaming
service's synthetic mode all build on them.
"""

from __future__ import annotations

import numpy as np

from .calibration import CameraRig, deg2rad
from .camera_models import Camera, CameraIntrinsics, CameraModel
from .colorizer import ExclusionVolume
from .geometry import Pose, quat_from_axis_angle, quat_multiply
from .oracle import (
    BoxPrimitive,
    CheckerTexture,
    PlanePrimitive,
    Scene,
    SolidTexture,
)
from .surfaces import MercatorParams, PerspectiveParams, ProjectionSpec, SphericalParams

REFERENCE_FRAME = "rig"

_HALF_PI = np.pi / 2


def insta360_like_rig(
    width: int = 640,
    height: int = 640,
    focal: float = 160.0,
    distortion: tuple[float, float, float, float] = (-0.02, 0.004, -0.001, 0.0002),
    with_lidar: bool = True,
) -> CameraRig:
    """Two 210 deg fisheyes mounted back to back, optical centers 2 cm apart.

    The reference frame is aligned with the front camera (z forward, x right,
    y down); the back camera is yawed 180 deg. The optional Lidar sits 10 cm
    above the camera body.
    """

    def intr():
        return CameraIntrinsics(
            model=CameraModel.EQUIDISTANT_FISHEYE,
            width=width,
            height=height,
            fx=focal,
            fy=focal,
            cx=(width - 1) / 2.0,
            cy=(height - 1) / 2.0,
            distortion=distortion,
            fov_limit=deg2rad(105.0),
        )

    front = Camera(
        name="cam_front",
        intrinsics=intr(),
        extrinsic=Pose(
            np.array([1.0, 0.0, 0.0, 0.0]), np.array([0.0, 0.0, 0.01]), REFERENCE_FRAME, "cam_front"
        ),
    )
    back = Camera(
        name="cam_back",
        intrinsics=intr(),
        extrinsic=Pose(
            quat_from_axis_angle((0.0, 1.0, 0.0), np.pi),
            np.array([0.0, 0.0, -0.01]),
            REFERENCE_FRAME,
            "cam_back",
        ),
    )
    lidar = (
        Pose(np.array([1.0, 0.0, 0.0, 0.0]), np.array([0.0, -0.1, 0.0]), REFERENCE_FRAME, "lidar")
        if with_lidar
        else None
    )
    return CameraRig(reference_frame=REFERENCE_FRAME, cameras=(front, back), lidar_extrinsic=lidar)


def _wall(center, normal_axis, flip, half_extents, texture) -> PlanePrimitive:
    """Axis-aligned rectangle whose +z normal points back toward the origin."""
    if normal_axis == "z":
        rot = (
            quat_from_axis_angle((0.0, 1.0, 0.0), np.pi)
            if flip
            else np.array([1.0, 0.0, 0.0, 0.0])
        )
    elif normal_axis == "x":
        rot = quat_from_axis_angle((0.0, 1.0, 0.0), -_HALF_PI if flip else _HALF_PI)
    else:
        rot = quat_from_axis_angle((1.0, 0.0, 0.0), _HALF_PI if flip else -_HALF_PI)
    pose = Pose(rot, np.asarray(center, dtype=np.float64), REFERENCE_FRAME, "wall")
    return PlanePrimitive(pose=pose, half_extents=half_extents, texture=texture)


def checker_room_scene(cell: float = 0.4) -> Scene:
    """A 5 x 3 x 5 m checkered room around the origin.

    Each surface gets its own color pair so a projection that samples the
    wrong wall is immediately visible. The room lives in the rig frame:
    x right, y down (floor at y = +1.5), z forward.
    """
    white = (245, 245, 245)
    walls = [
        _wall((0, 0, 2.5), "z", True, (2.5, 1.5), CheckerTexture((180, 30, 30), white, cell)),
        _wall((0, 0, -2.5), "z", False, (2.5, 1.5), CheckerTexture((30, 30, 180), white, cell)),
        _wall((2.5, 0, 0), "x", True, (2.5, 1.5), CheckerTexture((220, 120, 20), white, cell)),
        _wall((-2.5, 0, 0), "x", False, (2.5, 1.5), CheckerTexture((30, 150, 30), white, cell)),
        _wall((0, 1.5, 0), "y", True, (2.5, 2.5), CheckerTexture((20, 20, 20), white, cell)),
        _wall((0, -1.5, 0), "y", False, (2.5, 2.5), CheckerTexture((110, 110, 110), (70, 70, 70), cell)),
    ]
    return Scene(primitives=tuple(walls))


def ground_checker_scene(
    height_below: float = 1.2, cell: float = 0.25, half_extent: float = 4.0
) -> Scene:
    """A black/white checkered floor ``height_below`` meters under the rig.

    The pattern is phase-shifted by half a cell so that no checker boundary
    passes directly beneath the rig, where the two lenses hand over.
    """
    floor = _wall(
        (cell / 2, height_below, cell / 2),
        "y",
        True,
        (half_extent, half_extent),
        CheckerTexture((0, 0, 0), (255, 255, 255), cell),
    )
    # A far backdrop so upward rays still hit something.
    sky = BoxPrimitive(
        pose=Pose(np.array([1.0, 0.0, 0.0, 0.0]), np.zeros(3), REFERENCE_FRAME, "backdrop"),
        half_extents=(30.0, 30.0, 30.0),
        texture=SolidTexture((200, 220, 240)),
    )
    return Scene(primitives=(floor, sky))


def forward_view_spec(
    width: int = 1024, height: int = 512, hfov_deg: float = 130.0, focal: float = 1.0
) -> ProjectionSpec:
    """The operator's forward driving view: wide perspective, rig-aligned."""
    return ProjectionSpec(
        surface=PerspectiveParams(focal_length=focal, horizontal_fov=deg2rad(hfov_deg)),
        width=width,
        height=height,
        surface_pose=Pose.identity(REFERENCE_FRAME, "view_forward"),
    )


def mercator_panorama_spec(
    width: int = 1024, height: int = 512, vertical_half_fov_deg: float = 45.0, radius: float = 2.0
) -> ProjectionSpec:
    """Full 360 deg panorama; cylinder axis up, azimuth 0 straight ahead."""
    rot = quat_multiply(
        quat_from_axis_angle((0.0, 1.0, 0.0), -_HALF_PI),
        quat_from_axis_angle((1.0, 0.0, 0.0), _HALF_PI),
    )
    return ProjectionSpec(
        surface=MercatorParams(
            vertical_half_fov=deg2rad(vertical_half_fov_deg), cylinder_radius=radius
        ),
        width=width,
        height=height,
        surface_pose=Pose(rot, np.zeros(3), REFERENCE_FRAME, "view_panorama"),
    )


def spherical_view_spec(
    size: int = 512, fov_deg: float = 180.0, radius: float = 1.0
) -> ProjectionSpec:
    """Forward hemisphere rendered as an ideal (linear) fisheye."""
    return ProjectionSpec(
        surface=SphericalParams(fov=deg2rad(fov_deg), sphere_radius=radius),
        width=size,
        height=size,
        surface_pose=Pose.identity(REFERENCE_FRAME, "view_sphere"),
    )


def birdseye_spec(
    size: int = 512, ground_distance: float = 1.2, hfov_deg: float = 90.0
) -> ProjectionSpec:
    """Top-down view whose projection surface lies exactly on the ground.

    The virtual camera looks along +y (down); the image's up direction is
    the rig's forward axis. With focal_length equal to the ground distance
    the sampled plane coincides with the floor, which is what makes the
    ground metrically undistorted.
    """
    rot = quat_from_axis_angle((1.0, 0.0, 0.0), -_HALF_PI)
    return ProjectionSpec(
        surface=PerspectiveParams(focal_length=ground_distance, horizontal_fov=deg2rad(hfov_deg)),
        width=size,
        height=size,
        surface_pose=Pose(rot, np.zeros(3), REFERENCE_FRAME, "view_birdseye"),
    )


def robot_body_volumes() -> list[ExclusionVolume]:
    """A single box straddling the space below the camera body."""
    return [
        ExclusionVolume(
            pose=Pose(
                np.array([1.0, 0.0, 0.0, 0.0]),
                np.array([0.0, 0.45, 0.0]),
                REFERENCE_FRAME,
                "body",
            ),
            half_extents=(0.3, 0.25, 0.5),
        )
    ]
