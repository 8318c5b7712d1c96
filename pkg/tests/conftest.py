import math

import numpy as np
import pytest

from omniview import presets
from omniview.calibration import CameraRig
from omniview.camera_models import Camera, CameraIntrinsics, CameraModel
from omniview.geometry import Pose
from omniview.oracle import render_rig


@pytest.fixture(scope="session")
def insta_rig():
    return presets.insta360_like_rig()


@pytest.fixture(scope="session")
def room_scene():
    return presets.checker_room_scene()


@pytest.fixture(scope="session")
def room_frames(insta_rig, room_scene):
    return render_rig(room_scene, insta_rig)


@pytest.fixture(scope="session")
def small_rig():
    # Chip-sized variant of the two-fisheye rig for service/CLI round trips.
    return presets.insta360_like_rig(width=160, height=160, focal=40.0)


@pytest.fixture(scope="session")
def small_frames(small_rig, room_scene):
    return render_rig(room_scene, small_rig)


def make_pinhole_camera(
    name="pin",
    width=320,
    height=240,
    focal=200.0,
    distortion=(0.0, 0.0, 0.0, 0.0),
    fov_limit_deg=80.0,
    pose=None,
    reference="rig",
):
    intr = CameraIntrinsics(
        model=CameraModel.PINHOLE,
        width=width,
        height=height,
        fx=focal,
        fy=focal,
        cx=(width - 1) / 2.0,
        cy=(height - 1) / 2.0,
        distortion=distortion,
        fov_limit=math.radians(fov_limit_deg),
    )
    if pose is None:
        pose = Pose.identity(reference, name)
    return Camera(name=name, intrinsics=intr, extrinsic=pose)


@pytest.fixture()
def pinhole_rig():
    return CameraRig("rig", (make_pinhole_camera(),))


def identity_spec_for(camera):
    """Perspective spec that reproduces the given pinhole camera exactly."""
    from omniview.surfaces import PerspectiveParams, ProjectionSpec

    intr = camera.intrinsics
    hfov = 2.0 * math.atan(intr.width / (2.0 * intr.fx))
    return ProjectionSpec(
        surface=PerspectiveParams(focal_length=1.0, horizontal_fov=hfov),
        width=intr.width,
        height=intr.height,
        surface_pose=camera.extrinsic.with_frames(camera.extrinsic.parent_frame, "view"),
    )


def random_unit_vectors(rng, n):
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)
