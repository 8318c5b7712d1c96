import math

import numpy as np
import pytest

from conftest import make_pinhole_camera
from omniview.camera_models import (
    CameraIntrinsics,
    CameraModel,
    DistortionInversionError,
    PixelCoord,
    project,
    project_points,
    unproject,
    unproject_points,
)


def pinhole(fx=100.0, cx=100.0, width=200, height=200, dist=(0, 0, 0, 0), fov_deg=80):
    return CameraIntrinsics(
        CameraModel.PINHOLE, width, height, fx, fx, cx, cx, dist, math.radians(fov_deg)
    )


def fisheye(fx=100.0, cx=200.0, width=400, height=400, dist=(0, 0, 0, 0), fov_deg=105):
    return CameraIntrinsics(
        CameraModel.EQUIDISTANT_FISHEYE, width, height, fx, fx, cx, cx, dist,
        math.radians(fov_deg),
    )


class TestProject:
    def test_pinhole_optical_axis(self):
        px = project(pinhole(), (0, 0, 1))
        assert px.valid
        assert (px.u, px.v) == (100.0, 100.0)

    def test_pinhole_behind_camera(self):
        assert not project(pinhole(), (0, 0, -1)).valid

    def test_equidistant_45_degrees(self):
        # theta = pi/4, azimuth 0: u = cx + fx * pi/4
        px = project(fisheye(), (1, 0, 1))
        assert px.valid
        assert abs(px.u - (200 + 100 * math.pi / 4)) < 1e-9
        assert abs(px.v - 200.0) < 1e-9

    def test_fisheye_sees_behind(self):
        intr = fisheye(fov_deg=105)
        px = project(intr, (1.0, 0.0, -0.1))  # ~96 deg off axis
        assert px.valid
        assert not project(intr, (1.0, 0.0, -1.0)).valid  # 135 deg

    def test_out_of_bounds_invalid(self):
        intr = pinhole(fx=100, cx=100, width=200, height=200, fov_deg=85)
        px = project(intr, (3, 0, 1))  # u would be 400
        assert not px.valid

    def test_never_valid_outside_bounds(self):
        rng = np.random.default_rng(0)
        pts = rng.normal(size=(5000, 3))
        for intr in (pinhole(dist=(-0.1, 0.02, 0.001, -0.002)), fisheye(dist=(-0.02, 0.004, -0.001, 0.0002))):
            uv, valid = project_points(intr, pts)
            assert np.all(uv[valid, 0] >= 0) and np.all(uv[valid, 0] < intr.width)
            assert np.all(uv[valid, 1] >= 0) and np.all(uv[valid, 1] < intr.height)

    def test_fov_boundary_flag(self):
        intr = fisheye(fov_deg=90)
        on_edge = np.array([[1.0, 0.0, 0.0]])  # exactly 90 deg
        _, inclusive = project_points(intr, on_edge, include_fov_boundary=True)
        _, exclusive = project_points(intr, on_edge, include_fov_boundary=False)
        assert inclusive[0] and not exclusive[0]


class TestUnproject:
    def test_principal_point_is_axis(self):
        for intr in (pinhole(), fisheye()):
            ray = unproject(intr, PixelCoord(intr.cx, intr.cy))
            np.testing.assert_allclose(ray, (0, 0, 1), atol=1e-12)

    def test_pinhole_closed_form(self):
        ray = unproject(pinhole(), PixelCoord(200, 100))
        np.testing.assert_allclose(ray, np.array([1, 0, 1]) / math.sqrt(2), atol=1e-9)

    def test_round_trip_rays(self):
        rng = np.random.default_rng(1)
        cases = [
            (pinhole(dist=(-0.1, 0.02, 0.001, -0.002)), math.radians(35)),
            (fisheye(dist=(-0.02, 0.004, -0.001, 0.0002)), math.radians(100)),
        ]
        for intr, theta_max in cases:
            theta = rng.uniform(0, theta_max, 1000)
            phi = rng.uniform(-np.pi, np.pi, 1000)
            rays = np.stack(
                [np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)],
                axis=1,
            )
            uv, valid = project_points(intr, rays)
            assert valid.mean() > 0.9
            back, ok = unproject_points(intr, uv[valid])
            assert ok.all()
            dots = np.clip(np.sum(back * rays[valid], axis=1), -1, 1)
            assert np.arccos(dots).max() < 1e-6

    def test_nonconvergence_raises(self):
        intr = pinhole(dist=(40.0, 0.0, 0.0, 0.0), fov_deg=85)
        with pytest.raises(DistortionInversionError):
            unproject(intr, PixelCoord(199.0, 199.0))


class TestMonotonicity:
    def test_zero_distortion_fisheye_radius_linear_in_theta(self):
        intr = fisheye()
        theta = np.linspace(1e-4, intr.fov_limit - 1e-4, 500)
        pts = np.stack([np.sin(theta), np.zeros_like(theta), np.cos(theta)], axis=1)
        uv, valid = project_points(intr, pts)
        radius = uv[:, 0] - intr.cx
        assert valid.all()
        assert np.all(np.diff(radius) > 0)
        np.testing.assert_allclose(radius, intr.fx * theta, rtol=1e-12)


class TestValidation:
    def test_negative_focal_rejected(self):
        with pytest.raises(ValueError, match="focal"):
            pinhole(fx=-5)

    def test_principal_point_inside_image(self):
        with pytest.raises(ValueError, match="principal point"):
            CameraIntrinsics(CameraModel.PINHOLE, 100, 100, 50, 50, 100, 50, (0, 0, 0, 0), 1.0)

    def test_pinhole_fov_limit_below_half_pi(self):
        with pytest.raises(ValueError, match="fov_limit"):
            pinhole(fov_deg=90)

    def test_distortion_arity(self):
        with pytest.raises(ValueError, match="distortion"):
            CameraIntrinsics(CameraModel.PINHOLE, 100, 100, 50, 50, 50, 50, (0, 0, 0), 1.0)

    def test_make_pinhole_helper(self):
        cam = make_pinhole_camera()
        assert cam.intrinsics.model is CameraModel.PINHOLE
