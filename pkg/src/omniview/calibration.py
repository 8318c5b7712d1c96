"""Loading, validation, and canonical serialization of rig and view configs.

File format is versioned JSON ("omniview/1"). Angles are degrees in files
and radians in memory; lengths are meters. Calibration estimation is out of
scope: these loaders only consume results.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .camera_models import Camera, CameraIntrinsics, CameraModel
from .geometry import Pose
from .surfaces import (
    MercatorParams,
    PerspectiveParams,
    ProjectionSpec,
    SphericalParams,
)

RIG_SCHEMA = "omniview/1"

_DEG = 180.0 / np.pi


def deg2rad(deg: float) -> float:
    return float(deg) / _DEG


def rad2deg(rad: float) -> float:
    return float(rad) * _DEG


class CalibrationError(ValueError):
    """A config file failed schema or invariant validation.

    The message starts with the JSON field path of the offending value.
    """


def _require(d: dict, key: str, path: str):
    if key not in d:
        raise CalibrationError(f"{path}.{key}: missing required field")
    return d[key]


def _number(d: dict, key: str, path: str) -> float:
    value = _require(d, key, path)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise CalibrationError(f"{path}.{key}: expected a number, got {type(value).__name__}")
    return float(value)


def _integer(d: dict, key: str, path: str) -> int:
    value = _require(d, key, path)
    if isinstance(value, bool) or not isinstance(value, int):
        raise CalibrationError(f"{path}.{key}: expected an integer, got {type(value).__name__}")
    return value


def _string(d: dict, key: str, path: str) -> str:
    value = _require(d, key, path)
    if not isinstance(value, str):
        raise CalibrationError(f"{path}.{key}: expected a string, got {type(value).__name__}")
    return value


def _vector(d: dict, key: str, arity: int, path: str) -> list[float]:
    value = _require(d, key, path)
    if not isinstance(value, list) or len(value) != arity:
        raise CalibrationError(f"{path}.{key}: expected a list of {arity} numbers")
    out = []
    for i, item in enumerate(value):
        if isinstance(item, bool) or not isinstance(item, (int, float)):
            raise CalibrationError(f"{path}.{key}[{i}]: expected a number")
        out.append(float(item))
    return out


def pose_from_dict(d, path: str) -> Pose:
    if not isinstance(d, dict):
        raise CalibrationError(f"{path}: expected a pose object")
    parent = _string(d, "parent", path)
    child = _string(d, "child", path)
    translation = _vector(d, "translation", 3, path)
    quat = _vector(d, "rotation_quaternion_wxyz", 4, path)
    norm = float(np.linalg.norm(quat))
    if abs(norm - 1.0) > 1e-6:
        raise CalibrationError(
            f"{path}.rotation_quaternion_wxyz: norm {norm:.8f} deviates from 1 by more than 1e-6"
        )
    if not all(np.isfinite(translation)):
        raise CalibrationError(f"{path}.translation: components must be finite")
    return Pose(np.asarray(quat), np.asarray(translation), parent, child)


def pose_to_dict(p: Pose) -> dict:
    return {
        "parent": p.parent_frame,
        "child": p.child_frame,
        "translation": [float(x) for x in p.translation],
        "rotation_quaternion_wxyz": [float(x) for x in p.rotation],
    }


@dataclass(frozen=True)
class CameraRig:
    """Ordered calibrated cameras sharing one reference frame, plus an
    optional Lidar extrinsic."""

    reference_frame: str
    cameras: tuple[Camera, ...]
    lidar_extrinsic: Pose | None = None

    def __post_init__(self):
        object.__setattr__(self, "cameras", tuple(self.cameras))
        if len(self.cameras) == 0:
            raise ValueError("rig must contain at least one camera")
        names = [cam.name for cam in self.cameras]
        if len(set(names)) != len(names):
            raise ValueError("camera names must be unique")
        for cam in self.cameras:
            if cam.extrinsic.parent_frame != self.reference_frame:
                raise ValueError(
                    f"camera '{cam.name}' extrinsic parent is "
                    f"'{cam.extrinsic.parent_frame}', expected '{self.reference_frame}'"
                )
        if (
            self.lidar_extrinsic is not None
            and self.lidar_extrinsic.parent_frame != self.reference_frame
        ):
            raise ValueError("lidar extrinsic parent must be the rig reference frame")

    def camera_names(self) -> list[str]:
        return [cam.name for cam in self.cameras]

    def fingerprint(self) -> bytes:
        return _digest(rig_to_dict(self))


def _camera_from_dict(d, reference_frame: str, path: str) -> Camera:
    if not isinstance(d, dict):
        raise CalibrationError(f"{path}: expected a camera object")
    name = _string(d, "name", path)
    model_str = _string(d, "model", path)
    try:
        model = CameraModel(model_str)
    except ValueError:
        raise CalibrationError(
            f"{path}.model: unknown model '{model_str}' "
            f"(expected one of {[m.value for m in CameraModel]})"
        ) from None
    width = _integer(d, "width", path)
    height = _integer(d, "height", path)
    fx = _number(d, "fx", path)
    fy = _number(d, "fy", path)
    cx = _number(d, "cx", path)
    cy = _number(d, "cy", path)
    distortion = _vector(d, "distortion", 4, path)
    fov_limit = deg2rad(_number(d, "fov_limit_deg", path))
    try:
        intrinsics = CameraIntrinsics(
            model=model,
            width=width,
            height=height,
            fx=fx,
            fy=fy,
            cx=cx,
            cy=cy,
            distortion=tuple(distortion),
            fov_limit=fov_limit,
        )
    except ValueError as exc:
        raise CalibrationError(f"{path}: {exc}") from None
    extrinsic = pose_from_dict(_require(d, "extrinsic", path), f"{path}.extrinsic")
    if extrinsic.parent_frame != reference_frame:
        raise CalibrationError(
            f"{path}.extrinsic.parent: '{extrinsic.parent_frame}' does not match "
            f"rig reference frame '{reference_frame}'"
        )
    return Camera(name=name, intrinsics=intrinsics, extrinsic=extrinsic)


def rig_from_dict(d: dict) -> CameraRig:
    if not isinstance(d, dict):
        raise CalibrationError("rig: expected a JSON object")
    schema = _string(d, "schema", "rig")
    if schema != RIG_SCHEMA:
        raise CalibrationError(f"rig.schema: unsupported schema '{schema}', expected '{RIG_SCHEMA}'")
    reference_frame = _string(d, "reference_frame", "rig")
    cameras_raw = _require(d, "cameras", "rig")
    if not isinstance(cameras_raw, list) or len(cameras_raw) == 0:
        raise CalibrationError("rig.cameras: expected a non-empty list")
    cameras = [
        _camera_from_dict(cam, reference_frame, f"rig.cameras[{i}]")
        for i, cam in enumerate(cameras_raw)
    ]
    names = [cam.name for cam in cameras]
    for i, name in enumerate(names):
        if names.index(name) != i:
            raise CalibrationError(f"rig.cameras[{i}].name: duplicate camera name '{name}'")
    lidar_raw = d.get("lidar_extrinsic")
    lidar = None if lidar_raw is None else pose_from_dict(lidar_raw, "rig.lidar_extrinsic")
    try:
        return CameraRig(reference_frame, tuple(cameras), lidar)
    except ValueError as exc:
        raise CalibrationError(f"rig: {exc}") from None


def camera_to_dict(cam: Camera) -> dict:
    intr = cam.intrinsics
    return {
        "name": cam.name,
        "model": intr.model.value,
        "width": intr.width,
        "height": intr.height,
        "fx": intr.fx,
        "fy": intr.fy,
        "cx": intr.cx,
        "cy": intr.cy,
        "distortion": list(intr.distortion),
        "fov_limit_deg": rad2deg(intr.fov_limit),
        "extrinsic": pose_to_dict(cam.extrinsic),
    }


def rig_to_dict(rig: CameraRig) -> dict:
    return {
        "schema": RIG_SCHEMA,
        "reference_frame": rig.reference_frame,
        "cameras": [camera_to_dict(cam) for cam in rig.cameras],
        "lidar_extrinsic": None
        if rig.lidar_extrinsic is None
        else pose_to_dict(rig.lidar_extrinsic),
    }


def load_rig(path) -> CameraRig:
    return rig_from_dict(_read_json(path))


def save_rig(rig: CameraRig, path) -> None:
    _write_json(rig_to_dict(rig), path)


def spec_from_dict(d: dict) -> ProjectionSpec:
    if not isinstance(d, dict):
        raise CalibrationError("spec: expected a JSON object")
    kind = _string(d, "type", "spec")
    width = _integer(d, "width", "spec")
    height = _integer(d, "height", "spec")
    pose = pose_from_dict(_require(d, "pose", "spec"), "spec.pose")
    try:
        if kind == "perspective":
            surface = PerspectiveParams(
                focal_length=_number(d, "focal_length_m", "spec"),
                horizontal_fov=deg2rad(_number(d, "hfov_deg", "spec")),
            )
        elif kind == "mercator":
            surface = MercatorParams(
                vertical_half_fov=deg2rad(_number(d, "vertical_half_fov_deg", "spec")),
                cylinder_radius=_number(d, "cylinder_radius_m", "spec"),
            )
        elif kind == "spherical":
            surface = SphericalParams(
                fov=deg2rad(_number(d, "fov_deg", "spec")),
                sphere_radius=_number(d, "sphere_radius_m", "spec"),
            )
        else:
            raise CalibrationError(
                f"spec.type: unknown projection type '{kind}' "
                "(expected perspective, mercator, or spherical)"
            )
        return ProjectionSpec(surface=surface, width=width, height=height, surface_pose=pose)
    except CalibrationError:
        raise
    except ValueError as exc:
        raise CalibrationError(f"spec: {exc}") from None


def spec_to_dict(spec: ProjectionSpec) -> dict:
    base = {"width": spec.width, "height": spec.height, "pose": pose_to_dict(spec.surface_pose)}
    s = spec.surface
    if isinstance(s, PerspectiveParams):
        return {
            "type": "perspective",
            **base,
            "focal_length_m": s.focal_length,
            "hfov_deg": rad2deg(s.horizontal_fov),
        }
    if isinstance(s, MercatorParams):
        return {
            "type": "mercator",
            **base,
            "vertical_half_fov_deg": rad2deg(s.vertical_half_fov),
            "cylinder_radius_m": s.cylinder_radius,
        }
    return {
        "type": "spherical",
        **base,
        "fov_deg": rad2deg(s.fov),
        "sphere_radius_m": s.sphere_radius,
    }


def load_projection_spec(path) -> ProjectionSpec:
    return spec_from_dict(_read_json(path))


def save_projection_spec(spec: ProjectionSpec, path) -> None:
    _write_json(spec_to_dict(spec), path)


def spec_fingerprint(spec: ProjectionSpec) -> bytes:
    return _digest(spec_to_dict(spec))


def _digest(d: dict) -> bytes:
    canonical = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).digest()[:8]


def _read_json(path) -> dict:
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CalibrationError(f"{path}: not valid JSON ({exc})") from None


def _write_json(d: dict, path) -> None:
    Path(path).write_text(json.dumps(d, indent=2) + "\n")
