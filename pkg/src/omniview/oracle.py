"""Independent ground truth: ray-cast rendering of parametric scenes.

This module exists to verify the projection pipeline, so it deliberately
shares no code with the mapper or the surface sampling module: reference
rays are generated from its own formulas and scene colors come from direct
ray-primitive intersection. Only the camera unprojection (never projection)
and pose algebra are reused. Pixels that hit no geometry get a magenta
sentinel so "no scene" is distinguishable from a black fill.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .calibration import CalibrationError, CameraRig, _number, _vector, pose_from_dict, pose_to_dict
from .camera_models import Camera, unproject_points
from .frames import ImageFrame
from .geometry import Pose, invert, quat_rotate, transform_points

BACKGROUND = (255, 0, 255)  # magenta sentinel

_T_MIN = 1e-9


@dataclass(frozen=True)
class SolidTexture:
    color: tuple[int, int, int]


@dataclass(frozen=True)
class CheckerTexture:
    color_a: tuple[int, int, int]
    color_b: tuple[int, int, int]
    cell_size: float

    def __post_init__(self):
        if self.cell_size <= 0:
            raise ValueError("checker cell_size must be positive")


Texture = Union[SolidTexture, CheckerTexture]


@dataclass(frozen=True)
class PlanePrimitive:
    """Rectangle in the z=0 plane of its own frame, normal +z."""

    pose: Pose
    half_extents: tuple[float, float]
    texture: Texture

    def __post_init__(self):
        if len(self.half_extents) != 2 or any(h <= 0 for h in self.half_extents):
            raise ValueError("plane half_extents must be 2 positive numbers")


@dataclass(frozen=True)
class SpherePrimitive:
    pose: Pose
    radius: float
    texture: Texture

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("sphere radius must be positive")


@dataclass(frozen=True)
class BoxPrimitive:
    pose: Pose
    half_extents: tuple[float, float, float]
    texture: Texture

    def __post_init__(self):
        if len(self.half_extents) != 3 or any(h <= 0 for h in self.half_extents):
            raise ValueError("box half_extents must be 3 positive numbers")


Primitive = Union[PlanePrimitive, SpherePrimitive, BoxPrimitive]


@dataclass(frozen=True)
class Scene:
    primitives: tuple[Primitive, ...]

    def __post_init__(self):
        object.__setattr__(self, "primitives", tuple(self.primitives))
        if len(self.primitives) == 0:
            raise ValueError("scene must contain at least one primitive")


def _texture_colors(texture: Texture, local_pts: np.ndarray) -> np.ndarray:
    if isinstance(texture, SolidTexture):
        return np.broadcast_to(
            np.asarray(texture.color, dtype=np.uint8), (local_pts.shape[0], 3)
        ).copy()
    cells = np.floor(local_pts / texture.cell_size).sum(axis=1).astype(np.int64)
    a = np.asarray(texture.color_a, dtype=np.uint8)
    b = np.asarray(texture.color_b, dtype=np.uint8)
    return np.where((cells % 2 == 0)[:, None], a, b)


def _intersect_local(prim: Primitive, o: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Hit parameter per ray in the primitive's frame, inf where missed."""
    n = o.shape[0]
    t = np.full(n, np.inf)
    if isinstance(prim, PlanePrimitive):
        dz = d[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            t_hit = -o[:, 2] / dz
        x = o[:, 0] + t_hit * d[:, 0]
        y = o[:, 1] + t_hit * d[:, 1]
        ok = (
            (np.abs(dz) > 1e-15)
            & (t_hit > _T_MIN)
            & (np.abs(x) <= prim.half_extents[0])
            & (np.abs(y) <= prim.half_extents[1])
        )
        t[ok] = t_hit[ok]
    elif isinstance(prim, SpherePrimitive):
        b = np.sum(o * d, axis=1)
        c = np.sum(o * o, axis=1) - prim.radius**2
        disc = b * b - c
        ok = disc >= 0
        root = np.sqrt(np.where(ok, disc, 0.0))
        t_near = -b - root
        t_far = -b + root
        t_hit = np.where(t_near > _T_MIN, t_near, t_far)
        ok &= t_hit > _T_MIN
        t[ok] = t_hit[ok]
    else:
        t_lo = np.full(n, -np.inf)
        t_hi = np.full(n, np.inf)
        inside_ok = np.ones(n, dtype=bool)
        for axis in range(3):
            h = prim.half_extents[axis]
            da, oa = d[:, axis], o[:, axis]
            parallel = np.abs(da) < 1e-15
            with np.errstate(divide="ignore", invalid="ignore"):
                t1 = (-h - oa) / da
                t2 = (h - oa) / da
            t_lo = np.where(parallel, t_lo, np.maximum(t_lo, np.minimum(t1, t2)))
            t_hi = np.where(parallel, t_hi, np.minimum(t_hi, np.maximum(t1, t2)))
            inside_ok &= ~parallel | (np.abs(oa) <= h)
        t_hit = np.where(t_lo > _T_MIN, t_lo, t_hi)
        ok = inside_ok & (t_lo <= t_hi) & (t_hit > _T_MIN)
        t[ok] = t_hit[ok]
    return t


def cast_rays(
    scene: Scene,
    origins: np.ndarray,
    dirs: np.ndarray,
    background: tuple[int, int, int] = BACKGROUND,
) -> np.ndarray:
    """Shade the nearest primitive hit of each ray; returns (N, 3) uint8."""
    origins = np.asarray(origins, dtype=np.float64)
    dirs = np.asarray(dirs, dtype=np.float64)
    norms = np.linalg.norm(dirs, axis=1, keepdims=True)
    dirs = dirs / np.where(norms > 0, norms, 1.0)
    n = origins.shape[0]

    local_o, local_d, all_t = [], [], []
    for prim in scene.primitives:
        to_local = invert(prim.pose)
        o = transform_points(to_local, origins)
        d = dirs @ to_local.rotation_matrix().T
        local_o.append(o)
        local_d.append(d)
        all_t.append(_intersect_local(prim, o, d))
    t_stack = np.stack(all_t, axis=0)  # (K, N)
    nearest = np.argmin(t_stack, axis=0)
    hit = np.isfinite(t_stack[nearest, np.arange(n)])

    colors = np.empty((n, 3), dtype=np.uint8)
    colors[:] = np.asarray(background, dtype=np.uint8)
    for k, prim in enumerate(scene.primitives):
        sel = hit & (nearest == k)
        if not np.any(sel):
            continue
        t = t_stack[k, sel]
        pts = local_o[k][sel] + t[:, None] * local_d[k][sel]
        if isinstance(prim, PlanePrimitive):
            pts[:, 2] = 0.0  # kill the fp residual so checker parity is exact
        colors[sel] = _texture_colors(prim.texture, pts)
    return colors


def raycast(
    scene: Scene, camera: Camera, background: tuple[int, int, int] = BACKGROUND
) -> ImageFrame:
    """Render one camera by back-projecting every pixel into the scene."""
    intr = camera.intrinsics
    u, v = np.meshgrid(
        np.arange(intr.width, dtype=np.float64), np.arange(intr.height, dtype=np.float64)
    )
    uv = np.stack([u.ravel(), v.ravel()], axis=1)
    rays_cam, converged = unproject_points(intr, uv)
    dirs = quat_rotate(camera.extrinsic.rotation, rays_cam)
    origins = np.broadcast_to(camera.extrinsic.translation, dirs.shape)
    colors = cast_rays(scene, origins, dirs, background)
    colors[~converged] = np.asarray(background, dtype=np.uint8)
    data = colors.reshape(intr.height, intr.width, 3)
    return ImageFrame(data=data, camera_name=camera.name)


def render_rig(scene: Scene, rig: CameraRig, timestamp_ns: int = 0) -> list[ImageFrame]:
    frames = []
    for cam in rig.cameras:
        frame = raycast(scene, cam)
        frame.timestamp_ns = timestamp_ns
        frames.append(frame)
    return frames


def _reference_rays(spec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-pixel ray origins/directions in the surface frame, plus validity.

    All rays originate at the surface-frame origin and pass through the
    sampled surface point: that is the view an observer at the rig center
    sees, which is what the camera fusion approximates (the cameras sit
    centimeters from that origin). Surface parameters are read duck-typed so
    this module stays free of any import from the projection code it checks.
    """
    w, h = spec.width, spec.height
    u, v = np.meshgrid(np.arange(w, dtype=np.float64) + 0.5, np.arange(h, dtype=np.float64) + 0.5)
    u, v = u.ravel(), v.ravel()
    n = u.size
    surface = spec.surface
    valid = np.ones(n, dtype=bool)
    if hasattr(surface, "horizontal_fov"):  # plane
        f = surface.focal_length
        m = 2.0 * f * np.tan(surface.horizontal_fov / 2.0) / w
        dirs = np.stack([(u - w / 2.0) * m, (v - h / 2.0) * m, np.full(n, f)], axis=1)
    elif hasattr(surface, "vertical_half_fov"):  # cylinder
        azimuth = -u * (2.0 * np.pi / w)
        c_r = surface.cylinder_radius
        c_h = 2.0 * c_r * np.tan(surface.vertical_half_fov)
        z = c_h * (0.5 - v / h)
        dirs = np.stack([c_r * np.cos(azimuth), c_r * np.sin(azimuth), z], axis=1)
    elif hasattr(surface, "sphere_radius"):  # sphere
        p_x = u / w - 0.5
        p_y = 0.5 - v / h
        r = 2.0 * np.hypot(p_x, p_y)
        gamma = np.arctan2(p_y, p_x)
        theta = r * surface.fov / 2.0
        dirs = np.stack(
            [np.sin(theta) * np.cos(gamma), -np.sin(theta) * np.sin(gamma), np.cos(theta)],
            axis=1,
        )
        valid = r <= 1.0
    else:
        raise TypeError(f"unknown surface parameters: {type(surface).__name__}")
    return np.zeros((n, 3)), dirs, valid


def reference_view(
    scene: Scene, spec, background: tuple[int, int, int] = BACKGROUND
) -> ImageFrame:
    """The ideal output image for a projection spec, bypassing the cameras."""
    origins, dirs, valid = _reference_rays(spec)
    pose = spec.surface_pose
    origins = transform_points(pose, origins)
    dirs = quat_rotate(pose.rotation, dirs)
    colors = cast_rays(scene, origins, dirs, background)
    colors[~valid] = np.asarray(background, dtype=np.uint8)
    return ImageFrame(data=colors.reshape(spec.height, spec.width, 3), camera_name="reference")


SCENE_SCHEMA = "omniview-scene/1"


def _color(d: dict, key: str, path: str) -> tuple[int, int, int]:
    rgb = _vector(d, key, 3, path)
    if any(not 0 <= c <= 255 for c in rgb):
        raise CalibrationError(f"{path}.{key}: color components must be in [0, 255]")
    return tuple(int(c) for c in rgb)


def _texture_from_dict(d, path: str) -> Texture:
    if not isinstance(d, dict):
        raise CalibrationError(f"{path}: expected a texture object")
    kind = d.get("type")
    if kind == "solid":
        return SolidTexture(color=_color(d, "color", path))
    if kind == "checker":
        return CheckerTexture(
            color_a=_color(d, "color_a", path),
            color_b=_color(d, "color_b", path),
            cell_size=_number(d, "cell_size_m", path),
        )
    raise CalibrationError(f"{path}.type: unknown texture '{kind}'")


def scene_from_dict(d: dict) -> Scene:
    if not isinstance(d, dict):
        raise CalibrationError("scene: expected a JSON object")
    if d.get("schema") != SCENE_SCHEMA:
        raise CalibrationError(f"scene.schema: expected '{SCENE_SCHEMA}'")
    prims_raw = d.get("primitives")
    if not isinstance(prims_raw, list) or not prims_raw:
        raise CalibrationError("scene.primitives: expected a non-empty list")
    primitives: list[Primitive] = []
    for i, entry in enumerate(prims_raw):
        path = f"scene.primitives[{i}]"
        if not isinstance(entry, dict):
            raise CalibrationError(f"{path}: expected an object")
        kind = entry.get("kind")
        pose = pose_from_dict(entry.get("pose"), f"{path}.pose")
        texture = _texture_from_dict(entry.get("texture"), f"{path}.texture")
        try:
            if kind == "plane":
                he = _vector(entry, "half_extents_m", 2, path)
                primitives.append(PlanePrimitive(pose, (he[0], he[1]), texture))
            elif kind == "sphere":
                primitives.append(SpherePrimitive(pose, _number(entry, "radius_m", path), texture))
            elif kind == "box":
                he = _vector(entry, "half_extents_m", 3, path)
                primitives.append(BoxPrimitive(pose, (he[0], he[1], he[2]), texture))
            else:
                raise CalibrationError(f"{path}.kind: unknown primitive '{kind}'")
        except CalibrationError:
            raise
        except ValueError as exc:
            raise CalibrationError(f"{path}: {exc}") from None
    return Scene(primitives=tuple(primitives))


def _texture_to_dict(t: Texture) -> dict:
    if isinstance(t, SolidTexture):
        return {"type": "solid", "color": list(t.color)}
    return {
        "type": "checker",
        "color_a": list(t.color_a),
        "color_b": list(t.color_b),
        "cell_size_m": t.cell_size,
    }


def scene_to_dict(scene: Scene) -> dict:
    prims = []
    for p in scene.primitives:
        entry = {"pose": pose_to_dict(p.pose), "texture": _texture_to_dict(p.texture)}
        if isinstance(p, PlanePrimitive):
            entry = {"kind": "plane", "half_extents_m": list(p.half_extents), **entry}
        elif isinstance(p, SpherePrimitive):
            entry = {"kind": "sphere", "radius_m": p.radius, **entry}
        else:
            entry = {"kind": "box", "half_extents_m": list(p.half_extents), **entry}
        prims.append(entry)
    return {"schema": SCENE_SCHEMA, "primitives": prims}


def load_scene(path) -> Scene:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise CalibrationError(f"{path}: not valid JSON ({exc})") from None
    return scene_from_dict(raw)


def save_scene(scene: Scene, path) -> None:
    Path(path).write_text(json.dumps(scene_to_dict(scene), indent=2) + "\n")


def sample_surface_points(
    scene: Scene, count: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Random points on scene surfaces with their exact texture colors.

    Used as cloud-colorization ground truth: a point sampled on a primitive
    is colored by that primitive's texture directly, no rendering involved.
    Returns (points_world (N, 3), colors (N, 3) uint8).
    """
    per = [count // len(scene.primitives)] * len(scene.primitives)
    per[0] += count - sum(per)
    pts_out, col_out = [], []
    for prim, k in zip(scene.primitives, per):
        if k == 0:
            continue
        if isinstance(prim, PlanePrimitive):
            local = np.stack(
                [
                    rng.uniform(-prim.half_extents[0], prim.half_extents[0], k),
                    rng.uniform(-prim.half_extents[1], prim.half_extents[1], k),
                    np.zeros(k),
                ],
                axis=1,
            )
        elif isinstance(prim, SpherePrimitive):
            raw = rng.normal(size=(k, 3))
            local = prim.radius * raw / np.linalg.norm(raw, axis=1, keepdims=True)
        else:
            # Random points on box faces, area-weighted by axis pair.
            he = np.asarray(prim.half_extents)
            areas = np.array([he[1] * he[2], he[0] * he[2], he[0] * he[1]], dtype=np.float64)
            axis = rng.choice(3, size=k, p=areas / areas.sum())
            side = rng.choice([-1.0, 1.0], size=k)
            local = rng.uniform(-1.0, 1.0, size=(k, 3)) * he
            local[np.arange(k), axis] = side * he[axis]
        col_out.append(_texture_colors(prim.texture, local))
        pts_out.append(transform_points(prim.pose, local))
    return np.concatenate(pts_out), np.concatenate(col_out)
