"""Lidar cloud colorization from multi-camera imagery.

Every scan point is chained into each camera frame and projected; among the
cameras that see it, the observation closest to the principal point wins and
its bilinearly interpolated color is assigned. Camera rays that pass through
a configured robot-body exclusion volume before reaching the point are
discarded so the robot cannot paint itself onto the environment.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .calibration import CalibrationError, CameraRig, _vector, pose_from_dict, pose_to_dict
from .camera_models import project_points
from .frames import ImageFrame
from .geometry import Pose, invert, transform_points

NONE_SOURCE = -1
UNCOLORED_GRAY = (128, 128, 128)
DEFAULT_STALENESS_WINDOW_NS = 100_000_000  # 100 ms


@dataclass(frozen=True)
class PointCloud:
    """Points in the Lidar sensor frame, with optional return intensity."""

    frame: str
    points: np.ndarray  # (N, 3) float64, meters
    intensity: np.ndarray | None = None  # (N,) float
    timestamp_ns: int = 0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise ValueError("cloud contains non-finite coordinates")
        object.__setattr__(self, "points", pts)
        if self.intensity is not None:
            inten = np.asarray(self.intensity, dtype=np.float64).reshape(-1)
            if inten.shape[0] != pts.shape[0]:
                raise ValueError("intensity length does not match point count")
            object.__setattr__(self, "intensity", inten)

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class ColoredPointCloud:
    points: np.ndarray  # (N, 3) float64
    colors: np.ndarray  # (N, 3) uint8
    source_camera: np.ndarray  # (N,) int16, NONE_SOURCE where uncolored
    stale_frame_count: int = 0  # cameras skipped because their frame was too old

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class ExclusionVolume:
    """Axis box (in its own frame) blanking camera rays through robot parts."""

    pose: Pose
    half_extents: tuple[float, float, float]

    def __post_init__(self):
        he = tuple(float(x) for x in self.half_extents)
        if len(he) != 3 or any(x <= 0 for x in he):
            raise ValueError("half_extents must be 3 positive numbers")
        object.__setattr__(self, "half_extents", he)


def ray_intersects_box(origin, direction, vol: ExclusionVolume) -> tuple[bool, float]:
    """Slab test in the volume's frame; boundaries are inclusive.

    Returns (hit, entry_distance) where entry_distance is in units of the
    direction vector's length and is 0.0 for origins inside the box.
    """
    direction = np.asarray(direction, dtype=np.float64).reshape(3)
    if float(np.linalg.norm(direction)) < 1e-15:
        raise ValueError("ray direction must be non-zero")
    hit, t_entry = _rays_hit_boxes(
        np.asarray(origin, dtype=np.float64).reshape(1, 3),
        direction.reshape(1, 3),
        np.array([np.inf]),
        [vol],
    )
    return bool(hit[0]), float(t_entry[0])


def _rays_hit_boxes(origins, dirs, max_t, volumes) -> tuple[NDArray, NDArray]:
    """Vectorized segment-vs-box test for N rays against all volumes.

    A ray counts as blocked when it enters some box at t in [0, max_t).
    """
    n = origins.shape[0]
    blocked = np.zeros(n, dtype=bool)
    entry = np.full(n, np.inf)
    for vol in volumes:
        to_box = invert(vol.pose)
        o = transform_points(to_box, origins)
        d = dirs @ to_box.rotation_matrix().T
        t_lo = np.full(n, -np.inf)
        t_hi = np.full(n, np.inf)
        inside_ok = np.ones(n, dtype=bool)
        for axis in range(3):
            h = vol.half_extents[axis]
            da = d[:, axis]
            oa = o[:, axis]
            parallel = np.abs(da) < 1e-15
            with np.errstate(divide="ignore", invalid="ignore"):
                t1 = (-h - oa) / da
                t2 = (h - oa) / da
            lo = np.minimum(t1, t2)
            hi = np.maximum(t1, t2)
            t_lo = np.where(parallel, t_lo, np.maximum(t_lo, lo))
            t_hi = np.where(parallel, t_hi, np.minimum(t_hi, hi))
            # Parallel rays only pass if the origin lies within the slab.
            inside_ok &= ~parallel | (np.abs(oa) <= h)
        t_entry = np.maximum(t_lo, 0.0)
        hits = inside_ok & (t_lo <= t_hi) & (t_hi >= 0.0) & (t_entry < max_t)
        blocked |= hits
        entry = np.where(hits, np.minimum(entry, t_entry), entry)
    return blocked, entry


def colorize(
    rig: CameraRig,
    frames: Sequence[ImageFrame],
    cloud: PointCloud,
    volumes: Sequence[ExclusionVolume] = (),
    lidar_extrinsic: Pose | None = None,
    fill: tuple[int, int, int] = UNCOLORED_GRAY,
    staleness_window_ns: int = DEFAULT_STALENESS_WINDOW_NS,
) -> ColoredPointCloud:
    """Assign each scan point the color of the best camera observing it.

    ``lidar_extrinsic`` defaults to the rig's own Lidar pose. Cameras whose
    frame timestamp deviates from the scan by more than the staleness window
    contribute nothing; the count of such skipped frames is reported on the
    result. Points no camera colors keep the fill color and NONE_SOURCE.
    """
    extrinsic = lidar_extrinsic if lidar_extrinsic is not None else rig.lidar_extrinsic
    if extrinsic is None:
        raise ValueError("no Lidar extrinsic: pass lidar_extrinsic or set it on the rig")
    if extrinsic.parent_frame != rig.reference_frame:
        raise ValueError(
            f"lidar extrinsic parent '{extrinsic.parent_frame}' does not match "
            f"rig reference frame '{rig.reference_frame}'"
        )
    if extrinsic.child_frame != cloud.frame:
        raise ValueError(
            f"cloud frame '{cloud.frame}' does not match lidar extrinsic child "
            f"'{extrinsic.child_frame}'"
        )
    by_name = {f.camera_name: f for f in frames}
    n = len(cloud)
    pts_ref = transform_points(extrinsic, cloud.points)

    best_d2 = np.full(n, np.inf)
    best_cam = np.full(n, NONE_SOURCE, dtype=np.int16)
    colors = np.empty((n, 3), dtype=np.uint8)
    colors[:] = np.asarray(fill, dtype=np.uint8)
    stale = 0
    for cam_i, cam in enumerate(rig.cameras):
        frame = by_name.get(cam.name)
        if frame is None:
            raise ValueError(f"no frame provided for camera '{cam.name}'")
        if abs(frame.timestamp_ns - cloud.timestamp_ns) > staleness_window_ns:
            stale += 1
            continue
        intr = cam.intrinsics
        if frame.width != intr.width or frame.height != intr.height:
            raise ValueError(
                f"frame for camera '{cam.name}' is {frame.width}x{frame.height}, "
                f"expected {intr.width}x{intr.height}"
            )
        pts_cam = transform_points(invert(cam.extrinsic), pts_ref)
        uv, valid = project_points(intr, pts_cam, include_fov_boundary=False)
        if volumes and np.any(valid):
            cam_origin = cam.extrinsic.translation
            rays = pts_ref - cam_origin
            blocked, _ = _rays_hit_boxes(
                np.broadcast_to(cam_origin, rays.shape), rays, np.ones(n), volumes
            )
            valid &= ~blocked
        d2 = np.where(valid, (uv[:, 0] - intr.cx) ** 2 + (uv[:, 1] - intr.cy) ** 2, np.inf)
        better = d2 < best_d2
        if not np.any(better):
            continue
        best_d2[better] = d2[better]
        best_cam[better] = cam_i
        colors[better] = _bilinear_colors(frame, uv[better, 0], uv[better, 1])

    return ColoredPointCloud(
        points=cloud.points.copy(),
        colors=colors,
        source_camera=best_cam,
        stale_frame_count=stale,
    )


def _bilinear_colors(frame: ImageFrame, u, v) -> np.ndarray:
    """Bilinear sample with border replication; returns (k, 3) uint8."""
    w, h = frame.width, frame.height
    u0 = np.floor(u)
    v0 = np.floor(v)
    fu = (u - u0)[:, None]
    fv = (v - v0)[:, None]
    x0 = np.clip(u0, 0, w - 1).astype(np.intp)
    y0 = np.clip(v0, 0, h - 1).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    flat = frame.data.reshape(w * h, -1).astype(np.float32)
    value = (
        (1 - fu) * (1 - fv) * flat[y0 * w + x0]
        + fu * (1 - fv) * flat[y0 * w + x1]
        + (1 - fu) * fv * flat[y1 * w + x0]
        + fu * fv * flat[y1 * w + x1]
    )
    rgb = np.rint(value).astype(np.uint8)
    if rgb.shape[1] == 1:
        rgb = np.repeat(rgb, 3, axis=1)
    return rgb


def load_exclusion_volumes(path) -> list[ExclusionVolume]:
    """Read exclusion volumes from JSON: a list of {pose, half_extents_m}."""
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise CalibrationError(f"{path}: not valid JSON ({exc})") from None
    if isinstance(raw, dict):
        raw = raw.get("volumes", raw)
    if not isinstance(raw, list):
        raise CalibrationError("exclusions: expected a list of volumes")
    volumes = []
    for i, entry in enumerate(raw):
        path_i = f"exclusions[{i}]"
        if not isinstance(entry, dict):
            raise CalibrationError(f"{path_i}: expected an object")
        pose = pose_from_dict(entry.get("pose"), f"{path_i}.pose")
        he = _vector(entry, "half_extents_m", 3, path_i)
        try:
            volumes.append(ExclusionVolume(pose=pose, half_extents=tuple(he)))
        except ValueError as exc:
            raise CalibrationError(f"{path_i}: {exc}") from None
    return volumes


def save_exclusion_volumes(volumes: Sequence[ExclusionVolume], path) -> None:
    out = [
        {"pose": pose_to_dict(v.pose), "half_extents_m": list(v.half_extents)}
        for v in volumes
    ]
    Path(path).write_text(json.dumps(out, indent=2) + "\n")


def load_ply(path) -> PointCloud:
    """Read an ASCII PLY cloud with x y z and optional intensity."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ValueError(f"{path}: not a PLY file")
    n_points = 0
    properties: list[str] = []
    fmt = None
    idx = 1
    while idx < len(lines):
        tokens = lines[idx].split()
        idx += 1
        if not tokens:
            continue
        if tokens[0] == "format":
            fmt = tokens[1]
        elif tokens[0] == "element":
            if tokens[1] == "vertex":
                n_points = int(tokens[2])
            elif int(tokens[2]) > 0:
                raise ValueError(f"{path}: unsupported element '{tokens[1]}'")
        elif tokens[0] == "property":
            properties.append(tokens[-1])
        elif tokens[0] == "end_header":
            break
    else:
        raise ValueError(f"{path}: missing end_header")
    if fmt != "ascii":
        raise ValueError(f"{path}: only ascii PLY is supported, got '{fmt}'")
    for coord in ("x", "y", "z"):
        if coord not in properties:
            raise ValueError(f"{path}: missing vertex property '{coord}'")
    body = lines[idx : idx + n_points]
    if len(body) < n_points:
        raise ValueError(f"{path}: expected {n_points} vertices, found {len(body)}")
    data = np.loadtxt(body, dtype=np.float64, ndmin=2) if n_points else np.zeros((0, len(properties)))
    cols = {name: i for i, name in enumerate(properties)}
    points = data[:, [cols["x"], cols["y"], cols["z"]]]
    intensity = data[:, cols["intensity"]] if "intensity" in cols else None
    return PointCloud(frame="lidar", points=points, intensity=intensity)


def ply_dumps(cloud: ColoredPointCloud) -> str:
    """ASCII PLY text with colors and per-point source camera."""
    n = len(cloud)
    header = [
        "ply",
        "format ascii 1.0",
        f"element vertex {n}",
        "property float x",
        "property float y",
        "property float z",
        "property uchar red",
        "property uchar green",
        "property uchar blue",
        "property int source_camera",
        "end_header",
    ]
    rows = []
    for i in range(n):
        x, y, z = cloud.points[i]
        r, g, b = cloud.colors[i]
        rows.append(f"{x:.6f} {y:.6f} {z:.6f} {r} {g} {b} {int(cloud.source_camera[i])}")
    return "\n".join(header + rows) + "\n"


def save_ply(cloud: ColoredPointCloud, path) -> None:
    Path(path).write_text(ply_dumps(cloud))
