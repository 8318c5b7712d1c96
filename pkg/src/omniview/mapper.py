"""Per-pixel projection lookup tables and their application to camera frames.

Building a map is the expensive step: every output pixel is pushed through
surface sampling, the frame chain, and every camera's projection, keeping the
candidate whose image point lies closest to that camera's principal point.
Applying the map (remap) is a cheap gather with bilinear interpolation, so a
streaming pipeline can keep serving an old map while a new one builds.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .calibration import CameraRig, spec_fingerprint
from .camera_models import project_points
from .frames import ImageFrame
from .geometry import Pose, compose, invert, transform_points
from .surfaces import ProjectionSpec, surface_points

NONE_INDEX = -1

_LUT_MAGIC = b"OVPM"
_LUT_VERSION = 1
_LUT_RECORD = np.dtype([("camera_index", "<i2"), ("src_u", "<f4"), ("src_v", "<f4")])

_BAND_PIXELS = 1 << 17


@dataclass
class ProjectionMap:
    """Materialized lookup table: one (camera, fractional source coord)
    record per output pixel, NONE_INDEX where no camera sees the surface.

    Treated as immutable after construction; the lazily built gather plan is
    a cache and does not affect equality or serialization.
    """

    camera_index: np.ndarray  # (H, W) int16, NONE_INDEX where uncovered
    src_u: np.ndarray  # (H, W) float32
    src_v: np.ndarray  # (H, W) float32
    source_names: tuple[str, ...]
    source_sizes: tuple[tuple[int, int], ...]  # (width, height) per camera
    rig_fingerprint: bytes
    spec_fingerprint: bytes
    _plan: list | None = field(default=None, repr=False, compare=False)

    @property
    def width(self) -> int:
        return self.camera_index.shape[1]

    @property
    def height(self) -> int:
        return self.camera_index.shape[0]

    def coverage(self) -> float:
        """Fraction of output pixels mapped to some camera."""
        return float(np.mean(self.camera_index != NONE_INDEX))

    def records_bytes(self) -> bytes:
        records = np.empty(self.camera_index.size, dtype=_LUT_RECORD)
        records["camera_index"] = self.camera_index.ravel()
        records["src_u"] = self.src_u.ravel()
        records["src_v"] = self.src_v.ravel()
        return records.tobytes()

    def save(self, path) -> None:
        header = _LUT_MAGIC + struct.pack("<HII", _LUT_VERSION, self.width, self.height)
        header += self.rig_fingerprint + self.spec_fingerprint
        Path(path).write_bytes(header + self.records_bytes())

    def _gather_plan(self) -> list:
        # One task per (camera, row band): flat output indices plus source
        # gather indices and bilinear weights. Bands bound the gather
        # temporaries and never overlap, so they are also safe to fan out
        # across threads. Built once; rebuilding in a race is harmless.
        if self._plan is None:
            plan = []
            flat_cam = self.camera_index.ravel()
            flat_u = self.src_u.ravel()
            flat_v = self.src_v.ravel()
            for cam_i, (src_w, src_h) in enumerate(self.source_sizes):
                out_idx = np.flatnonzero(flat_cam == cam_i)
                if out_idx.size == 0:
                    continue
                u = flat_u[out_idx].astype(np.float64)
                v = flat_v[out_idx].astype(np.float64)
                u0 = np.floor(u)
                v0 = np.floor(v)
                fu = (u - u0).astype(np.float32)[:, None]
                fv = (v - v0).astype(np.float32)[:, None]
                x0 = np.clip(u0, 0, src_w - 1).astype(np.int32)
                y0 = np.clip(v0, 0, src_h - 1).astype(np.int32)
                x1 = np.minimum(x0 + 1, src_w - 1)
                y1 = np.minimum(y0 + 1, src_h - 1)
                idx = (y0 * src_w + x0, y0 * src_w + x1, y1 * src_w + x0, y1 * src_w + x1)
                weights = ((1 - fu) * (1 - fv), fu * (1 - fv), (1 - fu) * fv, fu * fv)
                for lo in range(0, out_idx.size, _BAND_PIXELS):
                    hi = min(lo + _BAND_PIXELS, out_idx.size)
                    band_out = out_idx[lo:hi]
                    # Contiguous output runs can be written as a plain slice.
                    contiguous = int(band_out[-1]) - int(band_out[0]) == hi - lo - 1
                    plan.append(
                        (
                            cam_i,
                            slice(int(band_out[0]), int(band_out[-1]) + 1)
                            if contiguous
                            else band_out,
                            tuple(a[lo:hi] for a in idx),
                            tuple(w[lo:hi] for w in weights),
                        )
                    )
            self._plan = plan
        return self._plan


def build_projection_map(rig: CameraRig, spec: ProjectionSpec) -> ProjectionMap:
    """Compute the lookup table mapping every output pixel to a source camera.

    For each output pixel the surface sample point is chained into every
    camera frame and projected; among valid projections the camera whose
    image point is closest to its principal point wins, exact ties going to
    the lower camera index. Pixels whose surface sample is invalid or that no
    camera sees get NONE_INDEX.
    """
    if len(rig.cameras) == 0:
        raise ValueError("rig must contain at least one camera")
    if spec.surface_pose.parent_frame != rig.reference_frame:
        raise ValueError(
            f"surface pose parent '{spec.surface_pose.parent_frame}' does not match "
            f"rig reference frame '{rig.reference_frame}'"
        )
    n = spec.width * spec.height
    chains = [compose(invert(cam.extrinsic), spec.surface_pose) for cam in rig.cameras]

    best_d2 = np.full(n, np.inf)
    best_cam = np.full(n, NONE_INDEX, dtype=np.int16)
    best_u = np.zeros(n, dtype=np.float32)
    best_v = np.zeros(n, dtype=np.float32)
    # Chunking keeps the float64 temporaries cache-sized so build time stays
    # linear in the output resolution.
    chunk = 1 << 15
    for start in range(0, n, chunk):
        sl = slice(start, min(start + chunk, n))
        idx = np.arange(start, sl.stop, dtype=np.float64)
        pts, surf_valid = surface_points(spec, idx % spec.width + 0.5, idx // spec.width + 0.5)
        for cam_i, cam in enumerate(rig.cameras):
            pts_cam = transform_points(chains[cam_i], pts)  # Ci <- R <- P
            # Samples exactly on the lens FOV boundary are rejected so the
            # remap never interpolates across the fisheye rim.
            uv, valid = project_points(cam.intrinsics, pts_cam, include_fov_boundary=False)
            valid &= surf_valid
            intr = cam.intrinsics
            d2 = np.where(
                valid,
                (uv[:, 0] - intr.cx) ** 2 + (uv[:, 1] - intr.cy) ** 2,
                np.inf,
            )
            d2_view = best_d2[sl]
            better = d2 < d2_view
            if not np.any(better):
                continue
            d2_view[better] = d2[better]
            best_cam[sl][better] = cam_i
            best_u[sl][better] = uv[better, 0]
            best_v[sl][better] = uv[better, 1]

    shape = (spec.height, spec.width)
    return ProjectionMap(
        camera_index=best_cam.reshape(shape),
        src_u=best_u.reshape(shape),
        src_v=best_v.reshape(shape),
        source_names=tuple(rig.camera_names()),
        source_sizes=tuple((c.intrinsics.width, c.intrinsics.height) for c in rig.cameras),
        rig_fingerprint=rig.fingerprint(),
        spec_fingerprint=spec_fingerprint(spec),
    )


def _frames_by_name(frames) -> Mapping[str, ImageFrame]:
    if isinstance(frames, Mapping):
        return frames
    return {frame.camera_name: frame for frame in frames}


def _run_band(out, flat_sources, task) -> None:
    cam_i, out_idx, idx, weights = task
    flat = flat_sources[cam_i]  # uint8; promoted to float32 on multiply
    value = weights[0] * np.take(flat, idx[0], axis=0)
    value += weights[1] * np.take(flat, idx[1], axis=0)
    value += weights[2] * np.take(flat, idx[2], axis=0)
    value += weights[3] * np.take(flat, idx[3], axis=0)
    out[out_idx] = value  # (k, 1) gray broadcasts into RGB


def remap(
    pmap: ProjectionMap,
    frames: Sequence[ImageFrame] | Mapping[str, ImageFrame],
    fill: tuple[int, int, int] = (0, 0, 0),
) -> ImageFrame:
    """Apply the lookup table to one frame per camera.

    Output is RGB; grayscale sources replicate across channels. Uncovered
    pixels take the fill color. Interpolation is bilinear with border
    replication; results round half to even (127.5 -> 128).
    """
    by_name = _frames_by_name(frames)
    plan = pmap._gather_plan()
    n = pmap.width * pmap.height
    out = np.empty((n, 3), dtype=np.float32)
    out[:] = np.asarray(fill, dtype=np.float32)
    timestamp = 0
    flat_sources: dict[int, np.ndarray] = {}
    for cam_i in sorted({task[0] for task in plan}):
        name = pmap.source_names[cam_i]
        if name not in by_name:
            raise ValueError(f"no frame provided for camera '{name}'")
        frame = by_name[name]
        src_w, src_h = pmap.source_sizes[cam_i]
        if frame.width != src_w or frame.height != src_h:
            raise ValueError(
                f"frame for camera '{name}' is {frame.width}x{frame.height}, "
                f"expected {src_w}x{src_h}"
            )
        timestamp = max(timestamp, frame.timestamp_ns)
        flat_sources[cam_i] = frame.data.reshape(src_w * src_h, -1)
    for task in plan:
        _run_band(out, flat_sources, task)
    rgb = np.rint(out).astype(np.uint8).reshape(pmap.height, pmap.width, 3)
    return ImageFrame(data=rgb, camera_name="projection", timestamp_ns=timestamp)


def load_projection_map(path, rig: CameraRig, spec: ProjectionSpec) -> ProjectionMap:
    """Read a cached lookup table, verifying it matches the given rig and spec."""
    raw = Path(path).read_bytes()
    if len(raw) < 30 or raw[:4] != _LUT_MAGIC:
        raise ValueError(f"{path}: not a projection map cache (bad magic)")
    version, width, height = struct.unpack("<HII", raw[4:14])
    if version != _LUT_VERSION:
        raise ValueError(f"{path}: unsupported cache version {version}")
    rig_fp, spec_fp = raw[14:22], raw[22:30]
    if rig_fp != rig.fingerprint():
        raise ValueError(f"{path}: cache was built for a different rig")
    if spec_fp != spec_fingerprint(spec):
        raise ValueError(f"{path}: cache was built for a different projection spec")
    expected = width * height * _LUT_RECORD.itemsize
    body = raw[30:]
    if len(body) != expected:
        raise ValueError(f"{path}: truncated cache ({len(body)} of {expected} record bytes)")
    records = np.frombuffer(body, dtype=_LUT_RECORD)
    return ProjectionMap(
        camera_index=records["camera_index"].reshape(height, width).copy(),
        src_u=records["src_u"].reshape(height, width).copy(),
        src_v=records["src_v"].reshape(height, width).copy(),
        source_names=tuple(rig.camera_names()),
        source_sizes=tuple((c.intrinsics.width, c.intrinsics.height) for c in rig.cameras),
        rig_fingerprint=rig_fp,
        spec_fingerprint=spec_fp,
    )


class ProjectionMapper:
    """Holds a rig and spec so the view pose can be retargeted online.

    retarget() rebuilds the whole lookup table with only the surface pose
    replaced, which is what steering a virtual pan-tilt view amounts to.
    """

    def __init__(self, rig: CameraRig, spec: ProjectionSpec):
        self.rig = rig
        self.spec = spec
        self.map = build_projection_map(rig, spec)

    def retarget(self, new_surface_pose: Pose) -> ProjectionMap:
        self.spec = self.spec.with_pose(new_surface_pose)
        self.map = build_projection_map(self.rig, self.spec)
        return self.map
