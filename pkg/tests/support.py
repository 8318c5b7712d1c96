"""Shared helpers: oracle-vs-mapper comparisons and service drivers."""

import numpy as np
import requests

from omniview.mapper import NONE_INDEX
from omniview.service import DirectorySource, ServiceRunner, create_app


def dilate(mask, radius):
    """Binary dilation with a (2r+1)^2 square element, edge-padded."""
    out = mask.copy()
    padded = np.pad(mask, radius, mode="edge")
    h, w = mask.shape
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            out |= padded[radius + dy : radius + dy + h, radius + dx : radius + dx + w]
    return out


def seam_mask(pmap, radius=3):
    """Pixels within ``radius`` of a camera-selection change or NONE entry."""
    cam = pmap.camera_index
    seam = cam == NONE_INDEX
    seam[:, 1:] |= cam[:, 1:] != cam[:, :-1]
    seam[1:, :] |= cam[1:, :] != cam[:-1, :]
    return dilate(seam, radius)


def edge_mask(image_data, radius=3, threshold=8):
    """Pixels within ``radius`` of a color discontinuity in the image."""
    img = image_data.astype(np.int16)
    edge = np.zeros(img.shape[:2], dtype=bool)
    edge[:, 1:] |= np.abs(img[:, 1:] - img[:, :-1]).max(axis=2) > threshold
    edge[1:, :] |= np.abs(img[1:, :] - img[:-1, :]).max(axis=2) > threshold
    return dilate(edge, radius)


def offseam_mae(output, reference, pmap, radius=3):
    """Mean absolute error per channel, excluding seams, texture edges, and
    uncovered pixels. Returns (mae_fraction, kept_pixel_fraction)."""
    keep = ~seam_mask(pmap, radius) & ~edge_mask(reference.data, radius)
    keep &= pmap.camera_index != NONE_INDEX
    diff = np.abs(output.data.astype(np.float64) - reference.data.astype(np.float64))
    return float(diff[keep].mean()) / 255.0, float(keep.mean())


def checker_transitions(row_values):
    """Subpixel positions where a 1-D intensity profile crosses its midpoint."""
    vals = row_values.astype(np.float64)
    mid = (vals.max() + vals.min()) / 2.0
    above = vals > mid
    crossings = []
    for i in range(len(vals) - 1):
        if above[i] != above[i + 1]:
            frac = (mid - vals[i]) / (vals[i + 1] - vals[i])
            crossings.append(i + frac)
    return np.asarray(crossings)


def read_mjpeg_stream(url, timeout=60):
    """Fetch a finite MJPEG stream fully; returns (raw_bytes, jpeg_list)."""
    response = requests.get(url, stream=True, timeout=timeout)
    if response.status_code != 200:
        response.close()
        return response.status_code, b"", []
    raw = b""
    for chunk in response.iter_content(chunk_size=65536):
        raw += chunk
    jpegs = []
    for part in raw.split(b"--omniviewframe"):
        idx = part.find(b"\r\n\r\n")
        if idx >= 0 and b"image/jpeg" in part[:idx]:
            jpegs.append(part[idx + 4 :].rstrip(b"\r\n"))
    return 200, raw, jpegs


def run_scripted_service(source_dir, rig, specs, script, view_id="main"):
    """Start an unpaced service over a recorded directory, capture the full
    MJPEG stream for one view, and shut the service down."""
    source = DirectorySource(source_dir, rig.camera_names())
    app = create_app(rig, specs, source, pose_script=script, paced=False)
    runner = ServiceRunner(app).start()
    try:
        status, raw, jpegs = read_mjpeg_stream(
            f"http://127.0.0.1:{runner.port}/views/{view_id}/stream"
        )
        assert status == 200
        return raw, jpegs
    finally:
        runner.stop()
