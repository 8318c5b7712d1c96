"""Image frame container and 8-bit PNG/JPEG helpers."""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

JPEG_QUALITY = 90


@dataclass
class ImageFrame:
    """8-bit image with 1 (gray) or 3 (RGB) channels."""

    data: np.ndarray
    camera_name: str = ""
    timestamp_ns: int = 0

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.dtype != np.uint8:
            raise ValueError("frame samples must be uint8")
        if data.ndim == 2:
            pass
        elif data.ndim == 3 and data.shape[2] in (1, 3):
            if data.shape[2] == 1:
                data = data[:, :, 0]
        else:
            raise ValueError("frame must have shape (H, W), (H, W, 1) or (H, W, 3)")
        self.data = data

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else self.data.shape[2]


def load_image(path, camera_name: str = "", timestamp_ns: int = 0) -> ImageFrame:
    with Image.open(path) as img:
        if img.mode not in ("L", "RGB"):
            img = img.convert("RGB")
        data = np.asarray(img, dtype=np.uint8)
    return ImageFrame(data=data, camera_name=camera_name, timestamp_ns=timestamp_ns)


def save_image(frame: ImageFrame, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(frame.data).save(path)


def encode_jpeg(frame: ImageFrame, quality: int = JPEG_QUALITY) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(frame.data).save(buf, format="JPEG", quality=quality)
    return buf.getvalue()
