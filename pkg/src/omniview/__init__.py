"""Virtual multi-camera projections and Lidar cloud colorization.

Calibrated camera rigs are fused into arbitrary virtual views (perspective,
Mercator panorama, spherical) through precomputed per-pixel lookup tables,
and Lidar scans are colorized from the same cameras. Shipped as a library,
a CLI (``omniview``), and a streaming HTTP/WebSocket service.
"""

from .calibration import (
    CalibrationError,
    CameraRig,
    load_projection_spec,
    load_rig,
    save_projection_spec,
    save_rig,
)
from .camera_models import (
    Camera,
    CameraIntrinsics,
    CameraModel,
    PixelCoord,
    project,
    project_points,
    unproject,
    unproject_points,
)
from .colorizer import (
    ColoredPointCloud,
    ExclusionVolume,
    PointCloud,
    colorize,
    load_ply,
    ray_intersects_box,
    save_ply,
)
from .frames import ImageFrame, load_image, save_image
from .geometry import FrameChainError, Pose, compose, invert, transform_point, transform_points
from .mapper import (
    NONE_INDEX,
    ProjectionMap,
    ProjectionMapper,
    build_projection_map,
    load_projection_map,
    remap,
)
from .oracle import Scene, raycast, reference_view, render_rig
from .surfaces import (
    MercatorParams,
    PerspectiveParams,
    ProjectionSpec,
    SphericalParams,
    sample_surface,
)

__version__ = "0.1.0"
