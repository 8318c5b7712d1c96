"""HTTP/WebSocket service streaming steerable virtual views.

Projections are computed where the source frames live, so only the rendered
views cross the network. Each view keeps one immutable projection map that
is swapped atomically after a rebuild; frame delivery keeps using the old
map while a new one builds, and concurrent pose updates coalesce so at most
one rebuild per view is in flight.

Endpoints:
    GET  /views                     list view ids and specs
    GET  /views/{id}                spec JSON
    POST /views/{id}/pose           {"yaw_deg","pitch_deg","roll_deg"} deltas
                                    or {"absolute": <pose JSON>}
    POST /views/{id}/zoom           {"hfov_deg": float} (perspective views)
    GET  /views/{id}/stream         multipart/x-mixed-replace MJPEG
    GET  /views/{id}/frame          latest frame as a single JPEG
    WS   /views/{id}/ws             16-byte header (u64 ts, u32 w, u32 h) + JPEG
    GET  /cloud/latest              colorized ASCII PLY (when configured)
    GET  /healthz
"""

from __future__ import annotations

import asyncio
import json
import struct
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from aiohttp import web

from .calibration import (
    CalibrationError,
    CameraRig,
    deg2rad,
    pose_from_dict,
    spec_to_dict,
)
from .colorizer import ExclusionVolume, PointCloud, colorize, ply_dumps
from .frames import ImageFrame, encode_jpeg, load_image
from .geometry import Pose, compose, quat_from_yaw_pitch_roll
from .mapper import build_projection_map, remap
from .oracle import Scene, render_rig
from .surfaces import PerspectiveParams, ProjectionSpec

ZOOM_MIN_DEG = 10.0
ZOOM_MAX_DEG = 170.0

_MJPEG_BOUNDARY = "omniviewframe"


class DirectorySource:
    """Recorded frame sets: one subdirectory of PNGs per camera, lockstep.

    Files pair up by sort order; a numeric file stem is taken as the
    timestamp in nanoseconds, otherwise the frame index is used.
    """

    def __init__(self, root, camera_names: Sequence[str]):
        self.root = Path(root)
        self.camera_names = list(camera_names)
        self._files: dict[str, list[Path]] = {}
        counts = set()
        for name in self.camera_names:
            cam_dir = self.root / name
            if not cam_dir.is_dir():
                raise FileNotFoundError(f"missing camera directory: {cam_dir}")
            files = sorted(p for p in cam_dir.iterdir() if p.suffix.lower() == ".png")
            self._files[name] = files
            counts.add(len(files))
        if len(counts) != 1:
            raise ValueError(f"camera directories under {self.root} have differing frame counts")
        self.count = counts.pop()

    def frame_sets(self):
        for k in range(self.count):
            frames = []
            for name in self.camera_names:
                path = self._files[name][k]
                ts = int(path.stem) if path.stem.isdigit() else k
                frames.append(load_image(path, camera_name=name, timestamp_ns=ts))
            yield k, frames


class SceneSource:
    """Synthetic playback: the rig rendered against a static scene."""

    def __init__(self, scene: Scene, rig: CameraRig, count: int | None = None,
                 frame_interval_ns: int = 100_000_000):
        self.scene = scene
        self.rig = rig
        self.count = count
        self.frame_interval_ns = frame_interval_ns
        self._rendered: list[ImageFrame] | None = None

    def frame_sets(self):
        if self._rendered is None:
            self._rendered = render_rig(self.scene, self.rig)
        k = 0
        while self.count is None or k < self.count:
            ts = k * self.frame_interval_ns
            frames = [
                ImageFrame(f.data, camera_name=f.camera_name, timestamp_ns=ts)
                for f in self._rendered
            ]
            yield k, frames
            k += 1


@dataclass
class ScriptedUpdate:
    frame: int
    view_id: str
    yaw_deg: float = 0.0
    pitch_deg: float = 0.0
    roll_deg: float = 0.0
    hfov_deg: float | None = None


def load_pose_script(path) -> list[ScriptedUpdate]:
    raw = json.loads(Path(path).read_text())
    if not isinstance(raw, list):
        raise CalibrationError("pose script: expected a JSON list")
    out = []
    for i, entry in enumerate(raw):
        out.append(
            ScriptedUpdate(
                frame=int(entry["frame"]),
                view_id=str(entry["view"]),
                yaw_deg=float(entry.get("yaw_deg", 0.0)),
                pitch_deg=float(entry.get("pitch_deg", 0.0)),
                roll_deg=float(entry.get("roll_deg", 0.0)),
                hfov_deg=float(entry["hfov_deg"]) if "hfov_deg" in entry else None,
            )
        )
    return out


class ViewSession:
    """One steerable view: current spec, current map, coalesced rebuilds."""

    def __init__(self, view_id: str, rig: CameraRig, spec: ProjectionSpec):
        self.view_id = view_id
        self.rig = rig
        self.spec = spec
        self.map = build_projection_map(rig, spec)
        self.latest_jpeg: bytes | None = None
        self.latest_timestamp_ns = 0
        self.subscribers: set[asyncio.Queue] = set()
        self._cond: asyncio.Condition | None = None
        self._pending: ProjectionSpec | None = None
        self._in_flight: ProjectionSpec | None = None
        self._pending_generation = 0
        self._applied_generation = 0
        self._building = False

    def _condition(self) -> asyncio.Condition:
        if self._cond is None:
            self._cond = asyncio.Condition()
        return self._cond

    def target_spec(self) -> ProjectionSpec:
        # Deltas must stack on whatever will be live next, including a spec
        # whose map is still building.
        if self._pending is not None:
            return self._pending
        if self._in_flight is not None:
            return self._in_flight
        return self.spec

    async def apply_update(self, mutate) -> ProjectionSpec:
        """Queue a spec change and wait until it (or a newer one) is live."""
        cond = self._condition()
        async with cond:
            self._pending = mutate(self.target_spec())
            self._pending_generation += 1
            my_generation = self._pending_generation
            if not self._building:
                self._building = True
                asyncio.get_running_loop().create_task(self._build_loop())
            while self._applied_generation < my_generation:
                await cond.wait()
            return self.spec

    async def _build_loop(self):
        cond = self._condition()
        loop = asyncio.get_running_loop()
        while True:
            async with cond:
                spec = self._pending
                generation = self._pending_generation
                self._pending = None
                if spec is None:
                    self._building = False
                    return
                self._in_flight = spec
            new_map = await loop.run_in_executor(None, build_projection_map, self.rig, spec)
            async with cond:
                self.spec = spec
                self.map = new_map  # atomic swap; streams pick it up next frame
                self._in_flight = None
                self._applied_generation = generation
                cond.notify_all()

    def publish(self, jpeg: bytes, timestamp_ns: int, lossless: bool):
        self.latest_jpeg = jpeg
        self.latest_timestamp_ns = timestamp_ns
        for queue in list(self.subscribers):
            if not lossless:
                while queue.qsize() >= 2:  # drop stale frames for live viewers
                    try:
                        queue.get_nowait()
                    except asyncio.QueueEmpty:
                        break
            queue.put_nowait((jpeg, timestamp_ns))

    def finish(self):
        for queue in list(self.subscribers):
            queue.put_nowait(None)


class _RuntimeState:
    """Mutable bits shared between the pump and the handlers."""

    def __init__(self):
        self.latest_frames: list[ImageFrame] | None = None
        self.source_done = False
        self.first_subscriber = asyncio.Event()
        self.pump_task: asyncio.Task | None = None


def _yaw_pitch_roll_delta(spec: ProjectionSpec, yaw_deg, pitch_deg, roll_deg) -> ProjectionSpec:
    delta = Pose(
        quat_from_yaw_pitch_roll(deg2rad(yaw_deg), deg2rad(pitch_deg), deg2rad(roll_deg)),
        np.zeros(3),
        spec.surface_pose.child_frame,
        spec.surface_pose.child_frame,
    )
    return spec.with_pose(compose(spec.surface_pose, delta))


def create_app(
    rig: CameraRig,
    specs: dict[str, ProjectionSpec],
    source,
    cloud: PointCloud | None = None,
    volumes: Sequence[ExclusionVolume] = (),
    pose_script: Sequence[ScriptedUpdate] = (),
    fps: float = 10.0,
    paced: bool = True,
    fill: tuple[int, int, int] = (0, 0, 0),
) -> web.Application:
    """Assemble the service.

    Paced mode emulates a live feed: frame sets are delivered at ``fps`` and
    a finite recording loops. ``paced=False`` is deterministic playback: the
    source runs once, as fast as subscribers drain it, with lossless
    delivery, and streams end when it is exhausted.
    """
    if not specs:
        raise ValueError("at least one view spec is required")
    app = web.Application()
    app["rig"] = rig
    app["views"] = {vid: ViewSession(vid, rig, spec) for vid, spec in specs.items()}
    app["source"] = source
    app["cloud"] = cloud
    app["volumes"] = list(volumes)
    app["script"] = sorted(pose_script, key=lambda s: s.frame)
    app["fps"] = fps
    app["paced"] = paced
    app["fill"] = fill
    app["state"] = _RuntimeState()

    app.add_routes(
        [
            web.get("/healthz", _healthz),
            web.get("/views", _list_views),
            web.get("/views/{view_id}", _get_view),
            web.post("/views/{view_id}/pose", _post_pose),
            web.post("/views/{view_id}/zoom", _post_zoom),
            web.get("/views/{view_id}/stream", _stream_mjpeg),
            web.get("/views/{view_id}/frame", _single_frame),
            web.get("/views/{view_id}/ws", _stream_ws),
            web.get("/cloud/latest", _cloud_latest),
        ]
    )
    app.on_startup.append(_start_pump)
    app.on_cleanup.append(_stop_pump)
    return app


async def _start_pump(app):
    app["state"].pump_task = asyncio.get_running_loop().create_task(_pump(app))


async def _stop_pump(app):
    task = app["state"].pump_task
    if task is not None:
        task.cancel()
        try:
            await task
        except asyncio.CancelledError:
            pass


async def _pump(app):
    """Walk the frame source, remap every view, publish to subscribers.

    Scripted updates are applied (and fully built) before the frame at their
    index is remapped, which is what makes playback runs reproducible.
    """
    loop = asyncio.get_running_loop()
    state: _RuntimeState = app["state"]
    views: dict[str, ViewSession] = app["views"]
    script: list[ScriptedUpdate] = list(app["script"])
    lossless = not app["paced"]
    if lossless:
        await state.first_subscriber.wait()
    interval = 1.0 / app["fps"] if app["fps"] > 0 else 0.0
    while True:
        for k, frames in app["source"].frame_sets():
            while script and script[0].frame <= k:
                update = script.pop(0)
                view = views.get(update.view_id)
                if view is not None:
                    await view.apply_update(
                        lambda spec, u=update: _apply_scripted(spec, u)
                    )
            state.latest_frames = frames
            timestamp = max(f.timestamp_ns for f in frames)
            for view in views.values():
                output = await loop.run_in_executor(None, remap, view.map, frames, app["fill"])
                jpeg = encode_jpeg(output)
                view.publish(jpeg, timestamp, lossless)
            if app["paced"] and interval > 0:
                await asyncio.sleep(interval)
            else:
                await asyncio.sleep(0)  # let handlers run between frames
        if not app["paced"]:
            break  # deterministic playback: one pass, then end the streams
        # Live mode: loop a finite recording like a continuous feed.
    state.source_done = True
    for view in views.values():
        view.finish()


def _apply_scripted(spec: ProjectionSpec, u: ScriptedUpdate) -> ProjectionSpec:
    out = _yaw_pitch_roll_delta(spec, u.yaw_deg, u.pitch_deg, u.roll_deg)
    if u.hfov_deg is not None:
        out = _set_zoom(out, u.hfov_deg)
    return out


def _set_zoom(spec: ProjectionSpec, hfov_deg: float) -> ProjectionSpec:
    if not isinstance(spec.surface, PerspectiveParams):
        raise _JsonError(422, "zoom is only defined for perspective views")
    if not ZOOM_MIN_DEG < hfov_deg < ZOOM_MAX_DEG:
        raise _JsonError(
            422, f"hfov_deg must be within ({ZOOM_MIN_DEG}, {ZOOM_MAX_DEG}) degrees"
        )
    return spec.with_surface(
        PerspectiveParams(spec.surface.focal_length, deg2rad(hfov_deg))
    )


class _JsonError(web.HTTPError):
    def __init__(self, status: int, message: str):
        self.status_code = status
        super().__init__(
            text=json.dumps({"error": message}), content_type="application/json"
        )


def _view_or_404(request) -> ViewSession:
    view = request.app["views"].get(request.match_info["view_id"])
    if view is None:
        raise _JsonError(404, f"unknown view '{request.match_info['view_id']}'")
    return view


def _spec_summary(view: ViewSession) -> dict:
    summary = spec_to_dict(view.spec)
    summary["view_id"] = view.view_id
    return summary


async def _healthz(request):
    return web.json_response({"status": "ok"})


async def _list_views(request):
    views = request.app["views"]
    return web.json_response({"views": [_spec_summary(v) for v in views.values()]})


async def _get_view(request):
    return web.json_response(_spec_summary(_view_or_404(request)))


async def _post_pose(request):
    view = _view_or_404(request)
    try:
        body = await request.json()
    except json.JSONDecodeError:
        raise _JsonError(400, "body must be JSON")
    if "absolute" in body:
        try:
            pose = pose_from_dict(body["absolute"], "pose")
        except CalibrationError as exc:
            raise _JsonError(422, str(exc))
        if pose.parent_frame != request.app["rig"].reference_frame:
            raise _JsonError(
                422,
                f"pose parent must be rig reference frame "
                f"'{request.app['rig'].reference_frame}'",
            )
        spec = await view.apply_update(lambda s: s.with_pose(pose))
    else:
        yaw = float(body.get("yaw_deg", 0.0))
        pitch = float(body.get("pitch_deg", 0.0))
        roll = float(body.get("roll_deg", 0.0))
        spec = await view.apply_update(
            lambda s: _yaw_pitch_roll_delta(s, yaw, pitch, roll)
        )
    return web.json_response(_spec_summary(view))


async def _post_zoom(request):
    view = _view_or_404(request)
    try:
        body = await request.json()
        hfov_deg = float(body["hfov_deg"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError):
        raise _JsonError(400, "body must be JSON with an hfov_deg number")
    await view.apply_update(lambda s: _set_zoom(s, hfov_deg))
    return web.json_response(_spec_summary(view))


def _subscribe(request, view: ViewSession) -> asyncio.Queue:
    state: _RuntimeState = request.app["state"]
    if state.source_done and not request.app["paced"]:
        raise _JsonError(503, "frame source exhausted")
    queue: asyncio.Queue = asyncio.Queue()
    view.subscribers.add(queue)
    state.first_subscriber.set()
    return queue


async def _stream_mjpeg(request):
    view = _view_or_404(request)
    queue = _subscribe(request, view)
    response = web.StreamResponse(
        status=200,
        headers={
            "Content-Type": f"multipart/x-mixed-replace; boundary={_MJPEG_BOUNDARY}",
            "Cache-Control": "no-store",
        },
    )
    await response.prepare(request)
    try:
        while True:
            item = await queue.get()
            if item is None:
                break
            jpeg, _ts = item
            head = (
                f"--{_MJPEG_BOUNDARY}\r\n"
                f"Content-Type: image/jpeg\r\nContent-Length: {len(jpeg)}\r\n\r\n"
            ).encode()
            await response.write(head + jpeg + b"\r\n")
        await response.write(f"--{_MJPEG_BOUNDARY}--\r\n".encode())
    except (ConnectionResetError, ConnectionAbortedError):
        pass  # client went away
    finally:
        view.subscribers.discard(queue)
    return response


async def _stream_ws(request):
    view = _view_or_404(request)
    ws = web.WebSocketResponse()
    await ws.prepare(request)
    queue = _subscribe(request, view)
    try:
        while True:
            item = await queue.get()
            if item is None:
                break
            jpeg, ts = item
            header = struct.pack("<QII", ts, view.spec.width, view.spec.height)
            await ws.send_bytes(header + jpeg)
            if ws.closed:
                break
    finally:
        view.subscribers.discard(queue)
    await ws.close()
    return ws


async def _single_frame(request):
    view = _view_or_404(request)
    request.app["state"].first_subscriber.set()
    if view.latest_jpeg is None:
        for _ in range(200):  # allow the pump to produce the first frame
            await asyncio.sleep(0.02)
            if view.latest_jpeg is not None:
                break
    if view.latest_jpeg is None:
        raise _JsonError(503, "no frame available yet")
    return web.Response(body=view.latest_jpeg, content_type="image/jpeg")


async def _cloud_latest(request):
    cloud: PointCloud | None = request.app["cloud"]
    rig: CameraRig = request.app["rig"]
    if cloud is None or rig.lidar_extrinsic is None:
        raise _JsonError(404, "no Lidar cloud configured")
    frames = request.app["state"].latest_frames
    if frames is None:
        raise _JsonError(503, "no frames received yet")
    stamped = PointCloud(
        frame=cloud.frame,
        points=cloud.points,
        intensity=cloud.intensity,
        timestamp_ns=max(f.timestamp_ns for f in frames),
    )
    colored = colorize(rig, frames, stamped, volumes=request.app["volumes"])
    return web.Response(text=ply_dumps(colored), content_type="text/plain")


class ServiceRunner:
    """Run the app on a background thread with its own event loop.

    Used by tests (bind port 0, inspect ``port``) and by the CLI, which just
    never calls stop().
    """

    def __init__(self, app: web.Application, host: str = "127.0.0.1", port: int = 0):
        self.app = app
        self.host = host
        self.port = port
        self._loop: asyncio.AbstractEventLoop | None = None
        self._thread: threading.Thread | None = None
        self._started = threading.Event()

    def start(self):
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()
        if not self._started.wait(timeout=30):
            raise RuntimeError("service failed to start within 30 s")
        return self

    def _run(self):
        self._loop = asyncio.new_event_loop()
        asyncio.set_event_loop(self._loop)
        runner = web.AppRunner(self.app)
        self._loop.run_until_complete(runner.setup())
        site = web.TCPSite(runner, self.host, self.port)
        self._loop.run_until_complete(site.start())
        self.port = runner.addresses[0][1]  # resolve the ephemeral port
        self._runner = runner
        self._started.set()
        try:
            self._loop.run_forever()
        finally:
            self._loop.run_until_complete(runner.cleanup())
            self._loop.close()

    def stop(self):
        if self._loop is not None:
            self._loop.call_soon_threadsafe(self._loop.stop)
        if self._thread is not None:
            self._thread.join(timeout=10)
