"""Command-line entry points.

Exit codes: 0 success, 2 validation/usage error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import presets
from .bench import configure_allocator, machine_metadata, time_interleaved
from .calibration import (
    CalibrationError,
    CameraRig,
    load_projection_spec,
    load_rig,
    save_projection_spec,
    save_rig,
)
from .colorizer import (
    colorize,
    load_exclusion_volumes,
    load_ply,
    save_exclusion_volumes,
    save_ply,
)
from .frames import ImageFrame, load_image, save_image
from .geometry import Pose
from .mapper import build_projection_map, load_projection_map, remap
from .oracle import load_scene, raycast, reference_view, render_rig, save_scene
from .service import (
    DirectorySource,
    SceneSource,
    ServiceRunner,
    create_app,
    load_pose_script,
)
from .surfaces import MercatorParams, PerspectiveParams, ProjectionSpec, SphericalParams


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CalibrationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="omniview",
        description="Virtual multi-camera projections and Lidar cloud colorization.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("project", help="remap camera images into a virtual view")
    p.add_argument("--rig", required=True, help="rig calibration JSON")
    p.add_argument("--spec", required=True, help="projection spec JSON")
    p.add_argument("--images", required=True, help="directory with <camera_name>.png files")
    p.add_argument("--out", required=True, help="output PNG path")
    p.add_argument("--lut-cache", help="binary lookup-table cache to reuse or create")
    p.add_argument("--fill", default="0,0,0", help="R,G,B fill for uncovered pixels")
    p.set_defaults(func=_cmd_project)

    p = sub.add_parser("colorize", help="colorize a Lidar point cloud from camera images")
    p.add_argument("--rig", required=True)
    p.add_argument("--images", required=True, help="directory with <camera_name>.png files")
    p.add_argument("--cloud", required=True, help="input ASCII PLY (x y z [intensity])")
    p.add_argument("--out", required=True, help="output PLY with colors")
    p.add_argument("--exclusions", help="robot-body exclusion volumes JSON")
    p.set_defaults(func=_cmd_colorize)

    p = sub.add_parser("benchmark", help="time projection mapping and the map operation")
    p.add_argument("--rig", required=True)
    p.add_argument("--spec", help="extra spec to benchmark alongside the standard grid")
    p.add_argument("--iterations", type=int, default=10)
    p.add_argument("--out", required=True, help="report JSON path")
    p.set_defaults(func=_cmd_benchmark)

    p = sub.add_parser("render-synthetic", help="ray-cast a scene through a rig")
    p.add_argument("--scene", required=True, help="scene JSON")
    p.add_argument("--rig", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--reference-spec", help="also render the ideal view for this spec")
    p.set_defaults(func=_cmd_render_synthetic)

    p = sub.add_parser("serve", help="stream steerable virtual views over HTTP")
    p.add_argument("--rig", required=True)
    p.add_argument("--specs", required=True, help="comma-separated spec JSON paths")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--source", help="recorded frame directory (per-camera subdirs)")
    src.add_argument("--scene", help="scene JSON for synthetic playback")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--host", default="0.0.0.0")
    p.add_argument("--fps", type=float, default=10.0)
    p.add_argument("--no-pace", action="store_true", help="deterministic playback: run the source as fast as clients drain it")
    p.add_argument("--pose-script", help="scripted pose updates JSON (frame-indexed)")
    p.add_argument("--cloud", help="PLY cloud served colorized at /cloud/latest")
    p.add_argument("--exclusions", help="exclusion volumes JSON for cloud colorization")
    p.add_argument(
        "--frames", type=int,
        help="synthetic frame sets per playback pass (unpaced mode stops after one pass)",
    )
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("fixtures", help="write a runnable demo fixture set")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--frames", type=int, default=5, help="recorded frame sets to generate")
    p.add_argument("--points", type=int, default=18000, help="synthetic scan size")
    p.set_defaults(func=_cmd_fixtures)
    return parser


def _parse_fill(text: str) -> tuple[int, int, int]:
    parts = text.split(",")
    if len(parts) != 3:
        raise ValueError("--fill expects R,G,B")
    fill = tuple(int(p) for p in parts)
    if any(not 0 <= c <= 255 for c in fill):
        raise ValueError("--fill components must be in [0, 255]")
    return fill


def _load_frames(rig: CameraRig, images_dir) -> list[ImageFrame]:
    frames = []
    for cam in rig.cameras:
        path = Path(images_dir) / f"{cam.name}.png"
        if not path.exists():
            raise ValueError(f"missing image for camera '{cam.name}': {path}")
        frames.append(load_image(path, camera_name=cam.name))
    return frames


def _cmd_project(args) -> int:
    rig = load_rig(args.rig)
    spec = load_projection_spec(args.spec)
    frames = _load_frames(rig, args.images)
    pmap = None
    if args.lut_cache and Path(args.lut_cache).exists():
        try:
            pmap = load_projection_map(args.lut_cache, rig, spec)
        except ValueError as exc:
            print(f"lut cache ignored: {exc}", file=sys.stderr)
    if pmap is None:
        pmap = build_projection_map(rig, spec)
        if args.lut_cache:
            pmap.save(args.lut_cache)
    out = remap(pmap, frames, fill=_parse_fill(args.fill))
    save_image(out, args.out)
    print(f"wrote {args.out} ({out.width}x{out.height}, {pmap.coverage():.1%} covered)")
    return 0


def _cmd_colorize(args) -> int:
    rig = load_rig(args.rig)
    frames = _load_frames(rig, args.images)
    cloud = load_ply(args.cloud)
    volumes = load_exclusion_volumes(args.exclusions) if args.exclusions else []
    colored = colorize(rig, frames, cloud, volumes=volumes)
    save_ply(colored, args.out)
    uncolored = int(np.sum(colored.source_camera < 0))
    print(f"wrote {args.out} ({len(colored)} points, {uncolored} uncolored)")
    return 0


_BENCH_GRID = [
    ("perspective", 512, 256),
    ("perspective", 1024, 512),
    ("perspective", 2048, 1024),
    ("mercator", 1024, 512),
    ("spherical", 512, 512),
]


def _grid_spec(rig: CameraRig, kind: str, width: int, height: int) -> ProjectionSpec:
    ref = rig.reference_frame
    if kind == "perspective":
        surface = PerspectiveParams(focal_length=1.0, horizontal_fov=np.radians(130.0))
    elif kind == "mercator":
        surface = MercatorParams(vertical_half_fov=np.radians(45.0), cylinder_radius=2.0)
    else:
        surface = SphericalParams(fov=np.radians(180.0), sphere_radius=1.0)
    return ProjectionSpec(surface, width, height, Pose.identity(ref, "bench_view"))


def _cmd_benchmark(args) -> int:
    if args.iterations < 10:
        raise ValueError("--iterations must be at least 10")
    configure_allocator()
    rig = load_rig(args.rig)
    rng = np.random.default_rng(0)
    frames = [
        ImageFrame(
            rng.integers(0, 256, (c.intrinsics.height, c.intrinsics.width, 3), dtype=np.uint8),
            camera_name=c.name,
        )
        for c in rig.cameras
    ]
    jobs: list[tuple[str, int, int, ProjectionSpec]] = [
        (kind, w, h, _grid_spec(rig, kind, w, h)) for kind, w, h in _BENCH_GRID
    ]
    if args.spec:
        spec = load_projection_spec(args.spec)
        jobs.append(("custom", spec.width, spec.height, spec))

    build_cases = {}
    remap_cases = {}
    for i, (kind, w, h, spec) in enumerate(jobs):
        key = f"{kind}_{w}x{h}_{i}"
        build_cases[key] = lambda s=spec: build_projection_map(rig, s)
        pmap = build_projection_map(rig, spec)
        remap(pmap, frames)  # warm the gather plan
        remap_cases[key] = lambda m=pmap: remap(m, frames)
    build_stats = time_interleaved(build_cases, rounds=args.iterations)
    remap_stats = time_interleaved(remap_cases, rounds=args.iterations)

    rows = []
    for i, (kind, w, h, _spec) in enumerate(jobs):
        key = f"{kind}_{w}x{h}_{i}"
        rows.append(
            {
                "projection": kind,
                "width": w,
                "height": h,
                "mapping": build_stats[key].to_dict(),
                "map_operation": remap_stats[key].to_dict(),
            }
        )
    report = {
        "schema": "omniview-bench/1",
        "machine": machine_metadata(),
        "iterations": args.iterations,
        "rows": rows,
    }
    Path(args.out).write_text(json.dumps(report, indent=2) + "\n")
    for row in rows:
        print(
            f"{row['projection']:>12} {row['width']}x{row['height']}: "
            f"mapping {row['mapping']['mean_ms']:8.2f} ms, "
            f"map op {row['map_operation']['mean_ms']:7.2f} ms"
        )
    print(f"wrote {args.out}")
    return 0


def _cmd_render_synthetic(args) -> int:
    scene = load_scene(args.scene)
    rig = load_rig(args.rig)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for cam in rig.cameras:
        frame = raycast(scene, cam)
        save_image(frame, out_dir / f"{cam.name}.png")
        print(f"wrote {out_dir / (cam.name + '.png')}")
    if args.reference_spec:
        spec = load_projection_spec(args.reference_spec)
        ref = reference_view(scene, spec)
        save_image(ref, out_dir / "reference.png")
        print(f"wrote {out_dir / 'reference.png'}")
    return 0


def _cmd_serve(args) -> int:
    configure_allocator()
    rig = load_rig(args.rig)
    specs = {}
    for path in args.specs.split(","):
        spec = load_projection_spec(path.strip())
        specs[Path(path.strip()).stem] = spec
    if args.source:
        source = DirectorySource(args.source, rig.camera_names())
    else:
        source = SceneSource(load_scene(args.scene), rig, count=args.frames)
    cloud = load_ply(args.cloud) if args.cloud else None
    volumes = load_exclusion_volumes(args.exclusions) if args.exclusions else []
    script = load_pose_script(args.pose_script) if args.pose_script else []
    port = int(os.environ.get("OMNIVIEW_PORT", args.port))
    app = create_app(
        rig,
        specs,
        source,
        cloud=cloud,
        volumes=volumes,
        pose_script=script,
        fps=args.fps,
        paced=not args.no_pace,
    )
    runner = ServiceRunner(app, host=args.host, port=port).start()
    print(f"serving {list(specs)} on http://{args.host}:{runner.port}")
    try:
        runner._thread.join()
    except KeyboardInterrupt:
        runner.stop()
    return 0


def _cmd_fixtures(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rig = presets.insta360_like_rig()
    save_rig(rig, out / "rig.json")
    room = presets.checker_room_scene()
    save_scene(room, out / "scene_room.json")
    save_scene(presets.ground_checker_scene(), out / "scene_ground.json")
    spec_dir = out / "specs"
    spec_dir.mkdir(exist_ok=True)
    save_projection_spec(presets.forward_view_spec(), spec_dir / "forward.json")
    save_projection_spec(presets.mercator_panorama_spec(), spec_dir / "panorama.json")
    save_projection_spec(presets.spherical_view_spec(), spec_dir / "sphere.json")
    save_projection_spec(presets.birdseye_spec(), spec_dir / "birdseye.json")
    save_exclusion_volumes(presets.robot_body_volumes(), out / "exclusions.json")

    frames = render_rig(room, rig)
    img_dir = out / "images"
    img_dir.mkdir(exist_ok=True)
    for frame in frames:
        save_image(frame, img_dir / f"{frame.camera_name}.png")
    src_dir = out / "source"
    for k in range(args.frames):
        for frame in frames:
            save_image(frame, src_dir / frame.camera_name / f"{k:06d}.png")

    from .geometry import invert, transform_points
    from .oracle import sample_surface_points

    rng = np.random.default_rng(42)
    pts_ref, _colors = sample_surface_points(room, args.points, rng)
    pts_lidar = transform_points(invert(rig.lidar_extrinsic), pts_ref)
    intensity = rng.uniform(0.0, 100.0, len(pts_lidar))
    header = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(pts_lidar)}",
        "property float x",
        "property float y",
        "property float z",
        "property float intensity",
        "end_header",
    ]
    rows = [
        f"{p[0]:.6f} {p[1]:.6f} {p[2]:.6f} {i:.3f}" for p, i in zip(pts_lidar, intensity)
    ]
    (out / "cloud.ply").write_text("\n".join(header + rows) + "\n")
    print(f"wrote demo fixtures to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
