import json

import numpy as np
import pytest

import omniview.cli as cli
from omniview import presets
from omniview.calibration import save_projection_spec, save_rig
from omniview.colorizer import load_ply
from omniview.frames import load_image, save_image
from omniview.oracle import render_rig, save_scene


@pytest.fixture(scope="module")
def workspace(tmp_path_factory, small_rig, room_scene, small_frames):
    root = tmp_path_factory.mktemp("cli")
    save_rig(small_rig, root / "rig.json")
    save_scene(room_scene, root / "scene.json")
    save_projection_spec(
        presets.forward_view_spec(width=160, height=80), root / "forward.json"
    )
    images = root / "images"
    for frame in small_frames:
        save_image(frame, images / f"{frame.camera_name}.png")
    return root


class TestProject:
    def test_projects_and_caches(self, workspace, tmp_path):
        out_png = tmp_path / "view.png"
        cache = tmp_path / "view.lut"
        code = cli.main(
            [
                "project",
                "--rig", str(workspace / "rig.json"),
                "--spec", str(workspace / "forward.json"),
                "--images", str(workspace / "images"),
                "--out", str(out_png),
                "--lut-cache", str(cache),
            ]
        )
        assert code == 0
        assert out_png.exists() and cache.exists()
        first = out_png.read_bytes()
        # second run reuses the cache and reproduces the same bytes
        assert cli.main(
            [
                "project",
                "--rig", str(workspace / "rig.json"),
                "--spec", str(workspace / "forward.json"),
                "--images", str(workspace / "images"),
                "--out", str(out_png),
                "--lut-cache", str(cache),
            ]
        ) == 0
        assert out_png.read_bytes() == first

    def test_missing_camera_image_exit_2(self, workspace, tmp_path, capsys):
        empty = tmp_path / "empty"
        empty.mkdir()
        code = cli.main(
            [
                "project",
                "--rig", str(workspace / "rig.json"),
                "--spec", str(workspace / "forward.json"),
                "--images", str(empty),
                "--out", str(tmp_path / "x.png"),
            ]
        )
        assert code == 2
        assert "cam_front" in capsys.readouterr().err

    def test_invalid_rig_exit_2(self, workspace, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{}")
        code = cli.main(
            [
                "project",
                "--rig", str(bad),
                "--spec", str(workspace / "forward.json"),
                "--images", str(workspace / "images"),
                "--out", str(tmp_path / "x.png"),
            ]
        )
        assert code == 2

    def test_unknown_flag_exit_2(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["project", "--bogus"])
        assert exc.value.code == 2

    def test_help_lists_commands(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["--help"])
        assert exc.value.code == 0
        out = capsys.readouterr().out
        for command in ("project", "colorize", "benchmark", "render-synthetic", "serve"):
            assert command in out


class TestColorize:
    def test_colorizes_cloud(self, workspace, tmp_path):
        cloud_path = tmp_path / "in.ply"
        pts = np.array([[0.0, 0.1, 2.0], [0.0, 0.1, -2.0], [2.4, 0.0, 0.0]])
        rows = "\n".join(f"{p[0]} {p[1]} {p[2]}" for p in pts)
        cloud_path.write_text(
            "ply\nformat ascii 1.0\nelement vertex 3\n"
            "property float x\nproperty float y\nproperty float z\nend_header\n"
            + rows + "\n"
        )
        out_path = tmp_path / "out.ply"
        code = cli.main(
            [
                "colorize",
                "--rig", str(workspace / "rig.json"),
                "--images", str(workspace / "images"),
                "--cloud", str(cloud_path),
                "--out", str(out_path),
            ]
        )
        assert code == 0
        colored = load_ply(out_path)
        assert len(colored) == 3

    def test_missing_cloud_exit_3(self, workspace, tmp_path):
        code = cli.main(
            [
                "colorize",
                "--rig", str(workspace / "rig.json"),
                "--images", str(workspace / "images"),
                "--cloud", str(tmp_path / "nope.ply"),
                "--out", str(tmp_path / "out.ply"),
            ]
        )
        assert code == 3


class TestBenchmark:
    def test_report_schema_and_grid(self, workspace, tmp_path, monkeypatch):
        monkeypatch.setattr(
            cli, "_BENCH_GRID",
            [("perspective", 64, 32), ("perspective", 128, 64), ("mercator", 128, 64)],
        )
        out = tmp_path / "report.json"
        code = cli.main(
            [
                "benchmark",
                "--rig", str(workspace / "rig.json"),
                "--iterations", "10",
                "--out", str(out),
            ]
        )
        assert code == 0
        report = json.loads(out.read_text())
        assert report["schema"] == "omniview-bench/1"
        assert report["iterations"] == 10
        assert len(report["rows"]) == 3
        for row in report["rows"]:
            assert row["mapping"]["mean_ms"] > 0
            assert row["map_operation"]["mean_ms"] > 0
            assert row["mapping"]["runs"] == 10

    def test_too_few_iterations_exit_2(self, workspace, tmp_path):
        code = cli.main(
            [
                "benchmark",
                "--rig", str(workspace / "rig.json"),
                "--iterations", "3",
                "--out", str(tmp_path / "r.json"),
            ]
        )
        assert code == 2


class TestRenderSynthetic:
    def test_renders_cameras_and_reference(self, workspace, tmp_path):
        out_dir = tmp_path / "render"
        code = cli.main(
            [
                "render-synthetic",
                "--scene", str(workspace / "scene.json"),
                "--rig", str(workspace / "rig.json"),
                "--out", str(out_dir),
                "--reference-spec", str(workspace / "forward.json"),
            ]
        )
        assert code == 0
        assert (out_dir / "cam_front.png").exists()
        assert (out_dir / "cam_back.png").exists()
        ref = load_image(out_dir / "reference.png")
        assert (ref.width, ref.height) == (160, 80)

    def test_deterministic_output(self, workspace, tmp_path, small_rig, room_scene):
        out_dir = tmp_path / "render"
        cli.main(
            [
                "render-synthetic",
                "--scene", str(workspace / "scene.json"),
                "--rig", str(workspace / "rig.json"),
                "--out", str(out_dir),
            ]
        )
        direct = render_rig(room_scene, small_rig)
        disk = load_image(out_dir / "cam_front.png")
        assert np.array_equal(disk.data, direct[0].data)


class TestFixtures:
    def test_writes_complete_demo(self, tmp_path):
        out = tmp_path / "demo"
        code = cli.main(["fixtures", "--out", str(out), "--frames", "2", "--points", "500"])
        assert code == 0
        for rel in (
            "rig.json",
            "scene_room.json",
            "specs/forward.json",
            "cloud.ply",
            "exclusions.json",
            "images/cam_front.png",
            "source/cam_back/000001.png",
        ):
            assert (out / rel).exists(), rel
        assert len(load_ply(out / "cloud.ply")) == 500
