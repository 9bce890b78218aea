import numpy as np
import pytest

from safeland.config import RunConfig
from safeland.dataset import FrameBundle, load_class_grid
from safeland.geometry import CameraIntrinsics
from safeland.grid import CellClass
from safeland.pipeline import STAGES, compute_frame_clouds, process_dataset, write_timing_log
from safeland.sim import (
    Box,
    SceneSpec,
    TrajectorySpec,
    build_scene,
    evaluate_map,
    render_frame,
    simulate_dataset,
)

from conftest import down_pose

INTR = CameraIntrinsics(60.0, 60.0, 40.0, 30.0, 80, 60)


def small_dataset(tmp_path, scene_spec=None, frames=6, noise=0.005, seed=0):
    scene_spec = scene_spec or SceneSpec((0, 6, 0, 6))
    traj = TrajectorySpec(pattern="hover", altitude=3.0, speed=1.0, frame_rate=2, duration=frames / 2)
    out = tmp_path / "data"
    simulate_dataset(scene_spec, traj, out, INTR, noise_sigma=noise, seed=seed)
    return out


class TestComputeFrameClouds:
    def test_flat_floor_mostly_safe(self):
        scene, _ = build_scene(SceneSpec((0, 6, 0, 6)))
        fb = render_frame(scene, down_pose(3, 3, 3.0), INTR, 0.005, rng_seed=1)
        safe, unsafe = compute_frame_clouds(fb, RunConfig(), 0)
        assert len(safe) > 100
        assert len(unsafe) < len(safe) * 0.05
        assert np.abs(safe.xyz[:, 2]).max() < 0.1  # on the world floor

    def test_obstacle_labels_go_unsafe(self):
        spec = SceneSpec((0, 6, 0, 6), obstacles=(Box(3, 3, 1, 1, 0.5, 2),))
        scene, _ = build_scene(spec)
        fb = render_frame(scene, down_pose(3, 3, 3.0), INTR, 0.0, rng_seed=1)
        safe, unsafe = compute_frame_clouds(fb, RunConfig(), 0)
        assert len(unsafe) > 0
        # no safe point inside the box footprint
        inside = (
            (safe.xyz[:, 0] > 2.5) & (safe.xyz[:, 0] < 3.5)
            & (safe.xyz[:, 1] > 2.5) & (safe.xyz[:, 1] < 3.5)
        )
        assert not inside.any()


class TestProcessDataset:
    def test_flat_floor_all_safe_after_four_frames(self, tmp_path):
        data = small_dataset(tmp_path, frames=6)
        result = process_dataset(data, RunConfig())
        assert result.frames == 6
        grid = result.grid
        cg = grid.class_grid(RunConfig().grid)
        # interior of the footprint is fully safe after >= 4 hover observations
        interior = cg.classes[5:-5, 5:-5]
        assert interior.size > 0
        assert (interior == int(CellClass.SAFE)).all()

    def test_all_obstacle_labels_no_safe_cells(self, tmp_path):
        data = small_dataset(tmp_path, scene_spec=SceneSpec((0, 6, 0, 6), floor_class=2))
        result = process_dataset(data, RunConfig())
        cg = result.grid.class_grid(RunConfig().grid)
        assert not (cg.classes == int(CellClass.SAFE)).any()

    def test_zero_frame_dataset(self, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        result = process_dataset(empty, RunConfig())
        assert result.frames == 0
        assert result.grid.log_odds.size == 0

    def test_missing_dataset_dir(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            process_dataset(tmp_path / "nope", RunConfig())

    def test_missing_intrinsics(self, tmp_path):
        data = small_dataset(tmp_path, frames=2)
        (data / "intrinsics.txt").unlink()
        with pytest.raises(FileNotFoundError):
            process_dataset(data, RunConfig())

    def test_deterministic_across_runs(self, tmp_path):
        data = small_dataset(tmp_path, frames=4, noise=0.01, seed=3)
        cfg = RunConfig().with_overrides({"seed": 3})
        a = process_dataset(data, cfg)
        b = process_dataset(data, cfg)
        np.testing.assert_array_equal(a.grid.log_odds, b.grid.log_odds)
        np.testing.assert_array_equal(a.grid.observed, b.grid.observed)

    def test_threads_match_single_threaded(self, tmp_path):
        spec = SceneSpec((0, 6, 0, 6), obstacles=(Box(2, 2, 0.8, 0.8, 0.5, 2),))
        data = small_dataset(tmp_path, scene_spec=spec, frames=6, noise=0.01)
        one = process_dataset(data, RunConfig().with_overrides({"threads": 1}))
        four = process_dataset(data, RunConfig().with_overrides({"threads": 4}))
        np.testing.assert_array_equal(one.grid.log_odds, four.grid.log_odds)

    def test_corruption_degrades_but_runs(self, tmp_path):
        data = small_dataset(tmp_path, frames=6)
        clean = process_dataset(data, RunConfig())
        noisy = process_dataset(data, RunConfig().with_overrides({"label_corruption": 0.3}))
        truth = load_class_grid(data / "truth.pgm")
        cfg = RunConfig()
        acc_clean = evaluate_map(clean.grid, truth, cfg.grid).acc
        acc_noisy = evaluate_map(noisy.grid, truth, cfg.grid).acc
        assert acc_clean >= acc_noisy

    def test_cloud_dumps_written(self, tmp_path):
        data = small_dataset(tmp_path, frames=2)
        dump = tmp_path / "clouds"
        process_dataset(data, RunConfig(), dump_cloud_dir=dump)
        assert (dump / "000000_safe.xyz").exists()
        assert (dump / "000001_unsafe.xyz").exists()
        first = (dump / "000000_safe.xyz").read_text().splitlines()[0].split()
        assert len(first) == 3


def test_timing_log_format(tmp_path):
    data = small_dataset(tmp_path, frames=3)
    result = process_dataset(data, RunConfig())
    log = tmp_path / "timing.csv"
    write_timing_log(log, result.timings)
    lines = log.read_text().splitlines()
    header = lines[0].split(",")
    assert header[0] == "frame"
    assert header[1:] == [f"{s}_ms" for s in STAGES] + ["total_ms"]
    assert len(lines) == 1 + 3
    for row in lines[1:]:
        cells = row.split(",")
        stage_sum = sum(float(v) for v in cells[1:-1])
        total = float(cells[-1])
        assert stage_sum <= total
