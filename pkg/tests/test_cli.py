import numpy as np
import pytest
from click.testing import CliRunner

from safeland import dataset as dsio
from safeland.cli import main
from safeland.config import load_config
from safeland.formats import read_pgm, write_pgm, write_kv
from safeland.grid import CellClass, ClassGrid

SIM_ARGS = ["--width", "80", "--height", "60", "--fx", "60", "--fy", "60"]


@pytest.fixture
def runner():
    return CliRunner()


def write_specs(tmp_path, boxes=("2 2 0.8 0.8 0.5 2",), duration=3, pattern="hover"):
    scene = tmp_path / "scene.txt"
    lines = ["extent=0 6 0 6", "floor_class=0", "seed=1"]
    lines += [f"box={b}" for b in boxes]
    scene.write_text("\n".join(lines) + "\n")
    traj = tmp_path / "traj.txt"
    traj.write_text(
        f"pattern={pattern}\naltitude=3\nspeed=1\nframe_rate=2\nduration={duration}\n"
    )
    return scene, traj


class TestSimulate:
    def test_writes_expected_layout(self, runner, tmp_path):
        scene, traj = write_specs(tmp_path, duration=5)
        out = tmp_path / "data"
        result = runner.invoke(main, ["simulate", str(scene), str(traj), str(out)] + SIM_ARGS)
        assert result.exit_code == 0, result.output
        frames = dsio.list_frame_dirs(out)
        assert len(frames) == 10
        for name in ("depth.pgm", "labels.pgm", "pose.txt"):
            assert (frames[0] / name).is_file()
        for name in ("intrinsics.txt", "classes.txt", "truth.pgm", "truth.hdr"):
            assert (out / name).is_file()

    def test_empty_floor_truth_all_safe(self, runner, tmp_path):
        scene = tmp_path / "scene.txt"
        scene.write_text("extent=0 4 0 4\n")
        traj = tmp_path / "traj.txt"
        traj.write_text("pattern=hover\naltitude=2\nframe_rate=1\nduration=2\n")
        out = tmp_path / "d"
        result = runner.invoke(main, ["simulate", str(scene), str(traj), str(out)] + SIM_ARGS)
        assert result.exit_code == 0, result.output
        truth = read_pgm(out / "truth.pgm")
        assert (truth == 0).all()

    def test_malformed_spec_line_reports_line_number(self, runner, tmp_path):
        scene = tmp_path / "scene.txt"
        scene.write_text("extent=0 4 0 4\nbox=1 2\n")
        traj = tmp_path / "traj.txt"
        traj.write_text("pattern=hover\naltitude=2\nframe_rate=1\nduration=1\n")
        result = runner.invoke(main, ["simulate", str(scene), str(traj), str(tmp_path / "o")] + SIM_ARGS)
        assert result.exit_code == 2
        assert ":2:" in result.output

    def test_missing_spec_file_is_io_error(self, runner, tmp_path):
        result = runner.invoke(
            main, ["simulate", str(tmp_path / "no.txt"), str(tmp_path / "no2.txt"), str(tmp_path / "o")]
        )
        assert result.exit_code == 3


class TestProcess:
    def test_outputs_and_config_echo(self, runner, tmp_path):
        scene, traj = write_specs(tmp_path, duration=3)
        data, out = tmp_path / "data", tmp_path / "out"
        assert runner.invoke(main, ["simulate", str(scene), str(traj), str(data)] + SIM_ARGS).exit_code == 0
        result = runner.invoke(main, ["process", str(data), "-o", str(out), "--seed", "4"])
        assert result.exit_code == 0, result.output
        for name in ("map.pgm", "map.hdr", "timing.csv", "config.txt"):
            assert (out / name).is_file()
        cfg = load_config(out / "config.txt")
        assert cfg.seed == 4

    def test_config_echo_reproduces_map(self, runner, tmp_path):
        scene, traj = write_specs(tmp_path, duration=3)
        data = tmp_path / "data"
        runner.invoke(main, ["simulate", str(scene), str(traj), str(data)] + SIM_ARGS)
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        assert runner.invoke(
            main, ["process", str(data), "-o", str(out1), "--seed", "9", "--leaf", "0.15"]
        ).exit_code == 0
        assert runner.invoke(
            main, ["process", str(data), "-o", str(out2), "--config", str(out1 / "config.txt")]
        ).exit_code == 0
        assert (out1 / "map.pgm").read_bytes() == (out2 / "map.pgm").read_bytes()

    def test_zero_frame_dataset_succeeds(self, runner, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        out = tmp_path / "out"
        result = runner.invoke(main, ["process", str(empty), "-o", str(out)])
        assert result.exit_code == 0
        assert read_pgm(out / "map.pgm").shape == (0, 0)

    def test_missing_dataset_exit_3(self, runner, tmp_path):
        result = runner.invoke(main, ["process", str(tmp_path / "nope"), "-o", str(tmp_path / "o")])
        assert result.exit_code == 3

    def test_bad_flag_combo_exit_2(self, runner, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        result = runner.invoke(
            main, ["process", str(empty), "-o", str(tmp_path / "o"), "--alpha", "0.9", "--beta", "0.3"]
        )
        assert result.exit_code == 2


def write_map(tmp_path, classes, name="map.pgm", resolution=0.1):
    cg = ClassGrid(np.asarray(classes, dtype=np.uint8), (0.0, 0.0), resolution)
    dsio.save_class_grid(tmp_path / name, cg)
    return tmp_path / name


class TestSelect:
    def test_no_site_exit_1(self, runner, tmp_path):
        path = write_map(tmp_path, np.full((8, 8), int(CellClass.UNKNOWN)))
        result = runner.invoke(main, ["select", str(path), "--drone", "0", "0", "1"])
        assert result.exit_code == 1
        assert "NO_SITE" in result.output

    def test_single_block_center(self, runner, tmp_path):
        classes = np.full((9, 9), int(CellClass.UNKNOWN))
        classes[2:7, 2:7] = int(CellClass.SAFE)
        path = write_map(tmp_path, classes)
        result = runner.invoke(
            main, ["select", str(path), "--drone", "0", "0", "1", "-o", str(tmp_path / "site.txt")]
        )
        assert result.exit_code == 0, result.output
        x, y, cost, j_d, j_un = map(float, result.output.split())
        assert (x, y) == pytest.approx((0.45, 0.45))  # center cell (4,4)
        assert (tmp_path / "site.txt").read_text().strip() == result.output.strip()

    def test_annotated_map_written(self, runner, tmp_path):
        classes = np.full((9, 9), int(CellClass.UNKNOWN))
        classes[2:7, 2:7] = int(CellClass.SAFE)
        path = write_map(tmp_path, classes)
        ann = tmp_path / "ann.pgm"
        result = runner.invoke(
            main, ["select", str(path), "--drone", "0", "0", "1", "--annotate", str(ann)]
        )
        assert result.exit_code == 0
        image = read_pgm(ann)
        assert (image == 64).sum() == 1
        assert image[4, 4] == 64

    def test_two_blocks_match_bruteforce(self, runner, tmp_path):
        classes = np.full((9, 20), int(CellClass.UNKNOWN))
        classes[2:7, 1:6] = int(CellClass.SAFE)
        classes[2:7, 12:19] = int(CellClass.SAFE)
        path = write_map(tmp_path, classes)
        result = runner.invoke(main, ["select", str(path), "--drone", "1.6", "0.45", "1"])
        assert result.exit_code == 0
        x, y, cost, j_d, j_un = map(float, result.output.split())

        # brute-force oracle over all 5x5 windows
        from safeland.selector import SelectorConfig

        cfg = SelectorConfig()
        side = 5
        nonsafe = np.argwhere(classes != int(CellClass.SAFE))
        best = None
        for r in range(9 - side + 1):
            for c in range(20 - side + 1):
                if not (classes[r : r + side, c : c + side] == int(CellClass.SAFE)).all():
                    continue
                iy, ix = r + 2, c + 2
                cx, cy = ix * 0.1 + 0.05, iy * 0.1 + 0.05
                d = np.sqrt((nonsafe[:, 0] - iy) ** 2 + (nonsafe[:, 1] - ix) ** 2).min() * 0.1
                ju = min(d, cfg.clearance_cap)
                jd = np.linalg.norm(np.array([1.6, 0.45, 1.0]) - np.array([cx, cy, 0.0]))
                key = (cfg.alpha * jd + cfg.beta / ju, jd, iy, ix)
                if best is None or key < best[0]:
                    best = (key, (cx, cy))
        assert (x, y) == pytest.approx(best[1])

    def test_malformed_map_exit_2(self, runner, tmp_path):
        write_pgm(tmp_path / "bad.pgm", np.full((3, 3), 9, dtype=np.uint8))
        write_kv(tmp_path / "bad.hdr", {"origin_x": "0", "origin_y": "0", "resolution": "0.1"})
        result = runner.invoke(main, ["select", str(tmp_path / "bad.pgm"), "--drone", "0", "0", "1"])
        assert result.exit_code == 2


class TestEvaluate:
    def test_map_equals_truth(self, runner, tmp_path):
        classes = np.zeros((6, 6), dtype=np.uint8)
        classes[3:, :] = int(CellClass.UNSAFE)
        m = write_map(tmp_path, classes, "m.pgm")
        t = write_map(tmp_path, classes, "t.pgm")
        result = runner.invoke(main, ["evaluate", str(m), str(t)])
        assert result.exit_code == 0
        assert "acc=1.000000" in result.output

    def test_inverted_map(self, runner, tmp_path):
        classes = np.zeros((6, 6), dtype=np.uint8)
        m = write_map(tmp_path, classes, "m.pgm")
        t = write_map(tmp_path, np.full((6, 6), int(CellClass.UNSAFE)), "t.pgm")
        result = runner.invoke(main, ["evaluate", str(m), str(t)])
        assert "acc=0.000000" in result.output

    def test_reference_confusion(self, runner, tmp_path):
        pred = np.zeros((1, 10), dtype=np.uint8)
        truth = np.zeros((1, 10), dtype=np.uint8)
        pred[0, :3] = 0;   truth[0, :3] = 0                      # tp x3
        pred[0, 3:7] = 128; truth[0, 3:7] = 128                  # tn x4
        pred[0, 7:9] = 0;  truth[0, 7:9] = 128                   # fp x2
        pred[0, 9] = 128;  truth[0, 9] = 0                       # fn x1
        m = write_map(tmp_path, pred, "m.pgm")
        t = write_map(tmp_path, truth, "t.pgm")
        result = runner.invoke(main, ["evaluate", str(m), str(t)])
        assert "tp=3 tn=4 fp=2 fn=1 acc=0.700000" in result.output

    def test_disjoint_extents_exit_2(self, runner, tmp_path):
        m = write_map(tmp_path, np.zeros((3, 3), dtype=np.uint8), "m.pgm")
        cg = ClassGrid(np.zeros((3, 3), dtype=np.uint8), (50.0, 50.0), 0.1)
        dsio.save_class_grid(tmp_path / "t.pgm", cg)
        result = runner.invoke(main, ["evaluate", str(m), str(tmp_path / "t.pgm")])
        assert result.exit_code == 2


class TestRunAll:
    def test_chain_and_determinism(self, runner, tmp_path):
        scene, traj = write_specs(tmp_path, duration=4, pattern="figure-eight")
        outs = []
        for name in ("A", "B"):
            out = tmp_path / name
            result = runner.invoke(
                main,
                ["run-all", str(scene), str(traj), str(out), "--seed", "11"] + SIM_ARGS,
            )
            assert result.exit_code in (0, 1), result.output
            outs.append(out)
        assert (outs[0] / "map.pgm").read_bytes() == (outs[1] / "map.pgm").read_bytes()
        assert (outs[0] / "site.txt").read_text() == (outs[1] / "site.txt").read_text()
        for name in ("map.pgm", "map.hdr", "site.txt", "eval.txt", "config.txt", "timing.csv"):
            assert (outs[0] / name).is_file()

    def test_no_site_exit_1(self, runner, tmp_path):
        scene = tmp_path / "scene.txt"
        scene.write_text("extent=0 4 0 4\nfloor_class=2\n")  # nothing landable
        traj = tmp_path / "traj.txt"
        traj.write_text("pattern=hover\naltitude=3\nframe_rate=1\nduration=2\n")
        result = runner.invoke(
            main, ["run-all", str(scene), str(traj), str(tmp_path / "o")] + SIM_ARGS
        )
        assert result.exit_code == 1
        assert "NO_SITE" in result.output


def test_usage_error_exit_2(runner=None):
    runner = CliRunner()
    result = runner.invoke(main, ["select"])  # missing required args
    assert result.exit_code == 2
