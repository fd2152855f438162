import json
import os

import numpy as np
import pytest

from dcflearn.cli import main, worker_count
from dcflearn.metrics import load_boxes


@pytest.fixture(scope="module")
def fixture_dir(tmp_path_factory):
    d = str(tmp_path_factory.mktemp("cliseq") / "seq")
    assert main(["make-fixture", "--out", d, "--frames", "12"]) == 0
    return d


class TestWorkerCount:
    def test_env_cap(self, monkeypatch):
        monkeypatch.setenv("DCF_THREADS", "2")
        assert worker_count(16) == 2
        assert worker_count(1) == 1

    def test_default(self, monkeypatch):
        monkeypatch.delenv("DCF_THREADS", raising=False)
        assert 1 <= worker_count(4) <= 4


class TestMakeFixture:
    def test_layout(self, fixture_dir):
        assert os.path.isdir(os.path.join(fixture_dir, "img"))
        frames = sorted(os.listdir(os.path.join(fixture_dir, "img")))
        assert frames[0] == "0001.png" and len(frames) == 12
        gt = load_boxes(os.path.join(fixture_dir, "groundtruth_rect.txt"))
        assert gt.shape == (12, 4)


class TestTrack:
    def test_tracks_fixture_and_reruns_identically(self, fixture_dir, tmp_path):
        out1 = str(tmp_path / "r1.txt")
        out2 = str(tmp_path / "r2.txt")
        stats = str(tmp_path / "stats.json")
        assert main(["track", fixture_dir, "--out", out1, "--stats", stats]) == 0
        assert main(["track", fixture_dir, "--out", out2]) == 0
        assert open(out1).read() == open(out2).read()
        boxes = load_boxes(out1)
        assert boxes.shape == (12, 4)
        payload = json.loads(open(stats).read())
        assert payload["frames"] == 12
        assert "solver" in payload["config"]
        assert payload["fps"] > 0

    def test_single_frame_returns_init_box(self, tmp_path):
        seq = str(tmp_path / "one")
        assert main(["make-fixture", "--out", seq, "--frames", "1"]) == 0
        out = str(tmp_path / "boxes.txt")
        assert main(["track", seq, "--out", out, "--init-box", "30,40,24,24"]) == 0
        boxes = load_boxes(out)
        assert boxes.shape == (1, 4)
        assert boxes[0].tolist() == [30.0, 40.0, 24.0, 24.0]

    def test_solver_flag_override(self, fixture_dir, tmp_path):
        out = str(tmp_path / "r.txt")
        assert main(["track", fixture_dir, "--out", out, "--variant", "admm", "--max-iters", "4"]) == 0


class TestEval:
    def test_self_evaluation(self, fixture_dir, tmp_path):
        gt = os.path.join(fixture_dir, "groundtruth_rect.txt")
        out = str(tmp_path / "ev")
        assert main(["eval", "--results", gt, "--gt", gt, "--out", out]) == 0
        report = json.loads(open(os.path.join(out, "report.json")).read())
        assert report["mean_cle"] == 0.0
        assert report["dp"] == 1.0 and report["op"] == 1.0
        assert report["auc"] == pytest.approx(20 / 21)
        assert "config" in report
        prec = open(os.path.join(out, "precision.csv")).read().splitlines()
        assert prec[0] == "threshold,fraction"
        assert os.path.exists(os.path.join(out, "success.svg"))

    def test_pairing_mismatch(self, fixture_dir, tmp_path):
        gt = os.path.join(fixture_dir, "groundtruth_rect.txt")
        assert main(["eval", "--results", gt, gt, "--gt", gt, "--out", str(tmp_path)]) == 2


class TestSynthBench:
    def test_bytewise_deterministic(self, tmp_path):
        out1, out2 = str(tmp_path / "b1"), str(tmp_path / "b2")
        args = ["synth-bench", "--seeds", "2", "--seed", "7", "--n", "8", "--channels", "2"]
        assert main(args + ["--out", out1]) == 0
        assert main(args + ["--out", out2]) == 0
        name = "traces/ra-admm_seed7.csv"
        assert open(os.path.join(out1, name)).read() == open(os.path.join(out2, name)).read()
        summary = json.loads(open(os.path.join(out1, "summary.json")).read())
        assert set(summary["median_iterations"]) == {"admm", "r-admm", "ra-admm"}
        assert summary["config"]["problem"]["n"] == 8
        assert os.path.exists(os.path.join(out1, "iterations.svg"))

    def test_trace_header(self, tmp_path):
        out = str(tmp_path / "b")
        assert main(["synth-bench", "--seeds", "1", "--n", "8", "--channels", "2", "--out", out]) == 0
        first = open(os.path.join(out, "traces/admm_seed0.csv")).read().splitlines()
        assert first[0] == "iter,objective,primal_residual,dual_residual,elapsed_ms"
        assert all(line.endswith(",0.000") for line in first[1:])


class TestOdeCheck:
    def test_single_rho_report(self, tmp_path):
        out = str(tmp_path / "ode")
        code = main([
            "ode-check", "--rho", "100", "--n", "6", "--channels", "1",
            "--horizon-accel", "1.0", "--horizon-first", "0.3", "--out", out,
        ])
        assert code == 0
        report = json.loads(open(os.path.join(out, "ode_report.json")).read())
        assert report["monotone_decreasing"] == {}
        for rows in report["pairings"].values():
            assert rows[0]["rho"] == 100.0
            assert set(rows[0]) == {"rho", "max_deviation", "samples"}

    def test_decreasing_pair(self, tmp_path):
        out = str(tmp_path / "ode2")
        code = main([
            "ode-check", "--rho", "100", "10000", "--pairing", "accelerated",
            "--n", "6", "--channels", "1", "--horizon-accel", "2.0", "--out", out,
        ])
        assert code == 0
        report = json.loads(open(os.path.join(out, "ode_report.json")).read())
        assert report["monotone_decreasing"]["accelerated"] is True

    def test_unsorted_rho_rejected(self, tmp_path):
        code = main(["ode-check", "--rho", "100", "10", "--out", str(tmp_path / "x")])
        assert code == 2

    def test_missing_rho_is_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as err:
            main(["ode-check", "--out", str(tmp_path / "x")])
        assert err.value.code == 2
