"""The thin-client CLI: exit codes, outputs, determinism."""

import json

import numpy as np
import pytest

from pelletvision import io as pvio
from pelletvision.cli import cli


def run(capsys, argv):
    code = cli(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestUsageErrors:
    def test_no_command(self, capsys):
        code, _, err = run(capsys, [])
        assert code == 1
        assert "usage" in err

    def test_unknown_command(self, capsys):
        code, _, err = run(capsys, ["frobnicate"])
        assert code == 1
        assert "invalid choice" in err

    def test_unknown_flag(self, capsys):
        code, _, err = run(capsys, ["synth", "--seed", "1", "--out", "x",
                                    "--bogus"])
        assert code == 1

    def test_synth_requires_seed(self, capsys):
        code, _, err = run(capsys, ["synth", "--out", "x"])
        assert code == 1
        assert "--seed" in err

    def test_bad_threshold_is_usage(self, capsys, tmp_path):
        code, _, err = run(capsys, [
            "postprocess", "--maps", str(tmp_path), "--out", str(tmp_path),
            "--prob-threshold", "3.0", "--quiet"])
        assert code == 1
        assert "prob_threshold" in err


class TestDataErrors:
    def test_missing_input_file(self, capsys, tmp_path):
        code, _, err = run(capsys, [
            "evaluate", "--pred", str(tmp_path / "a.png"),
            "--gt", str(tmp_path / "b.png"), "--quiet"])
        assert code == 2
        assert "not found" in err

    def test_missing_config_file(self, capsys, tmp_path):
        code, _, err = run(capsys, [
            "synth", "--seed", "1", "--out", str(tmp_path),
            "--config", str(tmp_path / "none.cfg")])
        assert code == 2


class TestPipelineFlow:
    def test_full_flow_and_json_output(self, capsys, tmp_path):
        scene = tmp_path / "scene"
        code, out, err = run(capsys, [
            "synth", "--seed", "9", "--out", str(scene),
            "--height", "96", "--width", "96", "--n-objects", "4"])
        assert code == 0
        assert "# config n_rays=32" in err  # effective config on stderr
        body = json.loads(out)
        assert body["placed"] == 4

        code, out, _ = run(capsys, [
            "gen-targets", "--labels", str(scene / "labels.png"),
            "--classes", str(scene / "classes.png"),
            "--out", str(tmp_path / "maps"), "--quiet"])
        assert code == 0

        code, out, _ = run(capsys, [
            "postprocess", "--maps", str(tmp_path / "maps"),
            "--out", str(tmp_path / "inst"), "--quiet"])
        assert code == 0
        assert json.loads(out)["n_instances"] == 4

        code, out, _ = run(capsys, [
            "evaluate", "--pred", str(tmp_path / "inst" / "instances.png"),
            "--gt", str(scene / "labels.png"), "--tau", "0.5", "--quiet"])
        assert code == 0
        report = json.loads(out)
        assert report["match_report"]["precision"] == 1.0
        assert report["pixel_metrics"]["accuracy"] > 0.9
        assert report["provenance"]["config_sha256"]

        code, out, _ = run(capsys, [
            "measure", "--instances", str(tmp_path / "inst" / "instances.png"),
            "--records", str(tmp_path / "inst" / "instances.csv"),
            "--out", str(tmp_path / "meas"), "--mm-per-px", "0.5", "--quiet"])
        assert code == 0
        assert (tmp_path / "meas" / "report.json").is_file()
        assert (tmp_path / "meas" / "report.csv").is_file()

    def test_config_file_with_flag_override(self, capsys, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("n_rays=16\nprob_threshold=0.4\n")
        scene = tmp_path / "scene"
        code, _, _ = run(capsys, [
            "synth", "--seed", "2", "--out", str(scene), "--height", "64",
            "--width", "64", "--n-objects", "2", "--quiet"])
        assert code == 0
        code, out, err = run(capsys, [
            "gen-targets", "--labels", str(scene / "labels.png"),
            "--out", str(tmp_path / "maps"), "--config", str(cfg),
            "--n-rays", "8"])
        assert code == 0
        assert json.loads(out)["n_rays"] == 8  # flag beats file
        assert "# config prob_threshold=0.4" in err  # file beats default


class TestDeterminism:
    def test_synth_byte_identical_across_runs(self, capsys, tmp_path):
        for name in ("a", "b"):
            code, _, _ = run(capsys, [
                "synth", "--seed", "31", "--out", str(tmp_path / name),
                "--height", "80", "--width", "80", "--n-objects", "3",
                "--quiet"])
            assert code == 0
        for fname in ("labels.png", "classes.png", "image.png", "scene.json"):
            a = (tmp_path / "a" / fname).read_bytes()
            b = (tmp_path / "b" / fname).read_bytes()
            assert a == b, fname

    def test_split_deterministic(self, capsys, tmp_path, rng):
        for i in range(6):
            classes = rng.integers(0, 5, size=(10, 10)).astype(np.int32)
            pvio.write_label_map(classes, tmp_path / f"img{i}.png")
        outputs = []
        for name in ("s1.txt", "s2.txt"):
            code, _, _ = run(capsys, [
                "split", "--seed", "4", "--classes-dir", str(tmp_path),
                "--out", str(tmp_path / name), "--restarts", "4", "--quiet"])
            assert code == 0
            outputs.append((tmp_path / name).read_bytes())
        assert outputs[0] == outputs[1]
