"""Command-line interface: exit codes, summary lines, atomic output."""

import json
import os

import pytest
from builders import dataset_to_csv, signal_noise_dataset

from forestflow import cli
from forestflow.forest_io import read_forest


@pytest.fixture()
def data_csv(tmp_path):
    path = tmp_path / "train.csv"
    dataset_to_csv(signal_noise_dataset(n=120, seed=3), path)
    return path


@pytest.fixture()
def forest_file(tmp_path, data_csv):
    out = tmp_path / "forest.json"
    rc = cli.run([
        "train", "--data", str(data_csv), "--response", "y",
        "--out", str(out), "--n-trees", "5", "--seed", "7",
    ])
    assert rc == 0
    return out


def _summary_lines(capsys):
    lines = capsys.readouterr().out.strip().splitlines()
    assert all(line.startswith("forestflow: ") for line in lines)
    return [
        dict(kv.split("=", 1) for kv in line[len("forestflow: "):].split())
        for line in lines
    ]


class TestExitCodes:
    def test_no_subcommand(self):
        assert cli.run([]) == 2

    def test_unknown_subcommand(self):
        assert cli.run(["frobnicate"]) == 2

    def test_missing_required_flag(self):
        assert cli.run(["train", "--data", "x.csv"]) == 2

    def test_missing_data_file(self, tmp_path, capsys):
        rc = cli.run([
            "train", "--data", str(tmp_path / "absent.csv"),
            "--response", "y", "--out", str(tmp_path / "f.json"),
        ])
        assert rc == 1
        assert "forestflow: error:" in capsys.readouterr().err

    def test_unknown_class_lists_valid(self, forest_file, tmp_path, capsys):
        rc = cli.run([
            "flows", "--forest", str(forest_file),
            "--class", "sideways", "--out", str(tmp_path / "f.json"),
        ])
        assert rc == 2
        err = capsys.readouterr().err
        assert "'sideways'" in err
        assert "up" in err and "down" in err

    def test_threshold_out_of_range(self, forest_file, tmp_path, capsys):
        rc = cli.run([
            "flows", "--forest", str(forest_file),
            "--threshold", "1.5", "--out", str(tmp_path / "f.json"),
        ])
        assert rc == 2
        assert "[0, 1]" in capsys.readouterr().err

    def test_bad_max_rank(self, forest_file, tmp_path):
        rc = cli.run([
            "flows", "--forest", str(forest_file),
            "--max-rank", "0", "--out", str(tmp_path / "f.json"),
        ])
        assert rc == 2

    def test_mtry_too_large(self, data_csv, tmp_path, capsys):
        rc = cli.run([
            "train", "--data", str(data_csv), "--response", "y",
            "--out", str(tmp_path / "f.json"), "--mtry", "99",
        ])
        assert rc == 2

    def test_permutation_needs_data(self, forest_file, tmp_path, capsys):
        rc = cli.run([
            "importance", "--forest", str(forest_file),
            "--metric", "permutation", "--out", str(tmp_path / "i.svg"),
        ])
        assert rc == 2
        assert "--data" in capsys.readouterr().err

    def test_tree_index_out_of_range(self, forest_file, tmp_path):
        rc = cli.run([
            "export-tree", "--forest", str(forest_file),
            "--tree", "5", "--out", str(tmp_path / "t.dot"),
        ])
        assert rc == 2

    def test_corrupt_forest_file(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        rc = cli.run([
            "flows", "--forest", str(bad), "--out", str(tmp_path / "f.json"),
        ])
        assert rc == 1


class TestTrain:
    def test_summary_fields(self, data_csv, tmp_path, capsys):
        out = tmp_path / "f.json"
        rc = cli.run([
            "train", "--data", str(data_csv), "--response", "y",
            "--out", str(out), "--n-trees", "4", "--seed", "1",
        ])
        assert rc == 0
        (fields,) = _summary_lines(capsys)
        assert fields["command"] == "train"
        assert fields["n_trees"] == "4"
        assert fields["mtry"] == "3"  # floor(sqrt(10))
        assert 0.0 <= float(fields["oob_accuracy"]) <= 1.0
        assert fields["out"] == str(out)
        forest = read_forest(out)
        assert forest.n_trees == 4
        assert forest.config.seed == 1

    def test_rerun_byte_identical(self, data_csv, tmp_path, capsys):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for out in (a, b):
            assert cli.run([
                "train", "--data", str(data_csv), "--response", "y",
                "--out", str(out), "--n-trees", "4", "--seed", "5",
            ]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_thread_env_does_not_change_output(
        self, data_csv, tmp_path, capsys, monkeypatch
    ):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        monkeypatch.setenv("FORESTFLOW_THREADS", "1")
        assert cli.run([
            "train", "--data", str(data_csv), "--response", "y",
            "--out", str(a), "--n-trees", "6", "--seed", "2",
        ]) == 0
        monkeypatch.setenv("FORESTFLOW_THREADS", "4")
        assert cli.run([
            "train", "--data", str(data_csv), "--response", "y",
            "--out", str(b), "--n-trees", "6", "--seed", "2",
        ]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_bad_thread_env(self, data_csv, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("FORESTFLOW_THREADS", "many")
        rc = cli.run([
            "train", "--data", str(data_csv), "--response", "y",
            "--out", str(tmp_path / "f.json"),
        ])
        assert rc == 2

    def test_covariate_subset(self, data_csv, tmp_path, capsys):
        out = tmp_path / "f.json"
        rc = cli.run([
            "train", "--data", str(data_csv), "--response", "y",
            "--covariates", "x.1,x.2,x.3", "--out", str(out),
            "--n-trees", "3",
        ])
        assert rc == 0
        assert read_forest(out).covariate_names == ("x.1", "x.2", "x.3")


class TestTune:
    def test_candidate_lines_and_selection(self, data_csv, capsys):
        rc = cli.run([
            "tune", "--data", str(data_csv), "--response", "y",
            "--candidates", "1,3,5", "--folds", "3", "--n-trees", "5",
        ])
        assert rc == 0
        lines = _summary_lines(capsys)
        cands = [l for l in lines if "candidate" in l]
        assert [l["candidate"] for l in cands] == ["1", "3", "5"]
        assert all(0.0 <= float(l["accuracy"]) <= 1.0 for l in cands)
        assert lines[-1]["selected_mtry"] in {"1", "3", "5"}

    def test_bad_candidates(self, data_csv, capsys):
        assert cli.run([
            "tune", "--data", str(data_csv), "--response", "y",
            "--candidates", "1,two",
        ]) == 2
        assert cli.run([
            "tune", "--data", str(data_csv), "--response", "y",
            "--candidates", "0,3",
        ]) == 2
        assert cli.run([
            "tune", "--data", str(data_csv), "--response", "y",
            "--candidates", "3", "--folds", "1",
        ]) == 2


class TestFlows:
    def test_document_written(self, forest_file, tmp_path, capsys):
        out = tmp_path / "flows.json"
        rc = cli.run([
            "flows", "--forest", str(forest_file), "--max-rank", "3",
            "--out", str(out),
        ])
        assert rc == 0
        doc = json.loads(out.read_text())
        assert doc["kind"] == "forestflow-flows"
        assert doc["max_rank"] == 3
        (fields,) = _summary_lines(capsys)
        assert fields["class"] == "all"
        assert int(fields["total_paths"]) == doc["total_paths"]

    def test_threshold_and_class_flags(self, forest_file, tmp_path, capsys):
        out = tmp_path / "flows.json"
        rc = cli.run([
            "flows", "--forest", str(forest_file), "--class", "up",
            "--threshold", "0.1", "--out", str(out),
        ])
        assert rc == 0
        doc = json.loads(out.read_text())
        assert doc["class_restriction"] == "up"
        assert doc["threshold"] == 0.1
        (fields,) = _summary_lines(capsys)
        assert fields["class"] == "up"


class TestRendering:
    def test_pcp_and_sankey_written(self, forest_file, tmp_path, capsys):
        pcp = tmp_path / "p.svg"
        sk = tmp_path / "s.html"
        assert cli.run([
            "render-pcp", "--forest", str(forest_file), "--out", str(pcp),
        ]) == 0
        assert cli.run([
            "render-sankey", "--forest", str(forest_file), "--out", str(sk),
        ]) == 0
        assert pcp.read_text().startswith("<?xml")
        assert sk.read_text().startswith("<!DOCTYPE html>")

    def test_sankey_embeds_every_class(self, forest_file, tmp_path, capsys):
        sk = tmp_path / "s.html"
        assert cli.run([
            "render-sankey", "--forest", str(forest_file), "--out", str(sk),
        ]) == 0
        from conftest import extract_island

        island = json.loads(extract_island(sk.read_text()))
        assert set(island["class_aggregates"]) == {"up", "down"}

    def test_importance_chart(self, forest_file, data_csv, tmp_path, capsys):
        out = tmp_path / "i.svg"
        assert cli.run([
            "importance", "--forest", str(forest_file), "--out", str(out),
        ]) == 0
        (fields,) = _summary_lines(capsys)
        assert fields["metric"] == "impurity"
        assert fields["top"].startswith("x.")
        out2 = tmp_path / "i2.svg"
        assert cli.run([
            "importance", "--forest", str(forest_file),
            "--metric", "permutation", "--data", str(data_csv),
            "--response", "y", "--out", str(out2),
        ]) == 0

    def test_export_tree(self, forest_file, tmp_path, capsys):
        out = tmp_path / "t.dot"
        assert cli.run([
            "export-tree", "--forest", str(forest_file),
            "--tree", "0", "--out", str(out),
        ]) == 0
        assert out.read_text().startswith("digraph tree {")


class TestAtomicWrites:
    def test_failure_leaves_no_file(self, forest_file, tmp_path, capsys):
        # force the renderer to fail after the temp file exists
        out = tmp_path / "p.svg"
        rc = cli.run([
            "render-pcp", "--forest", str(forest_file), "--out", str(out),
            "--min-darkness", "2.0",
        ])
        assert rc == 2
        assert not out.exists()
        assert not list(tmp_path.glob(".forestflow-*"))

    def test_overwrite_is_replace(self, forest_file, tmp_path, capsys):
        out = tmp_path / "flows.json"
        out.write_text("previous contents")
        assert cli.run([
            "flows", "--forest", str(forest_file), "--out", str(out),
        ]) == 0
        assert json.loads(out.read_text())["kind"] == "forestflow-flows"

    def test_mode_honours_umask(self, forest_file, tmp_path, capsys):
        out = tmp_path / "flows.json"
        old = os.umask(0o022)
        try:
            assert cli.run([
                "flows", "--forest", str(forest_file), "--out", str(out),
            ]) == 0
        finally:
            os.umask(old)
        assert (out.stat().st_mode & 0o777) == 0o644
