import json
import os

import numpy as np
import pytest

from reprogait.cli import (
    EXIT_IO,
    EXIT_NUMERIC,
    EXIT_OK,
    EXIT_PROVENANCE,
    EXIT_VALIDATION,
    main,
)

SMALL_CONFIG = {
    "seed": 7,
    "data": {"n_able": 4, "n_amputee": 2, "cycles_able": 12, "cycles_amputee": 10},
    "foundation": {"epochs": 3},
    "refurbish": {"epochs": 10},
    "direct": {"epochs": 10},
    "eval": {"ratios": [0.1, 0.3]},
}


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """One fully staged pipeline, shared by the read-only tests below."""
    root = tmp_path_factory.mktemp("cli")
    cfg_path = root / "config.json"
    cfg_path.write_text(json.dumps(SMALL_CONFIG))
    paths = {
        "root": root,
        "config": str(cfg_path),
        "data": str(root / "data"),
        "model": str(root / "foundation.json"),
        "indices": str(root / "indices.json"),
        "templates": str(root / "templates.json"),
        "refurbish": str(root / "refurbish"),
        "results": str(root / "results.json"),
        "report": str(root / "report"),
    }
    assert main(["synth", "--config", paths["config"], "--out", paths["data"]]) == EXIT_OK
    assert main([
        "train-foundation", "--config", paths["config"],
        "--data", paths["data"], "--out", paths["model"],
    ]) == EXIT_OK
    assert main([
        "build-index", "--config", paths["config"], "--data", paths["data"],
        "--model", paths["model"], "--out", paths["indices"],
    ]) == EXIT_OK
    assert main([
        "map-templates", "--config", paths["config"], "--data", paths["data"],
        "--model", paths["model"], "--indices", paths["indices"],
        "--out", paths["templates"],
    ]) == EXIT_OK
    assert main([
        "train-refurbish", "--config", paths["config"], "--data", paths["data"],
        "--model", paths["model"], "--templates", paths["templates"],
        "--out", paths["refurbish"],
    ]) == EXIT_OK
    assert main([
        "eval", "--config", paths["config"], "--data", paths["data"],
        "--model", paths["model"], "--indices", paths["indices"],
        "--out", paths["results"],
    ]) == EXIT_OK
    assert main([
        "report", "--results", paths["results"], "--out", paths["report"],
    ]) == EXIT_OK
    return paths


class TestPipeline:
    def test_synth_file_count(self, workdir):
        files = sorted(os.listdir(workdir["data"]))
        # 4 able x 3 tasks + 2 amputees + manifest
        assert len([f for f in files if f.endswith(".csv")]) == 14
        assert "manifest.json" in files

    def test_default_config_synth_structure(self, tmp_path):
        # default scale: 10 able x 3 tasks + 3 amputees
        out = tmp_path / "default_data"
        assert main(["synth", "--out", str(out)]) == EXIT_OK
        csvs = [f for f in os.listdir(out) if f.endswith(".csv")]
        assert len(csvs) == 10 * 3 + 3
        assert sum(1 for f in csvs if f.startswith("amp")) == 3

    def test_results_artifact_shape(self, workdir):
        doc = json.loads(open(workdir["results"]).read())
        assert doc["kind"] == "results"
        keys = {(r["strategy"], r["train_ratio"]) for r in doc["results"]}
        assert ("cross", 1.0) in keys
        assert ("direct", 0.1) in keys and ("refurbished", 0.3) in keys
        assert len(keys) == 5
        assert doc["provenance"]["foundation_checksum"]

    def test_report_files(self, workdir):
        files = sorted(os.listdir(workdir["report"]))
        assert files == ["r2_vs_ratio.svg", "results.csv", "summary.json"]

    def test_eval_matches_in_memory_harness(self, workdir):
        from reprogait import evaluate as ev
        from reprogait.config import load_config, validate_config

        cfg = load_config(workdir["config"])
        validate_config(cfg)
        suite = ev.build_suite(cfg)
        sweep = ev.sweep(suite.model, suite.cases, cfg, cfg.seed)
        doc = json.loads(open(workdir["results"]).read())
        by_key = {(r["strategy"], r["train_ratio"]): r for r in doc["results"]}
        for res in sweep.results:
            row = by_key[(res.strategy, res.train_ratio)]
            file_values = [float(tok) for tok in row["r2_values"].split()]
            assert file_values == res.r2_values  # file pipeline == in-memory


class TestDeterminism:
    def test_rerun_is_byte_identical(self, tmp_path):
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(json.dumps({
            "seed": 3,
            "data": {"n_able": 3, "n_amputee": 1, "cycles_able": 8,
                     "cycles_amputee": 8},
            "foundation": {"epochs": 2},
            "refurbish": {"epochs": 4},
            "direct": {"epochs": 4},
            "eval": {"ratios": [0.2]},
        }))

        def run(tag):
            base = tmp_path / tag
            args = ["--config", str(cfg_path)]
            assert main(["synth", *args, "--out", str(base / "data")]) == EXIT_OK
            assert main(["train-foundation", *args, "--data", str(base / "data"),
                         "--out", str(base / "f.json")]) == EXIT_OK
            assert main(["build-index", *args, "--data", str(base / "data"),
                         "--model", str(base / "f.json"),
                         "--out", str(base / "i.json")]) == EXIT_OK
            assert main(["map-templates", *args, "--data", str(base / "data"),
                         "--model", str(base / "f.json"),
                         "--indices", str(base / "i.json"),
                         "--out", str(base / "t.json")]) == EXIT_OK
            assert main(["eval", *args, "--data", str(base / "data"),
                         "--model", str(base / "f.json"),
                         "--indices", str(base / "i.json"),
                         "--out", str(base / "r.json")]) == EXIT_OK
            assert main(["report", "--results", str(base / "r.json"),
                         "--out", str(base / "report")]) == EXIT_OK
            return base

        a, b = run("a"), run("b")
        compared = 0
        for dirpath, _, filenames in os.walk(a):
            rel = os.path.relpath(dirpath, a)
            for name in filenames:
                pa = os.path.join(a, rel, name)
                pb = os.path.join(b, rel, name)
                assert open(pa, "rb").read() == open(pb, "rb").read(), name
                compared += 1
        assert compared >= 15  # dataset + 4 artifacts + 3 report files


class TestBoundaryReporting:
    def test_map_templates_skips_boundaries_with_m_one(self, tmp_path, capsys):
        cfg = dict(SMALL_CONFIG)
        cfg = json.loads(json.dumps(cfg))
        cfg["data"] = {"n_able": 2, "n_amputee": 1, "cycles_able": 8,
                       "cycles_amputee": 8}
        cfg["foundation"] = {"epochs": 1}
        cfg["template"] = {"m": 1}
        cfg_path = tmp_path / "c.json"
        cfg_path.write_text(json.dumps(cfg))
        args = ["--config", str(cfg_path)]
        assert main(["synth", *args, "--out", str(tmp_path / "d")]) == EXIT_OK
        assert main(["train-foundation", *args, "--data", str(tmp_path / "d"),
                     "--out", str(tmp_path / "f.json")]) == EXIT_OK
        assert main(["build-index", *args, "--data", str(tmp_path / "d"),
                     "--model", str(tmp_path / "f.json"),
                     "--out", str(tmp_path / "i.json")]) == EXIT_OK
        # 179 amputee windows; --ratio such that the training prefix is 5
        assert main(["map-templates", *args, "--data", str(tmp_path / "d"),
                     "--model", str(tmp_path / "f.json"),
                     "--indices", str(tmp_path / "i.json"),
                     "--ratio", str(5 / 179),
                     "--out", str(tmp_path / "t.json")]) == EXIT_OK
        out = capsys.readouterr().out
        assert "3 templates, 2 skipped boundary samples" in out
        doc = json.loads((tmp_path / "t.json").read_text())
        record = doc["records"]["amp00"]
        assert record["n_samples"] == 5
        assert record["skipped"] == [0, 4]


class TestErrorPaths:
    def test_missing_data_dir_is_io_error(self, workdir):
        code = main([
            "train-foundation", "--config", workdir["config"],
            "--data", str(workdir["root"] / "nope"), "--out", "/tmp/x.json",
        ])
        assert code == EXIT_IO

    def test_data_task_not_declared_in_config(self, workdir, tmp_path):
        # dataset has tasks 0..2; a config declaring only task 0 must refuse
        cfg = dict(SMALL_CONFIG)
        cfg = json.loads(json.dumps(cfg))
        cfg["data"]["tasks"] = [0]
        cfg["data"]["amputee_task"] = 0
        cfg_path = tmp_path / "narrow.json"
        cfg_path.write_text(json.dumps(cfg))
        code = main([
            "train-foundation", "--config", str(cfg_path),
            "--data", workdir["data"], "--out", str(tmp_path / "f.json"),
        ])
        assert code == EXIT_VALIDATION

    def test_invalid_config_is_validation_error(self, workdir, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"template": {"epsilon": -1.0}}))
        code = main(["synth", "--config", str(bad), "--out", str(tmp_path / "d")])
        assert code == EXIT_VALIDATION

    def test_unknown_config_field_names_it(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"data": {"wibble": 3}}))
        code = main(["synth", "--config", str(bad), "--out", str(tmp_path / "d")])
        assert code == EXIT_VALIDATION
        assert "data.wibble" in capsys.readouterr().err

    def test_index_from_different_model_is_provenance_error(self, workdir, tmp_path):
        # retrain with a different seed -> different checkpoint checksum
        other_model = tmp_path / "other.json"
        assert main([
            "train-foundation", "--config", workdir["config"], "--seed", "99",
            "--data", workdir["data"], "--out", str(other_model),
        ]) == EXIT_OK
        code = main([
            "eval", "--config", workdir["config"], "--data", workdir["data"],
            "--model", str(other_model), "--indices", workdir["indices"],
            "--out", str(tmp_path / "r.json"),
        ])
        assert code == EXIT_PROVENANCE

    def test_templates_against_wrong_model_is_provenance_error(self, workdir, tmp_path):
        other_model = tmp_path / "other.json"
        assert main([
            "train-foundation", "--config", workdir["config"], "--seed", "55",
            "--data", workdir["data"], "--out", str(other_model),
        ]) == EXIT_OK
        code = main([
            "train-refurbish", "--config", workdir["config"],
            "--data", workdir["data"], "--model", str(other_model),
            "--templates", workdir["templates"], "--out", str(tmp_path / "rb"),
        ])
        assert code == EXIT_PROVENANCE

    def test_nan_in_stream_is_numeric_error(self, workdir, tmp_path):
        import shutil

        data2 = tmp_path / "data2"
        shutil.copytree(workdir["data"], data2)
        victim = data2 / "amp00_task0.csv"
        lines = victim.read_text().splitlines()
        cells = lines[5].split(",")
        cells[3] = "nan"
        lines[5] = ",".join(cells)
        victim.write_text("\n".join(lines) + "\n")
        code = main([
            "train-foundation", "--config", workdir["config"],
            "--data", str(data2), "--out", str(tmp_path / "f.json"),
        ])
        assert code == EXIT_NUMERIC

    def test_checkpoint_round_trip_preserves_predictions(self, workdir):
        from reprogait.checkpoint import load_foundation_bundle
        from reprogait.foundation import predict_batch

        m1, stats1, _ = load_foundation_bundle(workdir["model"])
        m2, stats2, _ = load_foundation_bundle(workdir["model"])
        rng = np.random.default_rng(0)
        x = rng.normal(size=(4, m1.in_channels, m1.window_len))
        np.testing.assert_array_equal(
            predict_batch(m1, x, 0), predict_batch(m2, x, 0)
        )
        np.testing.assert_array_equal(stats1.mean, stats2.mean)
