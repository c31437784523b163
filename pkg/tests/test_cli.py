import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from genhai import data as dm
from genhai.cli import main
from conftest import rigged_registry


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def workspace(tmp_path_factory, runner):
    """Small end-to-end pipeline run shared by the CLI tests."""
    ws = tmp_path_factory.mktemp("cli")
    r = runner.invoke(main, ["synth", "--out", str(ws / "data"), "--n", "300", "--seed", "1"])
    assert r.exit_code == 0, r.output
    r = runner.invoke(
        main,
        [
            "train",
            "--corpus", str(ws / "data" / "corpus.jsonl"),
            "--out", str(ws / "run"),
            "--seed", "0",
            "--steps", "60",
            "--batch-size", "128",
        ],
    )
    assert r.exit_code == 0, r.output
    return ws


class TestSynth:
    def test_outputs(self, workspace):
        corpus = workspace / "data" / "corpus.jsonl"
        manifest = workspace / "data" / "truth_manifest.json"
        assert corpus.exists() and manifest.exists()
        records, rejects = dm.ingest(corpus)
        assert len(records) == 300
        assert rejects == []
        doc = json.loads(manifest.read_text())
        assert doc["n_records"] == 300
        assert "true_params" in doc

    def test_deterministic_bytes(self, runner, tmp_path):
        for sub in ("a", "b"):
            r = runner.invoke(
                main, ["synth", "--out", str(tmp_path / sub), "--n", "50", "--seed", "9"]
            )
            assert r.exit_code == 0, r.output
        assert (tmp_path / "a" / "corpus.jsonl").read_bytes() == (
            tmp_path / "b" / "corpus.jsonl"
        ).read_bytes()
        assert (tmp_path / "a" / "truth_manifest.json").read_bytes() == (
            tmp_path / "b" / "truth_manifest.json"
        ).read_bytes()


class TestTrain:
    def test_outputs(self, workspace):
        run = workspace / "run"
        assert (run / "model.json").exists()
        assert (run / "heldout.jsonl").exists()
        assert (run / "trace_test_result.jsonl").exists()
        registry = dm.load_model(run / "model.json")
        assert len(registry) == 13

    def test_heldout_is_twenty_percent(self, workspace):
        heldout, _ = dm.ingest(workspace / "run" / "heldout.jsonl")
        assert len(heldout) == 60  # 20% of 300

    def test_subset_training(self, runner, workspace, tmp_path):
        r = runner.invoke(
            main,
            [
                "train",
                "--corpus", str(workspace / "data" / "corpus.jsonl"),
                "--out", str(tmp_path / "partial"),
                "--steps", "20",
                "--subprogram", "continuation",
            ],
        )
        assert r.exit_code == 0, r.output
        assert (tmp_path / "partial" / "partial_model.json").exists()
        assert not (tmp_path / "partial" / "model.json").exists()

    def test_missing_corpus_exit_2(self, runner, tmp_path):
        r = runner.invoke(
            main,
            ["train", "--corpus", str(tmp_path / "nope.jsonl"), "--out", str(tmp_path / "o")],
        )
        assert r.exit_code == 1  # click validates the path: usage error

    def test_empty_corpus_exit_2(self, runner, tmp_path):
        empty = tmp_path / "empty.jsonl"
        empty.write_text("")
        r = runner.invoke(
            main, ["train", "--corpus", str(empty), "--out", str(tmp_path / "o")]
        )
        assert r.exit_code == 2


class TestEval:
    def test_metrics_written(self, runner, workspace, tmp_path):
        r = runner.invoke(
            main,
            [
                "eval",
                "--artifact", str(workspace / "run" / "model.json"),
                "--corpus", str(workspace / "run" / "heldout.jsonl"),
                "--out", str(tmp_path / "eval"),
                "-s", "10",
            ],
        )
        assert r.exit_code == 0, r.output
        doc = json.loads((tmp_path / "eval" / "metrics.json").read_text())
        assert set(doc) >= {"gen_metrics", "clf_metrics", "calibration"}
        import math

        for name, m in doc["gen_metrics"].items():
            if m is not None:
                assert m["perplexity"] == pytest.approx(math.exp(m["nll"]), rel=1e-9)
        assert (tmp_path / "eval" / "metrics.txt").exists()
        assert "ECE" in r.output


class TestQuery:
    @pytest.fixture()
    def patient_file(self, tmp_path, alpha_fixture, beta_fixture):
        doc = {
            "alpha": dm._alpha_to_dict(alpha_fixture),
            "beta1": {
                "ab_days_30": beta_fixture.ab_days_30,
                "icu_days_7": beta_fixture.icu_days_7,
                "dialysis_7d": beta_fixture.dialysis_7d,
            },
            "r1": 0,
            "tau_p": 1.0,
            "tau_m": 10.0,
        }
        path = tmp_path / "patient.json"
        path.write_text(json.dumps(doc))
        return path

    def test_query_runs(self, runner, workspace, patient_file, tmp_path):
        out = tmp_path / "q.json"
        r = runner.invoke(
            main,
            [
                "query",
                "--artifact", str(workspace / "run" / "model.json"),
                "--patient", str(patient_file),
                "--kind", "admission_risk",
                "--n", "300",
                "--posterior-draws", "5",
                "--seed", "0",
                "--out", str(out),
            ],
        )
        assert r.exit_code == 0, r.output
        doc = json.loads(out.read_text())
        assert 0.0 <= doc["estimate"] <= 1.0
        assert doc["seed"] == 0
        assert set(doc["posterior_band"]) == {"lo", "hi"}

    def test_query_deterministic_bytes(self, runner, workspace, patient_file, tmp_path):
        args = [
            "query",
            "--artifact", str(workspace / "run" / "model.json"),
            "--patient", str(patient_file),
            "--kind", "retest_now",
            "--n", "200",
            "--posterior-draws", "4",
            "--seed", "7",
        ]
        r1 = runner.invoke(main, args + ["--out", str(tmp_path / "a.json")])
        r2 = runner.invoke(main, args + ["--out", str(tmp_path / "b.json")])
        assert r1.exit_code == 0 and r2.exit_code == 0
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_sweep(self, runner, workspace, patient_file, tmp_path):
        r = runner.invoke(
            main,
            [
                "query",
                "--artifact", str(workspace / "run" / "model.json"),
                "--patient", str(patient_file),
                "--kind", "extended_stay_risk",
                "--n", "200",
                "--posterior-draws", "4",
                "--sweep", "horizon:2:10:3",
            ],
        )
        assert r.exit_code == 0, r.output
        doc = json.loads(r.output[r.output.index("{"):])
        assert doc["sweep_axis"] == "horizon"
        assert [p["grid"] for p in doc["points"]] == [2.0, 6.0, 10.0]

    def test_bad_sweep_spec_exit_1(self, runner, workspace, patient_file):
        r = runner.invoke(
            main,
            [
                "query",
                "--artifact", str(workspace / "run" / "model.json"),
                "--patient", str(patient_file),
                "--kind", "extended_stay_risk",
                "--sweep", "horizon:2:10",
            ],
        )
        assert r.exit_code == 1

    def test_missing_query_field_exit_2(self, runner, workspace, tmp_path, alpha_fixture):
        path = tmp_path / "p.json"
        path.write_text(json.dumps({"alpha": dm._alpha_to_dict(alpha_fixture)}))
        r = runner.invoke(
            main,
            [
                "query",
                "--artifact", str(workspace / "run" / "model.json"),
                "--patient", str(path),
                "--kind", "retest_now",
            ],
        )
        assert r.exit_code == 2

    def test_invalid_patient_file_exit_2(self, runner, workspace, tmp_path):
        path = tmp_path / "p.json"
        path.write_text(json.dumps({"alpha": {"gender": 5}}))
        r = runner.invoke(
            main,
            [
                "query",
                "--artifact", str(workspace / "run" / "model.json"),
                "--patient", str(path),
                "--kind", "admission_risk",
            ],
        )
        assert r.exit_code == 2

    def test_bad_kind_exit_1(self, runner, workspace, patient_file):
        r = runner.invoke(
            main,
            [
                "query",
                "--artifact", str(workspace / "run" / "model.json"),
                "--patient", str(patient_file),
                "--kind", "nonsense",
            ],
        )
        assert r.exit_code == 1


class TestExitCodes:
    def test_unknown_command_exit_1(self, runner):
        assert runner.invoke(main, ["frobnicate"]).exit_code == 1

    def test_missing_required_option_exit_1(self, runner):
        assert runner.invoke(main, ["synth"]).exit_code == 1

    def test_corrupt_artifact_exit_2(self, runner, tmp_path, alpha_fixture):
        bad = tmp_path / "model.json"
        bad.write_text(json.dumps({"format_version": 99}))
        patient = tmp_path / "p.json"
        patient.write_text(json.dumps({"alpha": dm._alpha_to_dict(alpha_fixture)}))
        r = runner.invoke(
            main,
            [
                "query",
                "--artifact", str(bad),
                "--patient", str(patient),
                "--kind", "admission_risk",
            ],
        )
        assert r.exit_code == 2
