"""End-to-end tests of the command-line front end."""
import json
from unittest.mock import patch

import pandas as pd
import pytest

from src.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main
from src.database import AuditStore, DuckDBConnection
from src.mechanisms.privbayes import PbModel
from src.mechanisms.serialization import load_model


@pytest.fixture
def write_config(tmp_path, small_schema):
    """Write a schema and a fast PrivBayes/DCR config; overrides update the document."""
    small_schema.save_json(tmp_path / "schema.json")

    def write(name="audit.json", **overrides):
        document = {
            "mechanism": {"family": "privbayes", "epsilon": 1.0},
            "attack": "dcr",
            "pair": {"schema_path": "schema.json", "worstcase": {"small": True}},
            "n_models": 40,
            "split": [0.0, 0.5, 0.5],
            "synth_size": 10,
            "folds": 2,
            "master_seed": 1,
        }
        document.update(overrides)
        path = tmp_path / name
        path.write_text(json.dumps(document))
        return path

    return write


class TestArguments:
    """Test argument handling and exit codes."""

    def test_no_command(self):
        """Test that a missing subcommand is a usage error."""
        assert main([]) == EXIT_CONFIG

    def test_help(self):
        """Test that --help exits cleanly."""
        assert main(["--help"]) == EXIT_OK

    def test_bad_workers(self, write_config):
        """Test that --workers must be positive."""
        assert main(["audit", str(write_config()), "--workers", "0"]) == EXIT_CONFIG

    def test_missing_config(self, tmp_path):
        """Test that an unreadable config is a config error."""
        assert main(["audit", str(tmp_path / "absent.json")]) == EXIT_CONFIG

    def test_unknown_mechanism(self, write_config):
        """Test that an unknown family is a config error."""
        path = write_config(mechanism={"family": "vae", "epsilon": 1.0})
        assert main(["audit", str(path)]) == EXIT_CONFIG

    @pytest.mark.parametrize("mechanism", [
        {"family": "gan", "epsilon": 1.0, "delta": 1e-5, "gan": {"batch_size": 0}},
        {"family": "privbayes", "epsilon": 1.0, "structure": [["nope", []]]},
        {"family": "mst", "epsilon": 1.0, "delta": 1e-5, "cliques": [["a", "z"]]},
    ])
    def test_invalid_mechanism_values(self, write_config, tmp_path, mechanism):
        """Test that out-of-range hyper-parameters and unknown attributes exit as config errors."""
        path = write_config(mechanism=mechanism)
        assert main(["audit", str(path), "--out", str(tmp_path / "out")]) == EXIT_CONFIG
        assert not (tmp_path / "out" / "report.json").exists()

    def test_constant_declared_attribute(self, write_config, tmp_path):
        """Test that a schema file with a single-category attribute is a config error."""
        (tmp_path / "schema.json").write_text(json.dumps({"attributes": [
            {"name": "a", "categories": ["a0", "a1"]},
            {"name": "b", "categories": ["b0"]},
        ]}))
        assert main(["audit", str(write_config()), "--out", str(tmp_path / "out")]) == EXIT_CONFIG

    def test_runtime_failure(self, write_config, tmp_path):
        """Test that failures while running map to the runtime exit code."""
        with patch("src.cli.run_audit", side_effect=RuntimeError("boom")):
            assert main(["audit", str(write_config()), "--out", str(tmp_path / "out")]) == EXIT_RUNTIME


class TestAudit:
    """Test the audit command."""

    def test_artifacts(self, write_config, tmp_path):
        """Test that report, scores and manifest are written."""
        out = tmp_path / "out"
        assert main(["audit", str(write_config()), "--out", str(out)]) == EXIT_OK
        report = json.loads((out / "report.json").read_text())
        manifest = json.loads((out / "manifest.json").read_text())
        scores = pd.read_csv(out / "scores.csv")
        assert report["verdict"] in ("NoViolationDetected", "ViolationDetected", "Inconclusive")
        assert report["claimed_epsilon"] == 1.0
        assert report["splits"] == {"shadow": 0, "threshold": 20, "test": 20}
        assert manifest["verdict"] == report["verdict"]
        assert "elapsed_seconds" in manifest and "elapsed_seconds" not in report
        assert list(scores.columns) == ["run_index", "b", "score", "split", "run_seed"]
        assert len(scores) == 40

    def test_report_is_byte_identical(self, write_config, tmp_path):
        """Test that rerunning an audit reproduces the report exactly."""
        config = str(write_config())
        assert main(["audit", config, "--out", str(tmp_path / "first")]) == EXIT_OK
        assert main(["audit", config, "--out", str(tmp_path / "second"), "--workers", "2"]) == EXIT_OK
        assert (tmp_path / "first" / "report.json").read_bytes() == \
            (tmp_path / "second" / "report.json").read_bytes()

    def test_export_features(self, write_config, tmp_path):
        """Test the feature export of a meta-classifier attack."""
        path = write_config(attack="querybased", n_models=80, split=[0.5, 0.25, 0.25])
        out = tmp_path / "out"
        assert main(["audit", str(path), "--out", str(out), "--export-features"]) == EXIT_OK
        assert len(pd.read_csv(out / "features.csv")) == 80

    def test_store(self, write_config, tmp_path):
        """Test that --db records the audit."""
        db_path = tmp_path / "audits.duckdb"
        out = tmp_path / "out"
        assert main(["audit", str(write_config()), "--out", str(out), "--db", str(db_path)]) == EXIT_OK
        manifest = json.loads((out / "manifest.json").read_text())
        with DuckDBConnection(db_path) as db:
            listing = AuditStore(db.connection).list_audits()
        assert listing["id"].tolist() == [manifest["audit_id"]]


class TestSweepAndCompare:
    """Test the multi-audit commands."""

    def test_sweep(self, write_config, tmp_path):
        """Test one audit per epsilon and the summary table."""
        out = tmp_path / "sweep"
        assert main(["sweep", str(write_config(epsilons=[0.5, 2.0])), "--out", str(out)]) == EXIT_OK
        summary = pd.read_csv(out / "summary.csv")
        assert summary["epsilon"].tolist() == [0.5, 2.0]
        assert (out / "eps_0.5" / "report.json").exists()
        assert json.loads((out / "eps_2" / "report.json").read_text())["claimed_epsilon"] == 2.0

    def test_sweep_without_epsilons(self, write_config, tmp_path):
        """Test that a sweep needs epsilons."""
        assert main(["sweep", str(write_config()), "--out", str(tmp_path / "s")]) == EXIT_CONFIG

    def test_compare(self, write_config, tmp_path):
        """Test one audit per worst-case kind."""
        out = tmp_path / "compare"
        assert main(["compare", str(write_config()), "--kinds", "small,small+repeat", "--out", str(out)]) == EXIT_OK
        table = pd.read_csv(out / "compare.csv")
        assert table["kind"].tolist() == ["small", "small+repeat"]
        assert (out / "small+repeat" / "report.json").exists()

    def test_compare_unknown_kind(self, write_config, tmp_path):
        """Test that an unknown worst-case property is a config error."""
        code = main(["compare", str(write_config()), "--kinds", "small+tiny", "--out", str(tmp_path / "c")])
        assert code == EXIT_CONFIG


class TestReestimateAndReplay:
    """Test commands working from earlier results."""

    def test_reestimate(self, write_config, tmp_path):
        """Test re-estimating stored scores at another delta."""
        out = tmp_path / "out"
        assert main(["audit", str(write_config()), "--out", str(out)]) == EXIT_OK
        assert main(["reestimate", str(out / "scores.csv"), "--delta", "0.01"]) == EXIT_OK
        again = json.loads((out / "reestimate.json").read_text())
        assert again["config"]["delta"] == 0.01
        assert again["estimate"]["delta"] == 0.01

    def test_reestimate_without_report(self, tmp_path):
        """Test that re-estimation needs the earlier report."""
        scores = tmp_path / "scores.csv"
        scores.write_text("run_index,b,score,split,run_seed\n")
        assert main(["reestimate", str(scores)]) == EXIT_CONFIG

    def test_replay(self, write_config, tmp_path):
        """Test that a run's model is refitted and saved as JSON."""
        out = tmp_path / "models"
        assert main(["replay", str(write_config()), "--run", "3", "--out", str(out)]) == EXIT_OK
        model = load_model(out / "model_3.json")
        assert isinstance(model, PbModel)
        assert len(model.tables) == 3

    def test_replay_run_out_of_range(self, write_config, tmp_path):
        """Test that the run index must exist in the game."""
        assert main(["replay", str(write_config()), "--run", "40", "--out", str(tmp_path)]) == EXIT_CONFIG
