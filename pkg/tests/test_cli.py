import json
from pathlib import Path

import numpy as np
import pytest

from measpike.cli import EXIT_CONFIG, EXIT_RUNTIME, EXIT_USAGE, load_config, main
from measpike.dataset import load_feature_table
from measpike.signals import MultichannelRecording, save_recording

TINY = [
    "--set", "synth.rows_per_class=80",
    "--set", "synth.class_mean_shift=3.0",
    "--set", "nn.epochs=3",
    "--set", "nn.conv_filters=[4]",
    "--set", "nn.dense_widths=[8]",
    "--set", "nn.batch_size=64",
    "--set", "gbt.n_rounds=4",
    "--set", "eval.k=3",
]


def read_tree(path: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(path.iterdir()) if p.is_file()}


class TestConfig:
    def test_defaults(self):
        cfg = load_config(None, [])
        assert cfg.eval.k == 10
        assert cfg.preprocess.threshold == 0.5
        assert cfg.nn.conv_filters == (64, 128, 256)
        assert cfg.nn.batch_size == 1024
        assert cfg.nn.epochs == 20
        assert cfg.nn.learning_rate == 0.001

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text('{"nn": {"epoch": 5}}')
        from measpike.cli import ConfigError

        with pytest.raises(ConfigError, match="unknown key"):
            load_config(str(path), [])

    def test_set_overrides_file(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text('{"eval": {"k": 4}}')
        cfg = load_config(str(path), ["eval.k=7"])
        assert cfg.eval.k == 7

    def test_type_validation(self):
        from measpike.cli import ConfigError

        with pytest.raises(ConfigError, match="expected int"):
            load_config(None, ["eval.k=lots"])

    def test_manifest_replay_extracts_config(self, tmp_path):
        path = tmp_path / "manifest.json"
        path.write_text(json.dumps({"command": "synth", "config": {"eval": {"k": 6}}}))
        cfg = load_config(str(path), [])
        assert cfg.eval.k == 6


class TestExitCodes:
    def test_unknown_flag_exits_one(self, capsys):
        assert main(["synth", "--frobnicate"]) == EXIT_USAGE
        assert "usage" in capsys.readouterr().err

    def test_unknown_subcommand_exits_one(self):
        assert main(["transmogrify"]) == EXIT_USAGE

    def test_bad_config_exits_two(self, tmp_path, capsys):
        bad = tmp_path / "cfg.json"
        bad.write_text('{"nonsense": 1}')
        code = main(["synth", "--config", str(bad), "--out-dir", str(tmp_path / "run")])
        assert code == EXIT_CONFIG
        assert "config error" in capsys.readouterr().err

    def test_runtime_failure_exits_three(self, tmp_path, capsys):
        code = main(["detect", "--input", str(tmp_path / "missing.msb"),
                     "--out-dir", str(tmp_path / "run")])
        assert code == EXIT_RUNTIME
        assert "stage 'detect'" in capsys.readouterr().err


class TestSynthCommand:
    def test_emits_per_dpi_csvs_and_manifest(self, tmp_path):
        out = tmp_path / "run"
        code = main(["synth", "--rows", "10", "--dpi", "0", "7", "--out-dir", str(out)])
        assert code == 0
        assert (out / "control-denv2-zikv_dpi0.csv").exists()
        assert (out / "control-denv2-zikv_dpi7.csv").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "synth"
        assert manifest["config"]["synth"]["rows_per_class"] == 10
        table = load_feature_table(out / "control-denv2-zikv_dpi0.csv", 0)
        assert table.n_rows == 30

    def test_byte_identical_across_runs(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert main(["synth", "--rows", "7", "--seed", "5", "--out-dir", str(out)]) == 0
        assert read_tree(a) == read_tree(b)

    def test_recording_kind(self, tmp_path):
        out = tmp_path / "run"
        code = main([
            "synth", "--kind", "recording", "--dpi", "0", "--out-dir", str(out),
            "--set", "synth_recording.n_channels=2",
            "--set", "synth_recording.duration_s=0.05",
        ])
        assert code == 0
        assert (out / "recording_control_dpi0.msb").exists()
        assert (out / "recording_zikv_dpi0.msb").exists()


class TestSignalCommands:
    def make_recording(self, tmp_path):
        rng = np.random.default_rng(0)
        traces = rng.normal(0.0, 2.0, size=(2, 4000))
        traces[0, 2000] = 60.0
        rec = MultichannelRecording(fs_hz=10000.0, traces=traces)
        path = tmp_path / "rec.msb"
        save_recording(rec, path)
        return path

    def test_filter_command(self, tmp_path):
        rec = self.make_recording(tmp_path)
        out = tmp_path / "run"
        assert main(["filter", "--input", str(rec), "--out-dir", str(out)]) == 0
        assert (out / "filtered.msb").exists()
        text = (out / "frequency_response.csv").read_text().splitlines()
        assert text[0] == "frequency_hz,magnitude"
        assert len(text) == 201

    def test_detect_command(self, tmp_path):
        rec = self.make_recording(tmp_path)
        out = tmp_path / "run"
        assert main(["detect", "--input", str(rec), "--no-filter", "--out-dir", str(out)]) == 0
        summary = json.loads((out / "spike_summary.json").read_text())
        assert summary["n_channels"] == 2
        assert summary["events_per_channel"][0] >= 1
        lines = (out / "spikes.csv").read_text().splitlines()
        assert lines[0] == "channel,sample_index,amplitude_uV"


class TestTablePipelineCommands:
    def synth_table(self, tmp_path, rows=40):
        out = tmp_path / "data"
        assert main(["synth", "--rows", str(rows), "--sep", "3.0", "--dpi", "0",
                     "--out-dir", str(out)]) == 0
        return out / "control-denv2-zikv_dpi0.csv"

    def test_preprocess_command(self, tmp_path):
        # enough rows that every channel's scaled variance clears the cutoff
        data = self.synth_table(tmp_path, rows=2000)
        out = tmp_path / "run"
        assert main(["preprocess", "--data", str(data), "--out-dir", str(out)]) == 0
        report = json.loads((out / "importance.json").read_text())
        assert report["n_components"] == 60  # the time column fails the cutoff
        assert (out / "preprocessor.json").exists()
        assert (out / "transformed.csv").exists()

    def test_train_command(self, tmp_path):
        data = self.synth_table(tmp_path, rows=80)
        out = tmp_path / "run"
        code = main(["train", "--data", str(data), "--model", "fused",
                     "--out-dir", str(out), *TINY])
        assert code == 0
        assert (out / "cnn.msb").exists()
        assert (out / "gbt.json").exists()
        history = (out / "history.csv").read_text().splitlines()
        assert history[0] == "epoch,train_loss,train_acc,val_acc,seconds"
        assert len(history) == 4  # 3 epochs
        metrics = json.loads((out / "test_metrics.json").read_text())
        assert set(metrics["summary"]) == {"accuracy", "precision", "recall", "f1"}

    def test_eval_command_outputs(self, tmp_path):
        out = tmp_path / "run"
        code = main(["eval", "--method", "naive_bayes", "--out-dir", str(out), *TINY])
        assert code == 0
        report = json.loads((out / "cv_report_dpi0.json").read_text())
        assert report["k"] == 3
        assert len(report["folds"]) == 3
        assert (out / "fold_metrics_dpi0.csv").exists()
        assert (out / "pr_curves_dpi0.csv").exists()
        assert (out / "confusion_dpi0.csv").exists()

    def test_compare_grid_shape(self, tmp_path):
        out = tmp_path / "run"
        code = main(["compare", "--methods", "naive_bayes,decision_tree",
                     "--dpi", "0", "3", "--out-dir", str(out), *TINY])
        assert code == 0
        lines = (out / "comparison_grid.csv").read_text().splitlines()
        assert lines[0] == "dpi,method,accuracy,precision,recall,f1,train_seconds"
        assert len(lines) == 1 + 2 * 2  # 2 dpi x 2 methods

    def test_pipeline_summary_shape(self, tmp_path):
        out = tmp_path / "run"
        code = main(["pipeline", "--out-dir", str(out), *TINY])
        assert code == 0
        lines = (out / "summary.csv").read_text().splitlines()
        assert lines[0] == "dpi,accuracy,precision,recall,f1,train_seconds"
        assert len(lines) == 7  # five dpi rows plus the average row
        assert lines[-1].startswith("average,")
        for dpi in (0, 1, 2, 3, 7):
            assert (out / f"cv_report_dpi{dpi}.json").exists()

    def test_eval_plots_svg(self, tmp_path):
        out = tmp_path / "run"
        code = main(["eval", "--method", "naive_bayes", "--plots", "--out-dir", str(out), *TINY])
        assert code == 0
        assert (out / "pr_curves_dpi0.svg").exists()
        assert (out / "confusion_dpi0.svg").exists()


class TestManifestReplay:
    def test_eval_rerun_from_manifest_byte_identical(self, tmp_path):
        first = tmp_path / "first"
        code = main(["eval", "--method", "decision_tree", "--deterministic",
                     "--out-dir", str(first), *TINY])
        assert code == 0
        second = tmp_path / "second"
        code = main(["eval", "--method", "decision_tree", "--deterministic",
                     "--config", str(first / "manifest.json"), "--out-dir", str(second)])
        assert code == 0
        assert read_tree(first) == read_tree(second)

    def test_deterministic_zeroes_timing_columns(self, tmp_path):
        out = tmp_path / "run"
        assert main(["eval", "--method", "naive_bayes", "--deterministic",
                     "--out-dir", str(out), *TINY]) == 0
        report = json.loads((out / "cv_report_dpi0.json").read_text())
        assert report["mean"]["train_seconds"] == 0.0
        assert all(f["train_seconds"] == 0.0 for f in report["folds"])
