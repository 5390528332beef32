import pytest

from pathflow.cli.main import (
    EXIT_CONFIG, EXIT_DATA, EXIT_OK, build_parser, experiment_overrides, main,
)


def run(*argv) -> int:
    return main(list(argv))


class TestParser:
    def test_experiment_flags_become_overrides(self):
        args = build_parser().parse_args(["train", "--manifest", "m.csv", "--task", "codel",
                                          "--grade", "III", "--epochs", "2", "--patch-cache"])
        assert experiment_overrides(args) == {"task": "codel", "grade_filter": "III", "epochs": 2,
                                              "patch_cache": True}

    def test_manifest_required(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["train"])

    def test_eval_needs_model(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["eval", "--manifest", "m.csv"])


class TestExitCodes:
    def test_missing_manifest(self, tmp_path):
        assert run("split", "--manifest", str(tmp_path / "absent.csv"), "--out", str(tmp_path),
                   "--no-color") == EXIT_DATA

    def test_malformed_config(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("epochs = 3\nthis is not a setting\n", encoding="utf-8")
        assert run("synth", "--config", str(path), "--out", str(tmp_path / "o"), "--no-color") == EXIT_CONFIG

    def test_degenerate_ratios(self, tmp_path):
        assert run("synth", "--ratios", "1,0,0", "--out", str(tmp_path), "--no-color") == EXIT_CONFIG

    def test_report_without_reports(self, tmp_path):
        assert run("report", "--out", str(tmp_path), "--no-color") == EXIT_DATA


class TestCommands:
    def test_synth_then_split(self, tmp_path):
        config = tmp_path / "desk.cfg"
        config.write_text("synth.slides_per_class = 4\nsynth.image_size = 32\n", encoding="utf-8")
        out = tmp_path / "corpus"
        assert run("synth", "--config", str(config), "--out", str(out), "--no-color") == EXIT_OK
        assert (out / "manifest.csv").exists()

        splits = tmp_path / "splits"
        assert run("split", "--manifest", str(out / "manifest.csv"), "--repeats", "2",
                   "--out", str(splits), "--no-color") == EXIT_OK
        assert sorted(p.name for p in splits.iterdir()) == ["idh_all_0.split.csv", "idh_all_1.split.csv"]

    def test_gradcheck_passes(self, tmp_path):
        assert run("gradcheck", "--out", str(tmp_path), "--no-color") == EXIT_OK
