import json

import pytest

from scenclust.pipeline.cli import build_parser, main
from scenclust.pipeline.run import RunManifest

FAST = ["--template", "Scenario2", "--budget", "12", "--n-init", "10", "--pool-size", "128",
        "--n-features", "50", "--archetypes", "3"]


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "run"
    assert main(["explore", "--out", str(out)] + FAST) == 0
    return out


def test_explore_writes_manifest(run_dir, capsys):
    manifest = RunManifest.load(run_dir)
    assert manifest.status == "Completed"
    assert manifest.config["budget"] == 12 and manifest.config["template"] == "Scenario2"
    assert (run_dir / "reduced_set.json").is_file()


def test_report_and_plot(run_dir, capsys):
    assert main(["report", "--out", str(run_dir)]) == 0
    assert "status: Completed" in capsys.readouterr().out
    assert main(["plot", "--out", str(run_dir)]) == 0
    assert len(capsys.readouterr().out.split()) >= 5


def test_analyze_with_override(run_dir, capsys):
    assert main(["analyze", "--out", str(run_dir), "--eps-behavior", "0.3"]) == 0
    assert RunManifest.load(run_dir).config["eps_behavior"] == 0.3
    assert main(["reduce", "--out", str(run_dir), "--eps-behavior", "0.2"]) == 0
    assert RunManifest.load(run_dir).config["mode"] == "AnalyzeOnly"


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"template": "Scenario2", "budget": 11, "n_init": 10,
                               "pool_size": 128, "n_features": 50, "archetypes": 3}))
    out = tmp_path / "r"
    assert main(["explore", "--config", str(cfg), "--budget", "10", "--out", str(out)]) == 0
    assert RunManifest.load(out).config["budget"] == 10


def test_bad_config_exit_2(tmp_path, capsys):
    assert main(["explore", "--out", str(tmp_path / "x"), "--budget", "0"]) == 2
    assert "invalid configuration" in capsys.readouterr().err
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"budget": 10, "colour": "red"}))
    assert main(["explore", "--config", str(bad), "--out", str(tmp_path / "y")]) == 2
    bad.write_text("{not json")
    assert main(["explore", "--config", str(bad), "--out", str(tmp_path / "z")]) == 2


def test_missing_run_exit_2(tmp_path):
    assert main(["report", "--out", str(tmp_path / "nothing")]) == 2
    assert main(["analyze", "--out", str(tmp_path / "nothing")]) == 2


def test_pipeline_error_exit_3(run_dir, tmp_path, capsys):
    manifest = RunManifest.load(run_dir).to_dict()
    del manifest["stages"]["cluster"]
    broken = tmp_path / "broken"
    broken.mkdir()
    (broken / "manifest.json").write_text(json.dumps(manifest))
    assert main(["plot", "--out", str(broken)]) == 3
    assert "cluster" in capsys.readouterr().err


def test_unknown_choice_rejected_by_argparse():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["explore", "--budget", "many"])
    with pytest.raises(SystemExit):
        build_parser().parse_args([])
