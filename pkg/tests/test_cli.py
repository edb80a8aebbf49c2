"""Command line interface behavior and exit code tests."""

import json

import pytest

from hashattack.cli import main
from tests.conftest import TINY_RUN_KWARGS


def _config_file(tmp_path):
    from hashattack.config import ExperimentConfig

    path = tmp_path / "tiny.cfg"
    ExperimentConfig(**TINY_RUN_KWARGS).save(path)
    return str(path)


def _run(command, tmp_path, seed="4", config=None):
    argv = [*command, "--seed", seed, "--out", str(tmp_path / "run")]
    if config is not None:
        argv += ["--config", config]
    return main(argv)


def test_usage_errors_exit_one(tmp_path):
    for argv in (
        [],
        ["unknown-command", "--seed", "1", "--out", str(tmp_path)],
        ["gen-data", "--out", str(tmp_path)],                   # no seed
        ["gen-data", "--seed", "x", "--out", str(tmp_path)],    # bad int
        ["gen-data", "--seed", "1"],                            # no out
        ["baseline", "--seed", "1", "--out", str(tmp_path)],    # no method
        ["baseline", "fgsm", "--seed", "1", "--out", str(tmp_path)],
    ):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 1, argv


def test_config_problems_exit_one(tmp_path, capsys):
    assert _run(["gen-data"], tmp_path,
                config=str(tmp_path / "absent.cfg")) == 1
    bad = tmp_path / "bad.cfg"
    bad.write_text("classes = 1\n")
    assert _run(["gen-data"], tmp_path, config=str(bad)) == 1
    bad.write_text("not_a_key = 3\n")
    assert _run(["gen-data"], tmp_path, config=str(bad)) == 1
    assert "error" in capsys.readouterr().err


def test_stage_failure_exits_two(tmp_path, capsys):
    config = _config_file(tmp_path)
    assert _run(["train-hash"], tmp_path, config=config) == 2
    err = capsys.readouterr().err
    assert "train_hash failed" in err and "gen-data" in err


def test_gen_data_success_prints_summary(tmp_path, capsys):
    config = _config_file(tmp_path)
    assert _run(["gen-data"], tmp_path, config=config) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary == {"train": 60, "database": 80, "query": 12, "pixels": 36}
    assert (tmp_path / "run" / "dataset.npz").is_file()


def test_full_command_chain(tmp_path, capsys):
    config = _config_file(tmp_path)
    chain = (
        ["gen-data"],
        ["train-hash"],
        ["encode-db"],
        ["train-attack"],
        ["attack"],
        ["baseline", "p2p"],
        ["baseline", "dhta"],
        ["baseline", "noise"],
        ["eval"],
        ["transfer-eval"],
    )
    for command in chain:
        assert _run(command, tmp_path, config=config) == 0, command
    capsys.readouterr()
    report = json.loads((tmp_path / "run" / "report.json").read_text())
    assert "ProS-GAN" in report["methods"]
    assert (tmp_path / "run" / "transfer_report.json").is_file()


def test_defaults_apply_without_config_flag(tmp_path, capsys):
    # omitted --config falls back to the built-in defaults
    assert main(["gen-data", "--seed", "3", "--out", str(tmp_path / "d")]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["train"] == 500
