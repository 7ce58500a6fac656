import json

import pytest

from cli import EXIT_OK, EXIT_USAGE, main
from configs import RunConfig
from models.mavt.tokens import trainable_count_closed_form

from conftest import TINY


def _records(capsys):
    out = capsys.readouterr().out
    return [json.loads(line) for line in out.splitlines() if line.strip()]


@pytest.fixture
def tiny_file(tmp_path):
    path = tmp_path / "tiny.cfg"
    path.write_text(RunConfig.build(TINY).dump(), encoding="utf-8")
    return str(path)


def test_params_reports_closed_form(capsys, tiny_file):
    assert main(["params", "--config", tiny_file, "--n_s", "3"]) == EXIT_OK
    (record,) = _records(capsys)
    expected = trainable_count_closed_form(RunConfig.build(dict(TINY, n_s=3)))
    assert record["trainable"] == expected
    assert record["matches"] is True
    assert 0 < record["ratio"] < 1


def test_gen_train_eval_saliency_pipeline(capsys, tiny_file, tmp_path):
    data_dir = str(tmp_path / "data")
    run_dir = str(tmp_path / "run")

    assert main(["gen", "--spec", tiny_file, "--out", data_dir]) == EXIT_OK
    (generated,) = _records(capsys)
    assert generated["train"] == 16 and generated["test"] == 8
    assert len(generated["digest"]) == 16
    assert 0.0 <= generated["oracle_acc"] <= 1.0
    assert (generated["stft_window"], generated["stft_overlap"]) == (512, 353)

    # identical spec, identical digest
    assert main(["gen", "--spec", tiny_file, "--out", str(tmp_path / "again")]) == EXIT_OK
    assert _records(capsys)[0]["digest"] == generated["digest"]

    assert main(["train", "--config", tiny_file, "--data", data_dir, "--out", run_dir]) == EXIT_OK
    (trained,) = _records(capsys)
    checkpoint = trained["checkpoint"]
    assert checkpoint.endswith("checkpoint.mavt")

    assert main(["eval", "--ckpt", checkpoint, "--data", data_dir]) == EXIT_OK
    (row,) = _records(capsys)
    assert row["modality"] == "av"
    assert 0.0 <= row["fg_acc"] <= 1.0

    assert main(["eval", "--ckpt", checkpoint, "--data", data_dir, "--modality", "v"]) == EXIT_OK
    (unimodal,) = _records(capsys)
    assert unimodal["bg_acc"] is None

    # checkpoint config keys can be overridden at evaluation time
    command = ["eval", "--ckpt", checkpoint, "--data", data_dir, "--eval_batch_size", "3"]
    assert main(command) == EXIT_OK
    assert _records(capsys)[0]["fg_acc"] == row["fg_acc"]

    pgm = str(tmp_path / "map.pgm")
    command = ["saliency", "--ckpt", checkpoint, "--data", data_dir, "--idx", "1", "--out", pgm]
    assert main(command + ["--class", "2"]) == EXIT_OK
    (saliency,) = _records(capsys)
    assert saliency["class"] == 2
    assert 0 <= saliency["argmax_row"] < 2 and 0 <= saliency["argmax_col"] < 2
    with open(pgm, "rb") as handle:
        assert handle.read(2) == b"P5"

    out_of_range = command[:6] + ["99", "--out", pgm]
    assert main(out_of_range) == EXIT_USAGE


def test_gradcheck_passes_on_tiny_config(capsys, tiny_file):
    assert main(["gradcheck", "--config", tiny_file]) == EXIT_OK
    records = _records(capsys)
    kinds = {record["kind"] for record in records}
    assert kinds == {"primitive", "model"}
    assert all(record["passed"] for record in records)


def test_bad_config_key_exits_with_usage_code(tmp_path, capsys):
    path = tmp_path / "bad.cfg"
    path.write_text("learning_rate = 0.1\n", encoding="utf-8")
    assert main(["params", "--config", str(path)]) == EXIT_USAGE
    assert capsys.readouterr().out == ""


def test_invalid_override_exits_with_usage_code(capsys):
    assert main(["params", "--heads", "3"]) == EXIT_USAGE
    assert capsys.readouterr().out == ""


def test_missing_checkpoint_exits_with_usage_code(tmp_path):
    missing = str(tmp_path / "none" / "checkpoint.mavt")
    assert main(["eval", "--ckpt", missing, "--data", str(tmp_path)]) == EXIT_USAGE


@pytest.mark.parametrize("argv", [[], ["train"], ["ablate", "--suite", "dropout", "--out", "x"]])
def test_argument_errors_exit_with_usage_code(argv):
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == EXIT_USAGE


@pytest.mark.parametrize("command", ["eval", "saliency"])
def test_checkpoint_commands_list_config_keys(capsys, command):
    with pytest.raises(SystemExit) as info:
        main([command, "--help"])
    assert info.value.code == 0
    text = capsys.readouterr().out
    assert "configuration keys" in text
    assert "--eval_batch_size" in text and "--tau" in text
