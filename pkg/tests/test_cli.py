import os

import pytest
from click.testing import CliRunner

from cli import cli

FAST_SETTINGS = (
    "WILDFIRE_EPOCHS_LR=2\n"
    "WILDFIRE_EPOCHS_RNN=1\n"
    "WILDFIRE_FOLDS=2\n"
    "WILDFIRE_BATCH_SIZE=16\n"
)


@pytest.fixture
def workspace(tmp_path):
    config = tmp_path / "run.env"
    config.write_text(FAST_SETTINGS, encoding="utf-8")
    return {
        "config": str(config),
        "work": str(tmp_path / "work"),
        "out": str(tmp_path / "out"),
    }


def _invoke(ws, *args, out=None):
    base = ["--config", ws["config"], "--work-dir", ws["work"], "--out", out or ws["out"], "--seed", "1"]
    return CliRunner().invoke(cli, base + list(args))


def _prepare(ws):
    for args in (
        ["synth-gen", "--n-fires", "120", "--length-min", "2", "--length-max", "3"],
        ["ingest"],
        ["build-fires"],
    ):
        result = _invoke(ws, *args)
        assert result.exit_code == 0, result.output


def test_stage_chain_prints_five_stat_rows(workspace):
    _prepare(workspace)
    assert os.path.isfile(os.path.join(workspace["work"], "wildfires.csv"))
    result = _invoke(workspace, "stats")
    assert result.exit_code == 0, result.output
    names = ("Number of Wildfires", "Mean of Wildfire Length", "Standard Deviation of Wildfire Length",
             "Shortest Wildfire Length", "Longest Wildfire Length")
    rows = [line for line in result.output.splitlines() if line.split(":")[0] in names]
    assert len(rows) == 5
    assert "Number of Wildfires: 120" in rows


def test_evaluate_writes_one_row_per_lw(workspace):
    _prepare(workspace)
    result = _invoke(workspace, "evaluate", "--task", "multiclass", "--lw-min", "2", "--lw-max", "3", "--repeats", "1")
    assert result.exit_code == 0, result.output
    lines = open(os.path.join(workspace["out"], "multiclass_table.csv"), encoding="utf-8").read().splitlines()
    assert len(lines) == 3
    assert lines[0].startswith("l_w,accuracy_LR,accuracy_LSTM,accuracy_GRU")

    reissued = _invoke(workspace, "report", "--task", "multiclass", out=os.path.join(workspace["out"], "again"))
    assert reissued.exit_code == 0, reissued.output
    again = open(os.path.join(workspace["out"], "again", "multiclass_table.csv"), encoding="utf-8").read()
    assert again.splitlines() == lines


def test_evaluate_is_byte_deterministic(workspace):
    _prepare(workspace)
    args = ("evaluate", "--task", "binary", "--lw-min", "2", "--lw-max", "3", "--repeats", "2", "--models", "LR,GRU")
    for name in ("first", "second"):
        result = _invoke(workspace, *args, out=os.path.join(workspace["out"], name))
        assert result.exit_code == 0, result.output
    for filename in ("binary_table.csv", "binary_accuracy_plot.csv", "binary_precision_plot.csv", "binary_recall_plot.csv"):
        with open(os.path.join(workspace["out"], "first", filename), "rb") as a, \
                open(os.path.join(workspace["out"], "second", filename), "rb") as b:
            assert a.read() == b.read(), filename


def test_make_dataset_and_train(workspace):
    _prepare(workspace)
    result = _invoke(workspace, "make-dataset", "--task", "binary", "--lw", "3")
    assert result.exit_code == 0, result.output
    assert os.path.isfile(os.path.join(workspace["work"], "dataset_binary_lw3.csv"))

    result = _invoke(workspace, "train", "--task", "binary", "--lw", "3", "--models", "lr,gru")
    assert result.exit_code == 0, result.output
    assert os.path.isfile(os.path.join(workspace["work"], "model_GRU_binary_lw3.npz"))
    assert os.path.isfile(os.path.join(workspace["work"], "model_LR_binary_lw3_loss.csv"))


def test_unknown_flag_is_a_usage_error(workspace):
    result = _invoke(workspace, "stats", "--bogus")
    assert result.exit_code != 0
    assert "No such option" in result.output


def test_invalid_lw_names_the_stage(workspace):
    result = _invoke(workspace, "make-dataset", "--lw-min", "1")
    assert result.exit_code != 0
    assert "make-dataset:" in result.output


def test_missing_input_names_the_stage(workspace):
    result = _invoke(workspace, "build-fires")
    assert result.exit_code == 1
    assert "build-fires:" in result.output
    assert "ingest" in result.output


def test_infeasible_synthetic_spec(workspace):
    result = _invoke(workspace, "synth-gen", "--step-max", "500")
    assert result.exit_code == 1
    assert "synth-gen:" in result.output


def _write_detections(ws, payload: bytes):
    os.makedirs(ws["work"], exist_ok=True)
    with open(os.path.join(ws["work"], "detections.csv"), "wb") as f:
        f.write(payload)


def test_ragged_detection_row_names_stage_and_line(workspace):
    _write_detections(workspace, (
        b"latitude,longitude,acq_date,acq_time,frp\n"
        b"-25.0,28.0,2013-01-01,0130,10.5\n"
        b"-25.1,28.1,2013-01-01,0200,4.0,99\n"
    ))
    result = _invoke(workspace, "ingest")
    assert result.exit_code == 1
    assert isinstance(result.exception, SystemExit)
    assert "ingest:" in result.output
    assert "line 3" in result.output


def test_undecodable_detection_file_names_stage_and_line(workspace):
    _write_detections(workspace, b"latitude,longitude,acq_date,acq_time,frp\n-25.0,28.0,2013-01-01,0130,1\xe90\n")
    result = _invoke(workspace, "ingest")
    assert result.exit_code == 1
    assert isinstance(result.exception, SystemExit)
    assert "ingest:" in result.output
    assert "line 2" in result.output


def test_garbled_encoded_points_names_the_stage(workspace):
    _prepare(workspace)
    path = os.path.join(workspace["work"], "encoded_points.csv")
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    lines[3] = "not,a,point"
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
    result = _invoke(workspace, "build-fires")
    assert result.exit_code == 1
    assert isinstance(result.exception, SystemExit)
    assert "build-fires:" in result.output


def test_garbled_dataset_names_the_stage(workspace):
    _prepare(workspace)
    assert _invoke(workspace, "make-dataset", "--task", "binary", "--lw", "3").exit_code == 0
    path = os.path.join(workspace["work"], "dataset_binary_lw3.csv")
    with open(path, "a", encoding="utf-8") as f:
        f.write("1,oops\n")
    result = _invoke(workspace, "train", "--task", "binary", "--lw", "3", "--models", "LR")
    assert result.exit_code == 1
    assert isinstance(result.exception, SystemExit)
    assert "train:" in result.output
