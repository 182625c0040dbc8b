import json

import pytest

from config import ModelKind, RunConfig, Task, load_run_config
from errors import ConfigError


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ("WILDFIRE_SEED", "WILDFIRE_MODELS", "WILDFIRE_REPEATS", "WILDFIRE_TASK"):
        monkeypatch.delenv(name, raising=False)


def test_default_protocol_values():
    config = RunConfig()
    assert (config.s_r, config.t_r, config.k) == (375.0, 21600.0, 8)
    assert (config.test_fraction, config.folds, config.repeats) == (0.30, 10, 10)
    assert (config.epochs_rnn, config.epochs_lr) == (20, 300)
    assert (config.hidden_1, config.hidden_2) == (128, 256)
    assert config.models == [ModelKind.LR, ModelKind.LSTM, ModelKind.GRU]
    assert config.lw_values == [2, 3, 4, 5, 6, 7, 8]


def test_config_file_then_env_then_overrides(tmp_path, monkeypatch):
    path = tmp_path / "run.env"
    path.write_text("WILDFIRE_SEED=7\nWILDFIRE_TASK=multiclass\nWILDFIRE_REPEATS=4\n", encoding="utf-8")
    config = load_run_config(str(path))
    assert (config.seed, config.task, config.repeats) == (7, Task.MULTICLASS, 4)

    monkeypatch.setenv("WILDFIRE_SEED", "8")
    assert load_run_config(str(path)).seed == 8
    assert load_run_config(str(path), seed=9, repeats=None).seed == 9
    assert load_run_config(str(path), seed=9, repeats=None).repeats == 4


def test_models_from_comma_list(monkeypatch):
    monkeypatch.setenv("WILDFIRE_MODELS", "LR,GRU")
    assert load_run_config().models == [ModelKind.LR, ModelKind.GRU]


@pytest.mark.parametrize("overrides", [
    {"lw_min": 1},
    {"lw_max": 9},
    {"lw_min": 5, "lw_max": 4},
    {"folds": 1},
    {"test_fraction": 1.0},
    {"dropout": 1.0},
    {"output_activation": "sigmoid"},
    {"hidden_1": 64},
    {"hidden_2": 4},
    {"bbox_lat_min": 0.0, "bbox_lat_max": -1.0},
])
def test_invalid_values_raise_config_error(overrides):
    with pytest.raises(ConfigError):
        load_run_config(**overrides)


def test_missing_config_file():
    with pytest.raises(ConfigError):
        load_run_config("/nonexistent/run.env")


def test_manifest_is_sorted_json():
    manifest = RunConfig(seed=3).to_manifest()
    data = json.loads(manifest)
    assert data["seed"] == 3
    assert list(data) == sorted(data)
    assert manifest == RunConfig(seed=3).to_manifest()


def test_column_map_uses_configured_headers():
    assert RunConfig(column_frp="power").column_map["frp"] == "power"


def test_recurrent_widths_cannot_be_overridden_from_file(tmp_path):
    path = tmp_path / "run.env"
    path.write_text("WILDFIRE_HIDDEN_1=64\n", encoding="utf-8")
    with pytest.raises(ConfigError) as excinfo:
        load_run_config(str(path))
    assert "fixed" in str(excinfo.value)
    assert load_run_config(hidden_1=128, hidden_2=256).hidden_1 == 128
