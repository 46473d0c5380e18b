import json

import pytest

from loadcast.config import load_config
from loadcast.errors import ConfigError
from loadcast.series import WEATHER_ROLES


def full_config(**overrides):
    cfg = {
        "dataDir": "data",
        "registryDir": "registry",
        "gateway": {"bind": "127.0.0.1:8421"},
        "featureMode": "weather+load",
        "train": {"epochs": 20, "learningRate": 0.002, "seed": 3},
        "split": {"trainMonths": 10, "testMonths": 2},
        "schedule": {
            "forecastCadenceS": 3600,
            "retrainIntervalDays": 45,
            "retrainEpochs": 5,
            "qc": {"sigmaThreshold": 3.0, "windowHours": 720, "minWindowCount": 24},
            "points": [
                {
                    "point": "campus-main-kw",
                    "sources": {role: f"srrl-{role}" for role in WEATHER_ROLES},
                }
            ],
        },
        "historyStart": "2021-01-01T00:00:00Z",
    }
    cfg.update(overrides)
    return cfg


def write(tmp_path, cfg):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


def test_full_config_parses(tmp_path):
    sys_cfg = load_config(write(tmp_path, full_config()))
    assert sys_cfg.train.epochs == 20
    assert sys_cfg.train.learning_rate == 0.002
    assert sys_cfg.feature_mode == "weather+load"
    assert sys_cfg.gateway_bind == ("127.0.0.1", 8421)
    assert sys_cfg.gateway_url == "http://127.0.0.1:8421"
    assert sys_cfg.history_start == 1609459200
    assert sys_cfg.schedule.points[0].point.id == "campus-main-kw"
    assert sys_cfg.schedule.qc_policy.sigma_threshold == 3.0


def test_relative_paths_resolve_against_config_dir(tmp_path):
    sys_cfg = load_config(write(tmp_path, full_config()))
    assert sys_cfg.data_dir == tmp_path / "data"
    assert sys_cfg.registry_dir == tmp_path / "registry"


def test_unknown_top_level_key_rejected(tmp_path):
    with pytest.raises(ConfigError, match="unknown keys"):
        load_config(write(tmp_path, full_config(bogusKey=1)))


def test_unknown_train_key_rejected(tmp_path):
    cfg = full_config()
    cfg["train"]["momentum"] = 0.9
    with pytest.raises(ConfigError, match="train"):
        load_config(write(tmp_path, cfg))


def test_schedule_optional_for_offline_commands(tmp_path):
    cfg = full_config()
    del cfg["schedule"]
    sys_cfg = load_config(write(tmp_path, cfg))
    assert sys_cfg.schedule is None


def test_empty_points_rejected(tmp_path):
    cfg = full_config()
    cfg["schedule"]["points"] = []
    with pytest.raises(ConfigError, match="at least one point"):
        load_config(write(tmp_path, cfg))


def test_missing_weather_source_rejected(tmp_path):
    cfg = full_config()
    del cfg["schedule"]["points"][0]["sources"]["ghi"]
    with pytest.raises(ConfigError, match="ghi"):
        load_config(write(tmp_path, cfg))


def test_bad_bind_rejected(tmp_path):
    cfg = full_config(gateway={"bind": "nonsense"})
    with pytest.raises(ConfigError, match="host:port"):
        load_config(write(tmp_path, cfg))


def test_bad_feature_mode_rejected(tmp_path):
    with pytest.raises(ConfigError, match="featureMode"):
        load_config(write(tmp_path, full_config(featureMode="everything")))


def test_invalid_json_rejected(tmp_path):
    path = tmp_path / "config.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_config(path)


def test_missing_file_rejected(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "absent.json")
