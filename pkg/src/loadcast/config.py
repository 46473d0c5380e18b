"""Deployment configuration: JSON file schema and validation.

See docs/config.md for the full schema and a commented example. Relative
paths resolve against the config file's directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .lstm import TrainConfig
from .quality import QcPolicy
from .series import WEATHER_ROLES, PointId, parse_ts
from .windows import FEATURE_MODES, FEATURE_MODE_WEATHER, SplitSpec


@dataclass(frozen=True)
class PointBinding:
    """One forecasted load point and the ids of its six weather sources."""

    point: PointId
    sources: dict[str, PointId]

    def __post_init__(self):
        missing = [r for r in WEATHER_ROLES if r not in self.sources]
        if missing:
            raise ConfigError(f"point {self.point}: missing weather sources {missing}")


@dataclass(frozen=True)
class ScheduleConfig:
    """Cadence of the operational loop and its QC policy."""

    points: tuple[PointBinding, ...]
    forecast_cadence_s: int = 3600
    retrain_interval_days: float = 45
    retrain_epochs: int = 50
    warm_start: bool = True
    max_gap_hours: int = 3
    qc_policy: QcPolicy = field(default_factory=QcPolicy)

    def __post_init__(self):
        if self.forecast_cadence_s <= 0:
            raise ConfigError("forecastCadenceS must be positive")
        if self.retrain_interval_days < 1:
            raise ConfigError("retrainIntervalDays must be >= 1")
        if self.retrain_epochs < 1:
            raise ConfigError("retrainEpochs must be >= 1")

    @property
    def retrain_interval_s(self) -> int:
        return int(self.retrain_interval_days * 86400)


@dataclass(frozen=True)
class SystemConfig:
    data_dir: Path
    registry_dir: Path
    gateway_bind: tuple[str, int]
    gateway_url: str
    # Optional: only the run loop needs a schedule; train/evaluate/forecast
    # work from the dataset manifest alone.
    schedule: ScheduleConfig | None = None
    train: TrainConfig = TrainConfig()
    split: SplitSpec = SplitSpec()
    feature_mode: str = FEATURE_MODE_WEATHER
    history_start: int = 0
    cache_log: Path | None = None
    run_log: Path | None = None

    def __post_init__(self):
        if self.feature_mode not in FEATURE_MODES:
            raise ConfigError(f"unknown featureMode {self.feature_mode!r}")


def _parse_bind(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise ConfigError(f"bind must be host:port, got {text!r}")
    return host, int(port)


def _check_keys(section: dict, allowed: set[str], where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


def _train_config(section: dict) -> TrainConfig:
    _check_keys(
        section,
        {
            "epochs",
            "learningRate",
            "optimizer",
            "batchSize",
            "lookback",
            "hiddenDim",
            "gradClipNorm",
            "seed",
        },
        "train",
    )
    defaults = TrainConfig()
    return TrainConfig(
        epochs=section.get("epochs", defaults.epochs),
        learning_rate=section.get("learningRate", defaults.learning_rate),
        optimizer=section.get("optimizer", defaults.optimizer),
        batch_size=section.get("batchSize", defaults.batch_size),
        lookback=section.get("lookback", defaults.lookback),
        hidden_dim=section.get("hiddenDim", defaults.hidden_dim),
        grad_clip_norm=section.get("gradClipNorm", defaults.grad_clip_norm),
        seed=section.get("seed", defaults.seed),
    )


def _qc_policy(section: dict) -> QcPolicy:
    _check_keys(section, {"sigmaThreshold", "windowHours", "minWindowCount"}, "schedule.qc")
    defaults = QcPolicy()
    return QcPolicy(
        sigma_threshold=section.get("sigmaThreshold", defaults.sigma_threshold),
        window_hours=section.get("windowHours", defaults.window_hours),
        min_window_count=section.get("minWindowCount", defaults.min_window_count),
    )


def _schedule(section: dict) -> ScheduleConfig:
    _check_keys(
        section,
        {
            "points",
            "forecastCadenceS",
            "retrainIntervalDays",
            "retrainEpochs",
            "warmStart",
            "maxGapHours",
            "qc",
        },
        "schedule",
    )
    raw_points = section.get("points", [])
    if not raw_points:
        raise ConfigError("schedule.points must name at least one point")
    bindings = []
    for entry in raw_points:
        _check_keys(entry, {"point", "sources"}, "schedule.points[]")
        bindings.append(
            PointBinding(
                point=PointId(entry["point"]),
                sources={role: PointId(pid) for role, pid in entry["sources"].items()},
            )
        )
    return ScheduleConfig(
        points=tuple(bindings),
        forecast_cadence_s=section.get("forecastCadenceS", 3600),
        retrain_interval_days=section.get("retrainIntervalDays", 45),
        retrain_epochs=section.get("retrainEpochs", 50),
        warm_start=section.get("warmStart", True),
        max_gap_hours=section.get("maxGapHours", 3),
        qc_policy=_qc_policy(section.get("qc", {})),
    )


def load_config(path: str | Path) -> SystemConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    _check_keys(
        raw,
        {
            "dataDir",
            "registryDir",
            "gateway",
            "featureMode",
            "train",
            "split",
            "schedule",
            "historyStart",
            "cacheLog",
            "runLog",
        },
        str(path),
    )
    base = path.parent

    def resolve(p: str) -> Path:
        candidate = Path(p)
        return candidate if candidate.is_absolute() else base / candidate

    gateway = raw.get("gateway", {})
    _check_keys(gateway, {"bind", "url"}, "gateway")
    bind = _parse_bind(gateway.get("bind", "127.0.0.1:8421"))
    url = gateway.get("url", f"http://{bind[0]}:{bind[1]}")

    split_raw = raw.get("split", {})
    _check_keys(split_raw, {"trainMonths", "testMonths"}, "split")
    split = SplitSpec(
        train_months=split_raw.get("trainMonths", 10),
        test_months=split_raw.get("testMonths", 2),
    )

    history_start = raw.get("historyStart", 0)
    if isinstance(history_start, str):
        history_start = parse_ts(history_start)

    try:
        return SystemConfig(
            data_dir=resolve(raw.get("dataDir", "data")),
            registry_dir=resolve(raw.get("registryDir", "registry")),
            gateway_bind=bind,
            gateway_url=url,
            schedule=_schedule(raw["schedule"]) if "schedule" in raw else None,
            train=_train_config(raw.get("train", {})),
            split=split,
            feature_mode=raw.get("featureMode", FEATURE_MODE_WEATHER),
            history_start=history_start,
            cache_log=resolve(raw["cacheLog"]) if "cacheLog" in raw else None,
            run_log=resolve(raw["runLog"]) if "runLog" in raw else None,
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"{path}: {e}") from e
