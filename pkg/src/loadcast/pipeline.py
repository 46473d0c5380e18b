"""Per-point training pipeline and 18-hour forecast issuance.

Training and the loss curve operate in scaled space; issued forecasts and
reported metrics are inverted back to original units. At issuance time the
model maps the PAST lookback window of features to the next 18 load values;
no future weather is consumed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import lstm
from .errors import ValidationError
from .lstm import LossCurve, TrainConfig
from .record import ModelRecord
from .series import HOUR, AlignedTable, PointId, format_ts
from .windows import (
    FEATURE_MODE_WEATHER,
    MONTH_HOURS,
    FeatureScaler,
    SplitSpec,
    Window,
    build_windows,
    chronological_split,
    feature_matrix,
    fit_scaler,
    scale_pairs,
)

#: Forecast horizon in hours; every issued grid carries exactly this many entries.
HORIZON = 18


@dataclass(frozen=True)
class ForecastGrid:
    """One forecast issuance: 18 hourly values starting one hour after issue."""

    point: PointId
    issued_at: int
    model_version: int
    entries: tuple[tuple[int, float], ...]

    def __post_init__(self):
        if self.issued_at % HOUR != 0:
            raise ValidationError(f"issued_at {self.issued_at} is not on an hour boundary")
        if len(self.entries) != HORIZON:
            raise ValidationError(f"forecast grid needs exactly {HORIZON} entries")
        for k, (ts, val) in enumerate(self.entries, start=1):
            if ts != self.issued_at + k * HOUR:
                raise ValidationError(
                    f"entry {k} has ts {ts}, expected {self.issued_at + k * HOUR}"
                )
            if not math.isfinite(val):
                raise ValidationError(f"entry {k} has non-finite value")

    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.entries])

    def to_json(self) -> str:
        return json.dumps(
            {
                "point": self.point.id,
                "issuedAt": format_ts(self.issued_at),
                "modelVersion": self.model_version,
                "entries": [{"ts": format_ts(ts), "val": val} for ts, val in self.entries],
            }
        )


@dataclass
class EvalMetrics:
    """Overall and per-horizon-step MSE, in scaled space and original units."""

    overall_mse: float
    overall_mse_scaled: float
    per_step_mse: list[float]
    per_step_mse_scaled: list[float]
    n_windows: int

    def to_dict(self) -> dict:
        return {
            "overallMse": self.overall_mse,
            "overallMseScaled": self.overall_mse_scaled,
            "perStepMse": self.per_step_mse,
            "perStepMseScaled": self.per_step_mse_scaled,
            "nWindows": self.n_windows,
        }

    def to_csv(self) -> str:
        lines = ["step,mse"]
        lines += [f"{k},{v!r}" for k, v in enumerate(self.per_step_mse, start=1)]
        return "\n".join(lines) + "\n"


def evaluate_model(
    params: lstm.LstmParameters,
    head: lstm.RegressorHead,
    scaler: FeatureScaler,
    test_windows: list[Window],
) -> EvalMetrics:
    """Per-step and overall MSE of the model on held-out windows.

    Overall MSE equals the mean of the per-step values by construction
    (every window contributes K equally weighted squared errors)."""
    if not test_windows:
        raise ValidationError("evaluation needs a non-empty test set")
    X = np.stack([scaler.apply_features(w.X) for w in test_windows])
    targets_scaled = np.stack([scaler.apply_load(w.target) for w in test_windows])
    preds_scaled, _ = lstm.forward_batch(params, head, X)
    sq_scaled = (preds_scaled - targets_scaled) ** 2
    targets = np.stack([w.target for w in test_windows])
    preds = scaler.invert_load(preds_scaled)
    sq = (preds - targets) ** 2
    return EvalMetrics(
        overall_mse=float(sq.mean()),
        overall_mse_scaled=float(sq_scaled.mean()),
        per_step_mse=[float(v) for v in sq.mean(axis=0)],
        per_step_mse_scaled=[float(v) for v in sq_scaled.mean(axis=0)],
        n_windows=len(test_windows),
    )


def evaluate(record: ModelRecord, test_windows: list[Window]) -> EvalMetrics:
    return evaluate_model(record.params, record.head, record.scaler, test_windows)


def train_point_model(
    point: PointId,
    table: AlignedTable,
    cfg: TrainConfig,
    split_spec: SplitSpec,
    feature_mode: str = FEATURE_MODE_WEATHER,
    horizon: int = HORIZON,
    initial: tuple[lstm.LstmParameters, lstm.RegressorHead] | None = None,
) -> tuple[ModelRecord, LossCurve]:
    """Windows -> chronological split -> scale -> train -> package.

    The returned record is unversioned (version 0); the registry assigns the
    version and creation time at put(). Identical inputs and seed give an
    identical record payload.
    """
    span_hours = table.span_hours()
    needed = split_spec.total_months * MONTH_HOURS
    if span_hours < needed:
        raise ValidationError(
            f"{point}: table spans {span_hours} h, need >= {needed} h "
            f"for a {split_spec.train_months}/{split_spec.test_months} month split"
        )
    try:
        windows = build_windows(table, cfg.lookback, horizon, feature_mode)
        split = chronological_split(
            windows, split_spec, span=(int(table.ts[0]), int(table.ts[-1]))
        )
        scaler = fit_scaler(split.train)
        train_pairs = scale_pairs(split.train, scaler)
        test_pairs = scale_pairs(split.test, scaler)
        params, head, curve = lstm.train(
            train_pairs, test_pairs, cfg, horizon=horizon, initial=initial
        )
        metrics = evaluate_model(params, head, scaler, split.test)
    except ValidationError as e:
        raise ValidationError(f"{point}: {e}") from e
    record = ModelRecord(
        point=point,
        version=0,
        created_at=0,
        train_config=cfg,
        split=split_spec,
        scaler=scaler,
        params=params,
        head=head,
        metrics=metrics.to_dict(),
        feature_mode=feature_mode,
    )
    return record, curve


def issue_forecast(record: ModelRecord, latest: AlignedTable, issued_at: int) -> ForecastGrid:
    """Issue the 18-hour grid from the last lookback hours of features.

    `latest` must hold exactly lookback consecutive hourly rows ending at
    issued_at; callers are expected to QC and impute before issuing.
    """
    L = record.train_config.lookback
    if issued_at % HOUR != 0:
        raise ValidationError(f"issued_at {issued_at} is not on an hour boundary")
    if len(latest) != L:
        raise ValidationError(f"latest window has {len(latest)} rows, need exactly {L}")
    if int(latest.ts[-1]) != issued_at:
        raise ValidationError(
            f"latest window ends at {int(latest.ts[-1])}, expected issued_at {issued_at}"
        )
    if L > 1 and not np.all(np.diff(latest.ts) == HOUR):
        raise ValidationError("gap in the latest feature window; impute before forecasting")
    X = record.scaler.apply_features(feature_matrix(latest, record.feature_mode))
    yhat_scaled, _ = lstm.sequence_forward(record.params, record.head, X)
    values = record.scaler.invert_load(yhat_scaled)
    entries = tuple(
        (issued_at + k * HOUR, float(v)) for k, v in enumerate(values[:HORIZON], start=1)
    )
    return ForecastGrid(
        point=record.point,
        issued_at=issued_at,
        model_version=record.version,
        entries=entries,
    )


def persistence_forecast(table: AlignedTable, issued_at: int, horizon: int = HORIZON) -> np.ndarray | None:
    """Repeat-last-24h baseline: forecast(t+k) = load(t+k-24h).

    Returns None when the table lacks any needed source hour."""
    index = {int(t): i for i, t in enumerate(table.ts)}
    values = []
    for k in range(1, horizon + 1):
        src = issued_at + k * HOUR - 24 * HOUR
        i = index.get(src)
        if i is None:
            return None
        values.append(float(table.load[i]))
    return np.array(values)


def actual_values(table: AlignedTable, issued_at: int, horizon: int = HORIZON) -> np.ndarray | None:
    """Ground-truth loads for the horizon after issued_at, or None on gaps."""
    index = {int(t): i for i, t in enumerate(table.ts)}
    values = []
    for k in range(1, horizon + 1):
        i = index.get(issued_at + k * HOUR)
        if i is None:
            return None
        values.append(float(table.load[i]))
    return np.array(values)
