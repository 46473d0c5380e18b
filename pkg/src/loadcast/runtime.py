"""Operational loop: scheduled forecasting, online retraining, grid search.

The scheduler is a pure function of (now, state, config) so every timing
decision is testable against a simulated clock. Actions for one point never
block another point's actions; failures are logged and retried next tick.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

from .config import PointBinding, ScheduleConfig, SystemConfig
from .errors import DivergenceError, LoadcastError, ValidationError
from .gateway.client import fetch_history, push_forecast
from .lstm import TrainConfig
from .pipeline import HORIZON, issue_forecast, train_point_model
from .quality import impute_missing, sigma_filter
from .registry import ModelRegistry
from .series import HOUR, WEATHER_ROLES, AlignedTable, IntervalSeries, PointId, align
from .windows import SplitSpec, scale_split_to_span

ACTION_RETRAIN = "retrain"
ACTION_FORECAST = "forecast"

#: Extra history fetched before the lookback window so rolling QC has context.
QC_CONTEXT_HOURS = 48

#: Consecutive retrain failures that trigger an operator alert record.
ALERT_AFTER_FAILURES = 3


class RealClock:
    def now(self) -> int:
        return int(time.time())

    def sleep(self, seconds: float) -> None:
        time.sleep(seconds)


class SimulatedClock:
    """Test clock: sleep() advances instantly, now() never goes backwards."""

    def __init__(self, start: int):
        self._now = int(start)

    def now(self) -> int:
        return self._now

    def sleep(self, seconds: float) -> None:
        if seconds < 0:
            raise ValidationError("cannot sleep a negative duration")
        self._now += int(seconds)


@dataclass(frozen=True)
class Action:
    kind: str
    point: PointId


@dataclass
class SchedulerState:
    """Last successful run per (point, action kind), plus failure streaks."""

    last_run: dict[tuple[str, str], int] = field(default_factory=dict)
    retrain_failures: dict[str, int] = field(default_factory=dict)

    def mark(self, point: PointId, kind: str, ts: int) -> None:
        self.last_run[(point.id, kind)] = ts


def tick(now: int, state: SchedulerState, cfg: ScheduleConfig) -> list[Action]:
    """Due actions at `now`: cold-start points are due for everything,
    otherwise an action is due once its interval has fully elapsed.

    Pure: no side effects, same inputs give the same actions. Retrains sort
    before forecasts so a cold start trains before the first issuance."""
    due: list[Action] = []
    for binding in cfg.points:
        last = state.last_run.get((binding.point.id, ACTION_RETRAIN))
        if last is None or now - last >= cfg.retrain_interval_s:
            due.append(Action(ACTION_RETRAIN, binding.point))
    for binding in cfg.points:
        last = state.last_run.get((binding.point.id, ACTION_FORECAST))
        if last is None or now - last >= cfg.forecast_cadence_s:
            due.append(Action(ACTION_FORECAST, binding.point))
    return due


@dataclass
class RunRecord:
    ts: int
    action: str
    point: str
    outcome: str
    duration_s: float
    details: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {
                "ts": self.ts,
                "action": self.action,
                "point": self.point,
                "outcome": self.outcome,
                "durationS": round(self.duration_s, 6),
                **self.details,
            }
        )


class RunLog:
    """Append-only operational audit log, optionally mirrored to JSON lines."""

    def __init__(self, path: str | Path | None = None):
        self.records: list[RunRecord] = []
        self._path = Path(path) if path else None

    def record(
        self, ts: int, action: str, point: PointId, outcome: str, duration_s: float, **details
    ) -> None:
        rec = RunRecord(ts, action, point.id, outcome, duration_s, details)
        self.records.append(rec)
        if self._path:
            with open(self._path, "a") as fh:
                fh.write(rec.to_json() + "\n")

    def retrain_versions(self, point: PointId) -> list[int]:
        """Registry versions produced by successful retrains, in log order."""
        return [
            r.details["version"]
            for r in self.records
            if r.action == ACTION_RETRAIN and r.point == point.id and r.outcome == "ok"
        ]

    @staticmethod
    def load(path: str | Path) -> list[dict]:
        out = []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if line:
                    out.append(json.loads(line))
        return out


def _fetch_clean_series(
    base_url: str,
    point: PointId,
    start: int,
    end: int,
    cfg: ScheduleConfig,
) -> IntervalSeries:
    series = fetch_history(base_url, point, start, end)
    screened, _ = sigma_filter(series, cfg.qc_policy)
    return impute_missing(screened, cfg.max_gap_hours)


def _fetch_inputs(
    base_url: str, binding: PointBinding, start: int, end: int, cfg: ScheduleConfig
) -> AlignedTable:
    """Pull, QC, and align all seven streams for one point."""
    load = _fetch_clean_series(base_url, binding.point, start, end, cfg)
    weather = [
        _fetch_clean_series(base_url, binding.sources[role], start, end, cfg)
        for role in WEATHER_ROLES
    ]
    return align(load, weather)


def run_retrain(
    sys_cfg: SystemConfig,
    registry: ModelRegistry,
    binding: PointBinding,
    now: int,
) -> int:
    """Grow-the-window retrain: all data to date, warm-started from the
    latest stored parameters when available. Returns the new version."""
    table = _fetch_inputs(
        sys_cfg.gateway_url, binding, sys_cfg.history_start, now + HOUR, sys_cfg.schedule
    )
    initial = None
    cfg = sys_cfg.train
    latest = registry.latest_version(binding.point)
    if latest is not None:
        cfg = replace(cfg, epochs=sys_cfg.schedule.retrain_epochs, seed=cfg.seed + latest)
        if sys_cfg.schedule.warm_start:
            prior = registry.get_latest(binding.point)
            initial = (prior.params, prior.head)
    split = scale_split_to_span(sys_cfg.split, table.span_hours())
    record, _curve = train_point_model(
        binding.point,
        table,
        cfg,
        split,
        feature_mode=sys_cfg.feature_mode,
        initial=initial,
    )
    return registry.put(record, now=now)


def run_forecast(
    sys_cfg: SystemConfig,
    registry: ModelRegistry,
    binding: PointBinding,
    now: int,
) -> tuple[int, int, int]:
    """Issue and push one 18-hour grid; returns (model_version, accepted, stale)."""
    record = registry.get_latest(binding.point)
    lookback = record.train_config.lookback
    start = now - (lookback - 1 + QC_CONTEXT_HOURS) * HOUR
    table = _fetch_inputs(sys_cfg.gateway_url, binding, start, now + HOUR, sys_cfg.schedule)
    if len(table) < lookback:
        raise ValidationError(
            f"{binding.point}: only {len(table)} clean rows for a lookback of {lookback}"
        )
    grid = issue_forecast(record, table.tail(lookback), now)
    accepted, stale = push_forecast(sys_cfg.gateway_url, grid)
    return record.version, accepted, stale


def run_loop(
    sys_cfg: SystemConfig,
    registry: ModelRegistry,
    clock,
    until: int | None = None,
    state: SchedulerState | None = None,
    log: RunLog | None = None,
) -> RunLog:
    """Drive scheduled actions until `until` (forever when None).

    Every due action produces exactly one log record. A failing action for
    one point never blocks other points; its last-run mark is left unchanged
    so the next tick retries it.
    """
    state = state if state is not None else SchedulerState()
    log = log if log is not None else RunLog(sys_cfg.run_log)
    schedule = sys_cfg.schedule
    while True:
        now = clock.now()
        if until is not None and now > until:
            break
        for action in tick(now, state, schedule):
            started = time.perf_counter()
            try:
                if action.kind == ACTION_RETRAIN:
                    version = run_retrain(sys_cfg, registry, _binding(schedule, action.point), now)
                    state.mark(action.point, ACTION_RETRAIN, now)
                    state.retrain_failures[action.point.id] = 0
                    log.record(
                        now,
                        ACTION_RETRAIN,
                        action.point,
                        "ok",
                        time.perf_counter() - started,
                        version=version,
                    )
                else:
                    version, accepted, stale = run_forecast(
                        sys_cfg, registry, _binding(schedule, action.point), now
                    )
                    state.mark(action.point, ACTION_FORECAST, now)
                    log.record(
                        now,
                        ACTION_FORECAST,
                        action.point,
                        "ok",
                        time.perf_counter() - started,
                        version=version,
                        accepted=accepted,
                        stale=stale,
                    )
            except LoadcastError as e:
                log.record(
                    now,
                    action.kind,
                    action.point,
                    f"error: {e}",
                    time.perf_counter() - started,
                )
                if action.kind == ACTION_RETRAIN:
                    streak = state.retrain_failures.get(action.point.id, 0) + 1
                    state.retrain_failures[action.point.id] = streak
                    if streak % ALERT_AFTER_FAILURES == 0:
                        log.record(
                            now,
                            "alert",
                            action.point,
                            f"retrain failed {streak} consecutive times",
                            0.0,
                        )
        if until is not None and clock.now() >= until:
            break
        clock.sleep(schedule.forecast_cadence_s)
    return log


def _binding(schedule: ScheduleConfig, point: PointId) -> PointBinding:
    for b in schedule.points:
        if b.point == point:
            return b
    raise ValidationError(f"point {point} is not configured")


# ---------------------------------------------------------------------------
# Hyperparameter grid search


@dataclass
class GridSearchRow:
    rank: int
    config: TrainConfig
    status: str
    final_test_mse: float | None
    overall_mse: float | None


@dataclass
class GridSearchReport:
    rows: list[GridSearchRow]

    @property
    def all_failed(self) -> bool:
        return all(r.status != "ok" for r in self.rows)

    def to_csv(self) -> str:
        lines = [
            "rank,status,optimizer,learning_rate,batch_size,lookback,hidden_dim,"
            "epochs,seed,final_test_mse_scaled,overall_mse"
        ]
        for r in self.rows:
            c = r.config
            lines.append(
                f"{r.rank},{r.status},{c.optimizer},{c.learning_rate},{c.batch_size},"
                f"{c.lookback},{c.hidden_dim},{c.epochs},{c.seed},"
                f"{'' if r.final_test_mse is None else repr(r.final_test_mse)},"
                f"{'' if r.overall_mse is None else repr(r.overall_mse)}"
            )
        return "\n".join(lines) + "\n"


def grid_search(
    point: PointId,
    table: AlignedTable,
    variants: list[TrainConfig],
    split_spec: SplitSpec,
    feature_mode: str,
    horizon: int = HORIZON,
) -> GridSearchReport:
    """Train every variant on the same chronological split and rank by final
    test MSE (scaled space). Never promotes automatically; promotion is an
    explicit registry put by the operator."""
    if not variants:
        raise ValidationError("grid search needs at least one variant")
    rows: list[GridSearchRow] = []
    for cfg in variants:
        try:
            record, curve = train_point_model(
                point, table, cfg, split_spec, feature_mode=feature_mode, horizon=horizon
            )
            rows.append(
                GridSearchRow(
                    rank=0,
                    config=cfg,
                    status="ok",
                    final_test_mse=curve.final()[2],
                    overall_mse=record.headline_mse(),
                )
            )
        except DivergenceError as e:
            rows.append(
                GridSearchRow(
                    rank=0, config=cfg, status=f"diverged@{e.epoch}", final_test_mse=None,
                    overall_mse=None,
                )
            )
    rows.sort(key=lambda r: (r.status != "ok", r.final_test_mse if r.final_test_mse is not None else float("inf")))
    for i, r in enumerate(rows, start=1):
        r.rank = i
    return GridSearchReport(rows=rows)


def verify_runlog_against_registry(
    log: RunLog, registry: ModelRegistry, point: PointId, preexisting: list[int]
) -> bool:
    """Replay check: versions recorded by successful retrains, appended to the
    versions that existed before the run, must equal the registry's history."""
    expected = list(preexisting) + log.retrain_versions(point)
    actual = [info.version for info in registry.list_versions(point)]
    return expected == actual
