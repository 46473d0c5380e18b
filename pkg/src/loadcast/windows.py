"""Supervised-window construction, chronological splitting, feature scaling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .series import HOUR, WEATHER_ROLES, AlignedTable

#: Average month in hours (365 days / 12); a 365-day year is exactly 12 months.
MONTH_HOURS = 730

FEATURE_MODE_WEATHER = "weather"
FEATURE_MODE_WEATHER_LOAD = "weather+load"
FEATURE_MODES = (FEATURE_MODE_WEATHER, FEATURE_MODE_WEATHER_LOAD)


def feature_dim(mode: str) -> int:
    if mode == FEATURE_MODE_WEATHER:
        return len(WEATHER_ROLES)
    if mode == FEATURE_MODE_WEATHER_LOAD:
        return len(WEATHER_ROLES) + 1
    raise ValidationError(f"unknown feature mode {mode!r}")


def feature_matrix(table: AlignedTable, mode: str) -> np.ndarray:
    """Model-input columns for every table row, per the configured mode."""
    if mode == FEATURE_MODE_WEATHER:
        return table.features
    if mode == FEATURE_MODE_WEATHER_LOAD:
        return np.concatenate([table.features, table.load[:, None]], axis=1)
    raise ValidationError(f"unknown feature mode {mode!r}")


@dataclass(frozen=True)
class Window:
    """One supervised pair: L consecutive feature rows and the K future loads.

    issued_at is the timestamp of the last input row; targets cover
    issued_at + 1h .. issued_at + Kh.
    """

    X: np.ndarray
    target: np.ndarray
    start_ts: int
    issued_at: int
    target_ts: np.ndarray


def build_windows(
    table: AlignedTable, lookback: int, horizon: int, mode: str = FEATURE_MODE_WEATHER
) -> list[Window]:
    """One window per index whose L input rows and K target rows are all
    consecutive hours; windows straddling a gap in the table are skipped."""
    if lookback < 1 or horizon < 1:
        raise ValidationError("lookback and horizon must be >= 1")
    n = len(table)
    L, K = lookback, horizon
    if n < L + K:
        raise ValidationError(
            f"{table.point}: table has {n} rows, need at least {L + K} for L={L}, K={K}"
        )
    feats = feature_matrix(table, mode)
    ts = table.ts
    # consecutive[i] == 1 iff row i+1 is exactly one hour after row i.
    consecutive = (np.diff(ts) == HOUR).astype(np.int64)
    steps = np.concatenate([[0], np.cumsum(consecutive)])
    out: list[Window] = []
    for t in range(L - 1, n - K):
        lo, hi = t - L + 1, t + K
        if steps[hi] - steps[lo] != L + K - 1:
            continue
        out.append(
            Window(
                X=feats[lo : t + 1],
                target=table.load[t + 1 : t + K + 1],
                start_ts=int(ts[lo]),
                issued_at=int(ts[t]),
                target_ts=ts[t + 1 : t + K + 1],
            )
        )
    if not out:
        gaps = int(np.count_nonzero(consecutive == 0))
        raise ValidationError(
            f"{table.point}: no valid windows (rows={n}, L={L}, K={K}, gaps in table={gaps})"
        )
    return out


@dataclass(frozen=True)
class SplitSpec:
    """Chronological train/test proportions in months (default 10 + 2)."""

    train_months: int = 10
    test_months: int = 2

    def __post_init__(self):
        if self.train_months < 1 or self.test_months < 1:
            raise ValidationError("train_months and test_months must be >= 1")

    @property
    def total_months(self) -> int:
        return self.train_months + self.test_months

    def to_dict(self) -> dict:
        return {"trainMonths": self.train_months, "testMonths": self.test_months}

    @classmethod
    def from_dict(cls, d: dict) -> "SplitSpec":
        return cls(train_months=d["trainMonths"], test_months=d["testMonths"])


@dataclass
class SplitResult:
    train: list[Window]
    test: list[Window]
    boundary: int
    dropped: int


def scale_split_to_span(spec: SplitSpec, span_hours: int) -> SplitSpec:
    """Rescale the train/test month ratio onto a longer data span.

    Used by grow-the-window retraining: a 10+2 spec over 18 months of data
    becomes 15+3, keeping the boundary at the same fraction of the span."""
    total = max(spec.total_months, round(span_hours / MONTH_HOURS))
    train = max(1, min(total - 1, round(total * spec.train_months / spec.total_months)))
    return SplitSpec(train_months=train, test_months=total - train)


def chronological_split(
    windows: list[Window], spec: SplitSpec, span: tuple[int, int] | None = None
) -> SplitResult:
    """Partition windows at the train/test boundary timestamp.

    The boundary is the data start plus train_months (of 730 hours each). A
    window is train iff its last target timestamp is at or before the
    boundary, test iff its first input row is after it; windows straddling
    the boundary go to neither set (dropped, counted).
    """
    if not windows:
        raise ValidationError("no windows to split")
    if span is None:
        span = (min(w.start_ts for w in windows), max(int(w.target_ts[-1]) for w in windows))
    start, end = span
    if end <= start:
        raise ValidationError(f"degenerate data span [{start}, {end}]")
    boundary = start + spec.train_months * MONTH_HOURS * HOUR
    train = [w for w in windows if int(w.target_ts[-1]) <= boundary]
    test = [w for w in windows if w.start_ts > boundary]
    dropped = len(windows) - len(train) - len(test)
    if not train or not test:
        raise ValidationError(
            f"split {spec.train_months}/{spec.test_months} months left an empty partition "
            f"(train={len(train)}, test={len(test)}, span=[{start}, {end}])"
        )
    return SplitResult(train=train, test=test, boundary=boundary, dropped=dropped)


SCALER_COLUMNS = WEATHER_ROLES + ("load",)


@dataclass(frozen=True)
class FeatureScaler:
    """Per-column standardization: six weather columns plus the load.

    Weather statistics come from the stacked train-window feature rows; load
    statistics from the stacked train targets. In weather+load mode the
    past-load input column is standardized with the load statistics (same
    physical quantity as the targets).
    """

    means: tuple[float, ...]
    stds: tuple[float, ...]
    fitted_start: int
    fitted_end: int

    def __post_init__(self):
        if len(self.means) != len(SCALER_COLUMNS) or len(self.stds) != len(SCALER_COLUMNS):
            raise ValidationError("scaler must carry exactly 7 column statistics")
        for name, s in zip(SCALER_COLUMNS, self.stds):
            if s <= 0:
                raise ValidationError(f"scaler column {name!r} has non-positive std {s}")

    def _feature_stats(self, d: int) -> tuple[np.ndarray, np.ndarray]:
        mu = np.array(self.means[: len(WEATHER_ROLES)])
        sd = np.array(self.stds[: len(WEATHER_ROLES)])
        if d == len(WEATHER_ROLES) + 1:
            mu = np.append(mu, self.means[-1])
            sd = np.append(sd, self.stds[-1])
        elif d != len(WEATHER_ROLES):
            raise ValidationError(f"feature dimension {d} not supported by scaler")
        return mu, sd

    def apply_features(self, X: np.ndarray) -> np.ndarray:
        mu, sd = self._feature_stats(X.shape[-1])
        return (X - mu) / sd

    def invert_features(self, X: np.ndarray) -> np.ndarray:
        mu, sd = self._feature_stats(X.shape[-1])
        return X * sd + mu

    def apply_load(self, y: np.ndarray) -> np.ndarray:
        return (y - self.means[-1]) / self.stds[-1]

    def invert_load(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(y) * self.stds[-1] + self.means[-1]

    def to_dict(self) -> dict:
        return {
            "means": list(self.means),
            "stds": list(self.stds),
            "fittedStart": self.fitted_start,
            "fittedEnd": self.fitted_end,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureScaler":
        return cls(
            means=tuple(d["means"]),
            stds=tuple(d["stds"]),
            fitted_start=d["fittedStart"],
            fitted_end=d["fittedEnd"],
        )


def fit_scaler(train_windows: list[Window]) -> FeatureScaler:
    """Fit column statistics on the train partition only.

    Rejects any zero-variance column by name: a constant column cannot be
    standardized and signals broken input data.
    """
    if not train_windows:
        raise ValidationError("cannot fit scaler on an empty train partition")
    stacked = np.concatenate([w.X for w in train_windows], axis=0)
    weather = stacked[:, : len(WEATHER_ROLES)]
    targets = np.concatenate([w.target for w in train_windows])
    means = weather.mean(axis=0).tolist() + [float(targets.mean())]
    stds = weather.std(axis=0).tolist() + [float(targets.std())]
    for name, s in zip(SCALER_COLUMNS, stds):
        if s <= 0 or not np.isfinite(s):
            raise ValidationError(f"column {name!r} has zero variance on the train partition")
    return FeatureScaler(
        means=tuple(means),
        stds=tuple(stds),
        fitted_start=min(w.start_ts for w in train_windows),
        fitted_end=max(int(w.target_ts[-1]) for w in train_windows),
    )


def scale_pairs(windows: list[Window], scaler: FeatureScaler) -> list[tuple[np.ndarray, np.ndarray]]:
    """(X, target) pairs in scaled space, ready for the training engine."""
    return [(scaler.apply_features(w.X), scaler.apply_load(w.target)) for w in windows]
