"""Real-time quality control: rolling sigma screening and gap imputation.

Flagged samples become missing (never deleted, never clamped) so the audit
trail survives and downstream imputation can decide what to fill.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .series import HOUR, IntervalSeries, PointId


@dataclass(frozen=True)
class QcPolicy:
    """Sigma-screening policy.

    window_hours None means global statistics over the whole series;
    otherwise a trailing window of that many hours ending at the candidate.
    The candidate sample is always excluded from its own window statistics,
    so a lone spike cannot inflate sigma and mask itself.
    """

    sigma_threshold: float = 3.0
    window_hours: int | None = 720
    min_window_count: int = 24

    def __post_init__(self):
        if self.sigma_threshold <= 0:
            raise ValidationError("sigma_threshold must be positive")
        if self.min_window_count < 2:
            raise ValidationError("min_window_count must be >= 2")
        if self.window_hours is not None and self.window_hours < self.min_window_count:
            raise ValidationError("rolling window must cover at least min_window_count hours")


@dataclass
class QcReport:
    """Audit record of one screening pass."""

    point: PointId
    examined: int = 0
    removed: int = 0
    unscreened: int = 0
    removed_ts: list[int] = field(default_factory=list)
    window_stats: list[tuple[int, float, float]] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {
                "point": self.point.id,
                "examined": self.examined,
                "removed": self.removed,
                "unscreened": self.unscreened,
                "removedTs": self.removed_ts,
                "windowStats": [
                    {"ts": ts, "mean": m, "std": s} for ts, m, s in self.window_stats
                ],
            }
        )

    def summary(self) -> str:
        return (
            f"{self.point}: examined={self.examined} removed={self.removed} "
            f"unscreened={self.unscreened}"
        )


def sigma_filter(series: IntervalSeries, policy: QcPolicy) -> tuple[IntervalSeries, QcReport]:
    """Flag samples lying outside sigma_threshold standard deviations.

    A present sample at t is flagged iff |value - mu| > threshold * sigma,
    where mu and sigma are computed over the window's other present samples
    (leave-one-out). Samples whose window holds fewer than min_window_count
    present samples pass through unflagged and are counted as unscreened.
    Timestamps and series length never change; flagged values become missing.
    """
    ts = series.ts_array()
    values = series.value_array().copy()
    report = QcReport(point=series.point)
    present = ~np.isnan(values)
    n = values.size
    report.examined = int(np.count_nonzero(present))
    if report.examined == 0:
        return series, report

    # Prefix sums over centered values keep the variance computation stable.
    shift = float(np.nanmean(values))
    centered = np.where(present, values - shift, 0.0)
    csum = np.concatenate([[0.0], np.cumsum(centered)])
    csum2 = np.concatenate([[0.0], np.cumsum(centered**2)])
    ccount = np.concatenate([[0], np.cumsum(present.astype(np.int64))])

    def window_range(i: int) -> tuple[int, int]:
        # Trailing window (t - window_hours, t]: exactly window_hours slots
        # on an hourly grid, candidate's slot included.
        if policy.window_hours is None:
            return 0, n
        lo_ts = ts[i] - policy.window_hours * HOUR
        lo = int(np.searchsorted(ts, lo_ts, side="right"))
        return lo, i + 1

    flagged = np.zeros(n, dtype=bool)
    for i in np.flatnonzero(present):
        lo, hi = window_range(int(i))
        count = int(ccount[hi] - ccount[lo])
        if count < policy.min_window_count:
            report.unscreened += 1
            continue
        v = centered[i]
        others = count - 1
        s1 = csum[hi] - csum[lo] - v
        s2 = csum2[hi] - csum2[lo] - v * v
        mu = s1 / others
        var = max(s2 / others - mu * mu, 0.0)
        sigma = float(np.sqrt(var))
        report.window_stats.append((int(ts[i]), mu + shift, sigma))
        if abs(v - mu) > policy.sigma_threshold * sigma:
            flagged[i] = True
            report.removed += 1
            report.removed_ts.append(int(ts[i]))

    values[flagged] = np.nan
    filtered = IntervalSeries.from_arrays(
        series.point, series.unit, series.resolution_s, ts, values
    )
    return filtered, report


def impute_missing(series: IntervalSeries, max_gap_hours: int) -> IntervalSeries:
    """Fill missing runs of length <= max_gap_hours by linear interpolation.

    Longer runs, and leading/trailing missing samples, are left untouched.
    Idempotent: a second pass changes nothing.
    """
    if series.resolution_s != HOUR:
        raise ValidationError(f"{series.point}: impute_missing expects an hourly series")
    values = series.value_array().copy()
    ts = series.ts_array()
    missing = np.isnan(values)
    if not missing.any():
        return series
    present_idx = np.flatnonzero(~missing)
    if present_idx.size == 0:
        return series
    for left, right in zip(present_idx[:-1], present_idx[1:]):
        # Gap length in hours of wall time, not sample count: the hourly grid
        # may itself skip timestamps.
        gap_hours = int((ts[right] - ts[left]) // HOUR) - 1
        if gap_hours == 0 or gap_hours > max_gap_hours:
            continue
        span = ts[right] - ts[left]
        for j in range(left + 1, right):
            w = (ts[j] - ts[left]) / span
            values[j] = (1 - w) * values[left] + w * values[right]
    return IntervalSeries.from_arrays(series.point, series.unit, HOUR, ts, values)
