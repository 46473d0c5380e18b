"""Canonical time-series data model: points, samples, hourly series, alignment.

Timestamps are UTC integer epoch seconds everywhere. Hour buckets are
closed-open [t, t+3600). A missing measurement is represented as a sample
whose value is None (NaN in array form), never by deleting the slot.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import re
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import ValidationError

HOUR = 3600

#: Canonical order of the six weather input features.
WEATHER_ROLES = (
    "rel_humidity",
    "pressure",
    "dry_bulb_temp",
    "ghi",
    "cloud_cover",
    "wind_speed",
)

ROLE_UNITS = {
    "rel_humidity": "%",
    "pressure": "hPa",
    "dry_bulb_temp": "°C",
    "ghi": "W/m²",
    "cloud_cover": "%",
    "wind_speed": "m/s",
    "load": "kW",
}

_SAFE_CHARS = re.compile(r"[^A-Za-z0-9._-]")


@dataclass(frozen=True, order=True)
class PointId:
    """Opaque identifier of one measured or predicted quantity."""

    id: str

    def __post_init__(self):
        if not self.id:
            raise ValidationError("point id must be non-empty")

    def sanitized(self) -> str:
        """File-system-safe key: unsafe characters replaced, suffixed with a
        short hash when the replacement was lossy so distinct ids never collide."""
        safe = _SAFE_CHARS.sub("_", self.id)
        if safe == self.id:
            return safe
        digest = hashlib.blake2b(self.id.encode(), digest_size=4).hexdigest()
        return f"{safe}-{digest}"

    def __str__(self) -> str:
        return self.id


@dataclass(frozen=True)
class Sample:
    """One timestamped measurement; value None means missing."""

    ts: int
    value: float | None

    def __post_init__(self):
        if self.value is not None and not math.isfinite(self.value):
            raise ValidationError(f"sample at {self.ts} has non-finite value {self.value}")


class IntervalSeries:
    """Regularly sampled measurement stream for one point.

    Immutable after construction. Timestamps are strictly increasing and
    each one is an integer multiple of resolution_s.
    """

    __slots__ = ("point", "unit", "resolution_s", "_ts", "_values")

    def __init__(self, point: PointId, unit: str, resolution_s: int, samples: Sequence[Sample]):
        if resolution_s <= 0:
            raise ValidationError(f"resolution_s must be positive, got {resolution_s}")
        ts = np.array([s.ts for s in samples], dtype=np.int64)
        values = np.array(
            [np.nan if s.value is None else s.value for s in samples], dtype=np.float64
        )
        if ts.size:
            if np.any(np.diff(ts) <= 0):
                raise ValidationError(f"{point}: timestamps must be strictly increasing")
            if np.any(ts % resolution_s != 0):
                raise ValidationError(
                    f"{point}: timestamps must be multiples of resolution_s={resolution_s}"
                )
            present = values[~np.isnan(values)]
            if present.size and not np.all(np.isfinite(present)):
                raise ValidationError(f"{point}: values must be finite or missing")
        self.point = point
        self.unit = unit
        self.resolution_s = int(resolution_s)
        self._ts = ts
        self._values = values
        self._ts.setflags(write=False)
        self._values.setflags(write=False)

    @classmethod
    def from_arrays(
        cls,
        point: PointId,
        unit: str,
        resolution_s: int,
        ts: np.ndarray,
        values: np.ndarray,
    ) -> "IntervalSeries":
        """Build from parallel arrays; NaN in values marks a missing sample."""
        samples = [
            Sample(int(t), None if np.isnan(v) else float(v)) for t, v in zip(ts, values)
        ]
        return cls(point, unit, resolution_s, samples)

    def ts_array(self) -> np.ndarray:
        return self._ts

    def value_array(self) -> np.ndarray:
        """Values with NaN standing in for missing."""
        return self._values

    @property
    def samples(self) -> tuple[Sample, ...]:
        return tuple(
            Sample(int(t), None if np.isnan(v) else float(v))
            for t, v in zip(self._ts, self._values)
        )

    def __len__(self) -> int:
        return int(self._ts.size)

    def __iter__(self) -> Iterator[Sample]:
        return iter(self.samples)

    def present_count(self) -> int:
        return int(np.count_nonzero(~np.isnan(self._values)))

    def span(self) -> tuple[int, int] | None:
        """(first_ts, last_ts) or None for an empty series."""
        if not len(self):
            return None
        return int(self._ts[0]), int(self._ts[-1])

    def slice(self, start: int, end: int) -> "IntervalSeries":
        """Samples with start <= ts < end."""
        mask = (self._ts >= start) & (self._ts < end)
        return IntervalSeries.from_arrays(
            self.point, self.unit, self.resolution_s, self._ts[mask], self._values[mask]
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, IntervalSeries):
            return NotImplemented
        return (
            self.point == other.point
            and self.unit == other.unit
            and self.resolution_s == other.resolution_s
            and np.array_equal(self._ts, other._ts)
            and np.array_equal(self._values, other._values, equal_nan=True)
        )


_FRAME_RANGES = {
    "rel_humidity": (0.0, 100.0),
    "pressure": (0.0, math.inf),  # exclusive lower bound, checked below
    "ghi": (0.0, math.inf),
    "cloud_cover": (0.0, 100.0),
    "wind_speed": (0.0, math.inf),
}


@dataclass(frozen=True)
class WeatherFrame:
    """The six weather inputs for one hour, post-QC."""

    ts: int
    rel_humidity: float
    pressure: float
    dry_bulb_temp: float
    ghi: float
    cloud_cover: float
    wind_speed: float

    def __post_init__(self):
        for name, (lo, hi) in _FRAME_RANGES.items():
            v = getattr(self, name)
            if not math.isfinite(v) or v < lo or v > hi:
                raise ValidationError(f"weather frame at {self.ts}: {name}={v} out of range")
        if self.pressure <= 0:
            raise ValidationError(f"weather frame at {self.ts}: pressure must be > 0")
        if not math.isfinite(self.dry_bulb_temp):
            raise ValidationError(f"weather frame at {self.ts}: non-finite dry_bulb_temp")


class AlignedTable:
    """Hourly rows of (ts, six weather features, load), no missing values.

    Internally columnar; ``features`` columns follow WEATHER_ROLES order.
    """

    __slots__ = ("point", "ts", "features", "load")

    def __init__(self, point: PointId, ts: np.ndarray, features: np.ndarray, load: np.ndarray):
        ts = np.asarray(ts, dtype=np.int64)
        features = np.asarray(features, dtype=np.float64)
        load = np.asarray(load, dtype=np.float64)
        if features.shape != (ts.size, len(WEATHER_ROLES)) or load.shape != (ts.size,):
            raise ValidationError("aligned table arrays have inconsistent shapes")
        if ts.size:
            if np.any(np.diff(ts) <= 0):
                raise ValidationError("aligned table timestamps must be strictly increasing")
            if not (np.all(np.isfinite(features)) and np.all(np.isfinite(load))):
                raise ValidationError("aligned table must not contain missing values")
            self._check_ranges(features)
        self.point = point
        self.ts = ts
        self.features = features
        self.load = load
        for arr in (self.ts, self.features, self.load):
            arr.setflags(write=False)

    @staticmethod
    def _check_ranges(features: np.ndarray) -> None:
        # Same bounds WeatherFrame enforces row-wise, checked vectorized.
        bounds = {
            "rel_humidity": (0.0, 100.0),
            "ghi": (0.0, math.inf),
            "cloud_cover": (0.0, 100.0),
            "wind_speed": (0.0, math.inf),
        }
        for name, (lo, hi) in bounds.items():
            col = features[:, WEATHER_ROLES.index(name)]
            if np.any(col < lo) or np.any(col > hi):
                raise ValidationError(f"aligned table column {name!r} out of range")
        if np.any(features[:, WEATHER_ROLES.index("pressure")] <= 0):
            raise ValidationError("aligned table column 'pressure' must be > 0")

    def __len__(self) -> int:
        return int(self.ts.size)

    def frame(self, i: int) -> WeatherFrame:
        row = self.features[i]
        return WeatherFrame(int(self.ts[i]), *(float(x) for x in row))

    def rows(self) -> Iterator[tuple[int, WeatherFrame, float]]:
        for i in range(len(self)):
            yield int(self.ts[i]), self.frame(i), float(self.load[i])

    def tail(self, n: int) -> "AlignedTable":
        return AlignedTable(self.point, self.ts[-n:], self.features[-n:], self.load[-n:])

    def span_hours(self) -> int:
        if not len(self):
            return 0
        return int((self.ts[-1] - self.ts[0]) // HOUR) + 1


def resample_hourly(series: IntervalSeries) -> IntervalSeries:
    """Average sub-hourly samples into hourly buckets [t, t+3600).

    An hour with no present sub-samples yields a missing sample. Input
    resolution must divide one hour; hourly input passes through unchanged.
    """
    res = series.resolution_s
    if res > HOUR or HOUR % res != 0:
        raise ValidationError(
            f"{series.point}: resolution {res}s does not divide 3600s, cannot resample"
        )
    if res == HOUR or len(series) == 0:
        return IntervalSeries.from_arrays(
            series.point, series.unit, HOUR, series.ts_array(), series.value_array()
        )
    ts = series.ts_array()
    values = series.value_array()
    first_hour = int(ts[0]) // HOUR * HOUR
    last_hour = int(ts[-1]) // HOUR * HOUR
    hours = np.arange(first_hour, last_hour + HOUR, HOUR, dtype=np.int64)
    bucket = (ts - first_hour) // HOUR
    present = ~np.isnan(values)
    sums = np.bincount(bucket[present], weights=values[present], minlength=hours.size)
    counts = np.bincount(bucket[present], minlength=hours.size)
    out = np.full(hours.size, np.nan)
    nonzero = counts > 0
    out[nonzero] = sums[nonzero] / counts[nonzero]
    return IntervalSeries.from_arrays(series.point, series.unit, HOUR, hours, out)


def align(load: IntervalSeries, weather: Sequence[IntervalSeries]) -> AlignedTable:
    """Inner-join the load series with the six weather series on timestamp.

    Weather series must be passed in WEATHER_ROLES order. Only timestamps
    present (non-missing) in all seven series survive.
    """
    if len(weather) != len(WEATHER_ROLES):
        raise ValidationError(f"expected {len(WEATHER_ROLES)} weather series, got {len(weather)}")
    all_series = [load, *weather]
    for s in all_series:
        if s.resolution_s != HOUR:
            raise ValidationError(f"{s.point}: align requires hourly series")
    present_ts = []
    for s in all_series:
        mask = ~np.isnan(s.value_array())
        present_ts.append(set(s.ts_array()[mask].tolist()))
    common = set.intersection(*present_ts) if present_ts else set()
    if not common:
        ranges = ", ".join(
            f"{s.point}: {s.span() or 'empty'} ({s.present_count()} present)" for s in all_series
        )
        raise ValidationError(f"no common timestamps across series; ranges: {ranges}")
    ts = np.array(sorted(common), dtype=np.int64)
    columns = []
    for s in all_series:
        idx = {int(t): i for i, t in enumerate(s.ts_array())}
        vals = s.value_array()
        columns.append(np.array([vals[idx[int(t)]] for t in ts]))
    load_col = columns[0]
    features = np.stack(columns[1:], axis=1)
    return AlignedTable(load.point, ts, features, load_col)


# ---------------------------------------------------------------------------
# Timestamp and CSV helpers


def parse_ts(text: str) -> int:
    """Epoch seconds from ISO-8601 UTC text or a plain integer string."""
    text = text.strip()
    if re.fullmatch(r"-?\d+", text):
        return int(text)
    iso = text.replace("Z", "+00:00")
    try:
        dt = datetime.fromisoformat(iso)
    except ValueError as e:
        raise ValidationError(f"unparseable timestamp {text!r}") from e
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.astimezone(timezone.utc).timestamp())


def format_ts(ts: int) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def read_series_csv(
    path: str | Path, point: PointId, unit: str, resolution_s: int = HOUR
) -> IntervalSeries:
    """Read `ts,value` CSV; empty value field means missing."""
    samples = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["ts", "value"]:
            raise ValidationError(f"{path}: expected header 'ts,value', got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < 2:
                raise ValidationError(f"{path}:{lineno}: expected 2 fields, got {row}")
            ts = parse_ts(row[0])
            raw = row[1].strip()
            samples.append(Sample(ts, float(raw) if raw else None))
    return IntervalSeries(point, unit, resolution_s, samples)


def write_series_csv(series: IntervalSeries, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ts", "value"])
        for ts, v in zip(series.ts_array(), series.value_array()):
            writer.writerow([format_ts(int(ts)), "" if np.isnan(v) else repr(float(v))])


def write_dataset(
    directory: str | Path, load: IntervalSeries, weather: Sequence[IntervalSeries]
) -> None:
    """Write one CSV per series plus a manifest naming each point and unit."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for role, s in zip(("load", *WEATHER_ROLES), (load, *weather)):
        fname = f"{s.point.sanitized()}.csv"
        write_series_csv(s, directory / fname)
        entries.append({"id": s.point.id, "unit": s.unit, "file": fname, "role": role})
    manifest = {"points": entries}
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2))


def read_dataset(directory: str | Path) -> tuple[IntervalSeries, list[IntervalSeries]]:
    """Load the manifest-described dataset: (load, weather in canonical order)."""
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise ValidationError(f"{directory}: missing manifest.json")
    manifest = json.loads(manifest_path.read_text())
    by_role = {e["role"]: e for e in manifest.get("points", [])}
    missing = [r for r in ("load", *WEATHER_ROLES) if r not in by_role]
    if missing:
        raise ValidationError(f"{manifest_path}: manifest missing roles {missing}")

    def load_one(entry) -> IntervalSeries:
        return read_series_csv(
            directory / entry["file"], PointId(entry["id"]), entry["unit"], HOUR
        )

    load = load_one(by_role["load"])
    weather = [load_one(by_role[r]) for r in WEATHER_ROLES]
    return load, weather
