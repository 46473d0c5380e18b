"""In-memory measurement store backing the gateway's history reads."""

from __future__ import annotations

import threading
from pathlib import Path

from ..errors import NotFoundError
from ..series import IntervalSeries, PointId, read_dataset


class MeasurementStore:
    """Point id -> IntervalSeries, safe for concurrent readers and writers."""

    def __init__(self):
        self._series: dict[str, IntervalSeries] = {}
        self._lock = threading.RLock()

    @classmethod
    def from_directory(cls, data_dir: str | Path) -> "MeasurementStore":
        """Load every series named by the directory's manifest."""
        store = cls()
        load, weather = read_dataset(data_dir)
        for s in (load, *weather):
            store.put_series(s)
        return store

    def put_series(self, series: IntervalSeries) -> None:
        with self._lock:
            self._series[series.point.id] = series

    def get(self, point: PointId) -> IntervalSeries:
        with self._lock:
            series = self._series.get(point.id)
        if series is None:
            raise NotFoundError(f"unknown point {point}")
        return series

    def slice(self, point: PointId, start: int, end: int) -> IntervalSeries:
        return self.get(point).slice(start, end)

    def has(self, point: PointId) -> bool:
        with self._lock:
            return point.id in self._series

    def points(self) -> list[str]:
        with self._lock:
            return sorted(self._series)
