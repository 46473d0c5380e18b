"""Forecast cache with latest-wins conflict resolution.

Forecast issuances overlap: an issuance at 10:00 and one at 11:00 both cover
12:00-04:00. Per target timestamp the entry from the greatest issued_at wins,
ties broken by greater model_version; stale writes are counted and dropped.
The result is independent of write order.

Accepted entries append to a JSON-lines log so a restart rebuilds the exact
effective state.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass
from pathlib import Path

from ..errors import ValidationError
from ..series import HOUR, PointId


@dataclass(frozen=True)
class ForecastCacheEntry:
    point: PointId
    target_ts: int
    value: float
    issued_at: int
    model_version: int


@dataclass
class WriteOutcome:
    accepted: int
    stale: int


class ForecastCache:
    def __init__(self, log_path: str | Path | None = None):
        self._effective: dict[str, dict[int, ForecastCacheEntry]] = {}
        self._lock = threading.RLock()
        self._log_path = Path(log_path) if log_path else None
        if self._log_path and self._log_path.exists():
            self._replay_log()

    def _replay_log(self) -> None:
        with open(self._log_path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                entry = ForecastCacheEntry(
                    point=PointId(rec["point"]),
                    target_ts=rec["targetTs"],
                    value=rec["value"],
                    issued_at=rec["issuedAt"],
                    model_version=rec["modelVersion"],
                )
                self._apply(entry)

    def _apply(self, entry: ForecastCacheEntry) -> bool:
        """Latest-wins upsert of one entry; True if it became effective."""
        per_point = self._effective.setdefault(entry.point.id, {})
        existing = per_point.get(entry.target_ts)
        if existing is not None:
            if (entry.issued_at, entry.model_version) <= (
                existing.issued_at,
                existing.model_version,
            ):
                return False
        per_point[entry.target_ts] = entry
        return True

    def upsert(
        self,
        point: PointId,
        items: list[tuple[int, float]],
        issued_at: int,
        model_version: int,
    ) -> WriteOutcome:
        """Apply one issuance's (target_ts, value) items; returns accepted and
        stale counts. Validates hour alignment and finiteness up front."""
        for ts, val in items:
            if ts % HOUR != 0:
                raise ValidationError(f"target ts {ts} is not on an hour boundary")
            if not math.isfinite(val):
                raise ValidationError(f"non-finite forecast value at {ts}")
        outcome = WriteOutcome(accepted=0, stale=0)
        with self._lock:
            log_lines = []
            for ts, val in items:
                entry = ForecastCacheEntry(
                    point=point,
                    target_ts=ts,
                    value=float(val),
                    issued_at=issued_at,
                    model_version=model_version,
                )
                if self._apply(entry):
                    outcome.accepted += 1
                    log_lines.append(
                        json.dumps(
                            {
                                "point": point.id,
                                "targetTs": ts,
                                "value": entry.value,
                                "issuedAt": issued_at,
                                "modelVersion": model_version,
                            }
                        )
                    )
                else:
                    outcome.stale += 1
            if self._log_path and log_lines:
                with open(self._log_path, "a") as fh:
                    fh.write("\n".join(log_lines) + "\n")
        return outcome

    def effective(
        self, point: PointId, start: int | None = None, end: int | None = None
    ) -> list[ForecastCacheEntry]:
        """Effective entries with start <= target_ts < end, ascending."""
        with self._lock:
            per_point = self._effective.get(point.id, {})
            entries = [
                e
                for ts, e in per_point.items()
                if (start is None or ts >= start) and (end is None or ts < end)
            ]
        return sorted(entries, key=lambda e: e.target_ts)

    def points(self) -> list[str]:
        with self._lock:
            return sorted(p for p, m in self._effective.items() if m)

    def has_point(self, point: PointId) -> bool:
        with self._lock:
            return bool(self._effective.get(point.id))
