"""HTTP client side: pull history from an upstream gateway, push forecasts.

Transient network failures and 5xx responses retry with exponential backoff
(base 1 s, factor 2, at most 5 attempts). Error grids and malformed payloads
are protocol errors and never retried.
"""

from __future__ import annotations

import math
import time
from typing import Callable

import numpy as np
import requests

from ..errors import NotFoundError, ProtocolError, TransportError
from ..pipeline import ForecastGrid
from ..series import HOUR, IntervalSeries, PointId, format_ts, parse_ts
from .grids import GridDocument, parse_grid

MAX_ATTEMPTS = 5
BACKOFF_BASE_S = 1.0
BACKOFF_FACTOR = 2.0


def _request_with_retry(
    method: str,
    url: str,
    *,
    session=None,
    sleep: Callable[[float], None] = time.sleep,
    max_attempts: int = MAX_ATTEMPTS,
    timeout: float = 30.0,
    **kwargs,
):
    http = session or requests
    last_error: Exception | None = None
    for attempt in range(1, max_attempts + 1):
        try:
            response = http.request(method, url, timeout=timeout, **kwargs)
        except (requests.ConnectionError, requests.Timeout) as e:
            last_error = e
        else:
            if response.status_code >= 500:
                last_error = TransportError(
                    f"{url}: upstream returned {response.status_code}"
                )
            else:
                return response
        if attempt < max_attempts:
            sleep(BACKOFF_BASE_S * BACKOFF_FACTOR ** (attempt - 1))
    raise TransportError(f"{url}: giving up after {max_attempts} attempts: {last_error}")


def _checked_grid(response) -> GridDocument:
    grid = parse_grid(response.text)
    if grid.is_error:
        message = f"upstream error grid: {grid.dis or 'no dis'}"
        if response.status_code == 404:
            raise NotFoundError(message)
        raise ProtocolError(message)
    if response.status_code != 200:
        raise ProtocolError(f"unexpected status {response.status_code} with non-error grid")
    return grid


def fetch_history(
    base_url: str,
    point: PointId,
    start: int,
    end: int,
    *,
    session=None,
    sleep: Callable[[float], None] = time.sleep,
    max_attempts: int = MAX_ATTEMPTS,
) -> IntervalSeries:
    """hisRead [start, end) from the upstream gateway as an hourly series.

    The grid's rows become present samples; hours inside the range with no
    row stay missing so QC and imputation see the true gaps.
    """
    url = f"{base_url}/api/hisRead"
    params = {"id": point.id, "range": f"{format_ts(start)},{format_ts(end)}"}
    response = _request_with_retry(
        "GET", url, params=params, session=session, sleep=sleep, max_attempts=max_attempts
    )
    grid = _checked_grid(response)
    unit = str(grid.meta.get("unit", ""))
    by_ts: dict[int, float] = {}
    try:
        for row in grid.rows:
            ts = parse_ts(str(row["ts"]))
            val = float(row["val"])
            if not math.isfinite(val):
                raise ProtocolError(f"non-finite value at {row['ts']}")
            by_ts[ts] = val
    except (KeyError, ValueError, TypeError) as e:
        raise ProtocolError(f"malformed hisRead row: {e}") from e
    first = ((start + HOUR - 1) // HOUR) * HOUR
    samples_ts = list(range(first, end, HOUR))
    values = [by_ts.get(t, float("nan")) for t in samples_ts]
    return IntervalSeries.from_arrays(
        point, unit, HOUR, np.array(samples_ts, dtype=np.int64), np.array(values)
    )


def push_forecast(
    base_url: str,
    grid: ForecastGrid,
    *,
    session=None,
    sleep: Callable[[float], None] = time.sleep,
    max_attempts: int = MAX_ATTEMPTS,
) -> tuple[int, int]:
    """hisWrite one issuance; returns (accepted, stale) as counted upstream."""
    body = {
        "meta": {
            "op": "hisWrite",
            "id": grid.point.id,
            "issuedAt": format_ts(grid.issued_at),
            "modelVersion": grid.model_version,
        },
        "cols": [{"name": "ts"}, {"name": "val"}],
        "rows": [{"ts": format_ts(ts), "val": val} for ts, val in grid.entries],
    }
    response = _request_with_retry(
        "POST",
        f"{base_url}/api/hisWrite",
        json=body,
        session=session,
        sleep=sleep,
        max_attempts=max_attempts,
    )
    out = _checked_grid(response)
    try:
        row = out.rows[0]
        return int(row["accepted"]), int(row["stale"])
    except (IndexError, KeyError, ValueError) as e:
        raise ProtocolError(f"malformed hisWrite response: {e}") from e


def fetch_forecast(
    base_url: str,
    point: PointId,
    start: int | None = None,
    end: int | None = None,
    *,
    session=None,
    sleep: Callable[[float], None] = time.sleep,
) -> list[dict]:
    """Effective forecast rows for a point, parsed to epoch timestamps."""
    params: dict[str, str] = {"id": point.id}
    if start is not None and end is not None:
        params["range"] = f"{format_ts(start)},{format_ts(end)}"
    response = _request_with_retry(
        "GET", f"{base_url}/api/forecast", params=params, session=session, sleep=sleep
    )
    grid = _checked_grid(response)
    return [
        {
            "ts": parse_ts(str(r["ts"])),
            "val": float(r["val"]),
            "issuedAt": parse_ts(str(r["issuedAt"])),
            "modelVersion": int(r["modelVersion"]),
        }
        for r in grid.rows
    ]
