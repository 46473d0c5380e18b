"""HTTP gateway: history reads, forecast writes, forecast cache reads.

Endpoints (all responses are JSON grids, including every error path):

    GET  /api/about                     service identity and server time
    GET  /api/read?filter=point         list known points
    GET  /api/read?id=<id>              one point's metadata
    GET  /api/hisRead?id=<id>&range=A,B history rows (measurements first,
                                        forecast cache as fallback)
    POST /api/hisWrite                  forecast issuance into the cache
    GET  /api/forecast?id=<id>[&range]  effective forecast with provenance

Ranges are closed-open [start, end) in ISO-8601 UTC. Status codes: 400
malformed input, 404 unknown id, 503 backing-store failure.
"""

from __future__ import annotations

import json
import math
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from ..errors import NotFoundError, StoreError, ValidationError
from ..series import HOUR, PointId, format_ts, parse_ts
from .cache import ForecastCache
from .grids import GridDocument, error_grid, make_grid
from .store import MeasurementStore

PRODUCT_NAME = "loadcast"


def _parse_range(text: str | None) -> tuple[int | None, int | None]:
    if text is None:
        return None, None
    parts = text.split(",")
    if len(parts) != 2:
        raise ValidationError(f"range must be 'start,end', got {text!r}")
    start, end = parse_ts(parts[0]), parse_ts(parts[1])
    if start > end:
        raise ValidationError(f"range start {parts[0]} is after end {parts[1]}")
    return start, end


class _Handler(BaseHTTPRequestHandler):
    server_version = "loadcast-gateway"

    # Route table is tiny; dispatch by exact path.
    def do_GET(self):  # noqa: N802 (stdlib naming)
        parsed = urlparse(self.path)
        query = {k: v[0] for k, v in parse_qs(parsed.query).items()}
        routes = {
            "/api/about": self._op_about,
            "/api/read": self._op_read,
            "/api/hisRead": self._op_his_read,
            "/api/forecast": self._op_forecast,
        }
        handler = routes.get(parsed.path)
        op = parsed.path.rsplit("/", 1)[-1]
        if handler is None:
            self._send(404, error_grid(op or "unknown", f"no such endpoint {parsed.path}"))
            return
        self._guarded(op, handler, query)

    def do_POST(self):  # noqa: N802
        parsed = urlparse(self.path)
        if parsed.path != "/api/hisWrite":
            self._send(404, error_grid("hisWrite", f"no such endpoint {parsed.path}"))
            return
        self._guarded("hisWrite", self._op_his_write, {})

    def _guarded(self, op: str, handler, query: dict) -> None:
        try:
            status, grid = handler(query)
        except ValidationError as e:
            status, grid = 400, error_grid(op, str(e))
        except NotFoundError as e:
            status, grid = 404, error_grid(op, str(e))
        except StoreError as e:
            status, grid = 503, error_grid(op, str(e))
        except Exception as e:  # keep the wire contract: still a grid
            status, grid = 500, error_grid(op, f"internal error: {e}")
        self._send(status, grid)

    def _send(self, status: int, grid: GridDocument) -> None:
        body = grid.to_json().encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, fmt, *args):  # quiet by default
        pass

    # -- ops ---------------------------------------------------------------

    def _op_about(self, query) -> tuple[int, GridDocument]:
        from .. import __version__

        row = {
            "productName": PRODUCT_NAME,
            "productVersion": __version__,
            "serverTime": format_ts(self.server.clock_now()),
            "tz": "UTC",
        }
        return 200, make_grid("about", list(row), [row])

    def _op_read(self, query) -> tuple[int, GridDocument]:
        store: MeasurementStore = self.server.store
        cache: ForecastCache = self.server.cache
        if "id" in query:
            pid = PointId(query["id"])
            if store.has(pid):
                s = store.get(pid)
                row = {"id": pid.id, "unit": s.unit, "kind": "his"}
            elif cache.has_point(pid):
                row = {"id": pid.id, "unit": "", "kind": "forecast"}
            else:
                raise NotFoundError(f"unknown point {pid}")
            return 200, make_grid("read", ["id", "unit", "kind"], [row])
        if query.get("filter") == "point":
            rows = []
            for name in store.points():
                s = store.get(PointId(name))
                rows.append({"id": name, "unit": s.unit, "kind": "his"})
            for name in cache.points():
                if not store.has(PointId(name)):
                    rows.append({"id": name, "unit": "", "kind": "forecast"})
            return 200, make_grid("read", ["id", "unit", "kind"], rows)
        raise ValidationError("read requires id=<point> or filter=point")

    def _op_his_read(self, query) -> tuple[int, GridDocument]:
        if "id" not in query:
            raise ValidationError("hisRead requires id=<point>")
        pid = PointId(query["id"])
        start, end = _parse_range(query.get("range"))
        store: MeasurementStore = self.server.store
        cache: ForecastCache = self.server.cache
        if store.has(pid):
            series = store.get(pid)
            span = series.span()
            lo = start if start is not None else (span[0] if span else 0)
            hi = end if end is not None else (span[1] + series.resolution_s if span else 0)
            sliced = series.slice(lo, hi)
            rows = [
                {"ts": format_ts(int(t)), "val": float(v)}
                for t, v in zip(sliced.ts_array(), sliced.value_array())
                if not math.isnan(v)
            ]
            meta = {"id": pid.id, "unit": series.unit}
            return 200, make_grid("hisRead", ["ts", "val"], rows, meta)
        if cache.has_point(pid):
            return self._forecast_grid("hisRead", pid, start, end)
        raise NotFoundError(f"unknown point {pid}")

    def _op_forecast(self, query) -> tuple[int, GridDocument]:
        if "id" not in query:
            raise ValidationError("forecast requires id=<point>")
        pid = PointId(query["id"])
        store: MeasurementStore = self.server.store
        cache: ForecastCache = self.server.cache
        if not cache.has_point(pid) and not store.has(pid):
            raise NotFoundError(f"unknown point {pid}")
        start, end = _parse_range(query.get("range"))
        return self._forecast_grid("forecast", pid, start, end)

    def _forecast_grid(self, op, pid, start, end) -> tuple[int, GridDocument]:
        cache: ForecastCache = self.server.cache
        entries = cache.effective(pid, start, end)
        rows = [
            {
                "ts": format_ts(e.target_ts),
                "val": e.value,
                "issuedAt": format_ts(e.issued_at),
                "modelVersion": e.model_version,
            }
            for e in entries
        ]
        return 200, make_grid(op, ["ts", "val", "issuedAt", "modelVersion"], rows, {"id": pid.id})

    def _op_his_write(self, query) -> tuple[int, GridDocument]:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        try:
            doc = json.loads(raw.decode("utf-8", errors="replace"))
            meta = doc["meta"]
            pid = PointId(str(meta["id"]))
            issued_at = parse_ts(str(meta["issuedAt"]))
            model_version = int(meta.get("modelVersion", 0))
            items = [(parse_ts(str(r["ts"])), float(r["val"])) for r in doc["rows"]]
        except ValidationError:
            raise
        except Exception as e:
            raise ValidationError(f"malformed hisWrite body: {e}") from e
        store: MeasurementStore = self.server.store
        if not store.has(pid):
            raise NotFoundError(f"unknown point {pid}")
        if issued_at % HOUR != 0:
            raise ValidationError(f"issuedAt {meta['issuedAt']} is not on an hour boundary")
        outcome = self.server.cache.upsert(pid, items, issued_at, model_version)
        row = {"id": pid.id, "accepted": outcome.accepted, "stale": outcome.stale}
        return 200, make_grid("hisWrite", list(row), [row])


class GatewayServer:
    """Threaded HTTP service over a measurement store and forecast cache."""

    def __init__(
        self,
        bind: tuple[str, int],
        store: MeasurementStore,
        cache: ForecastCache,
        registry=None,
        clock_now=None,
    ):
        import time

        self._httpd = ThreadingHTTPServer(bind, _Handler)
        self._httpd.store = store
        self._httpd.cache = cache
        self._httpd.registry = registry
        self._httpd.clock_now = clock_now or (lambda: int(time.time()))
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self._httpd.server_address[:2]

    @property
    def url(self) -> str:
        host, port = self.address
        return f"http://{host}:{port}"

    def start(self) -> "GatewayServer":
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self._httpd.serve_forever()

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread:
            self._thread.join(timeout=5)


def serve(
    bind: tuple[str, int],
    store: MeasurementStore,
    cache: ForecastCache,
    registry=None,
) -> GatewayServer:
    """Bind and start the gateway in a background thread."""
    try:
        server = GatewayServer(bind, store, cache, registry)
    except OSError as e:
        raise StoreError(f"cannot bind gateway on {bind[0]}:{bind[1]}: {e}") from e
    return server.start()
