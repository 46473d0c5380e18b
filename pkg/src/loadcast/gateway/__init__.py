"""Haystack-style HTTP gateway: grid wire format, forecast cache, server, client."""

from .cache import ForecastCache, ForecastCacheEntry, WriteOutcome
from .client import fetch_forecast, fetch_history, push_forecast
from .grids import GridDocument, error_grid, make_grid, parse_grid
from .server import GatewayServer, serve
from .store import MeasurementStore

__all__ = [
    "ForecastCache",
    "ForecastCacheEntry",
    "WriteOutcome",
    "GatewayServer",
    "GridDocument",
    "MeasurementStore",
    "error_grid",
    "fetch_forecast",
    "fetch_history",
    "make_grid",
    "parse_grid",
    "push_forecast",
    "serve",
]
