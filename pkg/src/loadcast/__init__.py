"""loadcast: operational building-load forecasting.

From-scratch LSTM regressor trained on weather features, wrapped in the
operational shell a deployment needs: data quality control, a versioned
per-point model registry, a Haystack-style HTTP gateway with a latest-wins
forecast cache, and an online retraining loop.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DivergenceError,
    IntegrityError,
    LoadcastError,
    NotFoundError,
    ProtocolError,
    StoreError,
    TransportError,
    ValidationError,
)
from .lstm import LossCurve, TrainConfig
from .pipeline import HORIZON, ForecastGrid, evaluate, issue_forecast, train_point_model
from .quality import QcPolicy, QcReport, impute_missing, sigma_filter
from .record import ModelRecord
from .registry import ModelRegistry
from .series import HOUR, WEATHER_ROLES, IntervalSeries, PointId, Sample, WeatherFrame, align
from .synth import SynthConfig, generate_synthetic_campus
from .windows import FeatureScaler, SplitSpec, build_windows, chronological_split, fit_scaler

__all__ = [
    "HORIZON",
    "HOUR",
    "WEATHER_ROLES",
    "ConfigError",
    "DivergenceError",
    "FeatureScaler",
    "ForecastGrid",
    "IntegrityError",
    "IntervalSeries",
    "LoadcastError",
    "LossCurve",
    "ModelRecord",
    "ModelRegistry",
    "NotFoundError",
    "PointId",
    "ProtocolError",
    "QcPolicy",
    "QcReport",
    "Sample",
    "SplitSpec",
    "StoreError",
    "SynthConfig",
    "TrainConfig",
    "TransportError",
    "ValidationError",
    "WeatherFrame",
    "align",
    "build_windows",
    "chronological_split",
    "evaluate",
    "fit_scaler",
    "generate_synthetic_campus",
    "impute_missing",
    "issue_forecast",
    "sigma_filter",
    "train_point_model",
]
