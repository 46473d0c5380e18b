"""Synthetic campus generator: six weather streams plus a coupled load meter.

Desk-scale stand-in for real campus metering. The load is a closed-form
function of time and the generated dry-bulb temperature plus Gaussian noise,
so pipeline behaviour is reproducible and checkable against the formula.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .series import HOUR, ROLE_UNITS, WEATHER_ROLES, IntervalSeries, PointId

#: 2021-01-01T00:00:00Z (a Friday); default start of generated data.
DEFAULT_START_TS = 1609459200


@dataclass(frozen=True)
class SynthConfig:
    """All generation constants. Load-formula terms first, then climate.

    load(t) = base_kw
            + diurnal_amp_kw * sin(2*pi*hour/24 + diurnal_phase)
            + weekday_amp_kw * weekday_mod(t)        (1.0 Mon-Fri, 0.0 weekends)
            + cooling_kw_per_degc * max(0, dry_bulb(t) - cooling_ref_c)
            + Normal(0, noise_kw)
    """

    base_kw: float = 800.0
    diurnal_amp_kw: float = 300.0
    weekday_amp_kw: float = 150.0
    cooling_kw_per_degc: float = 25.0
    cooling_ref_c: float = 18.0
    noise_kw: float = 20.0
    # Peak at 15:00 local-solar: sin is maximal when 2*pi*15/24 + phase = pi/2.
    diurnal_phase: float = math.pi / 2 - 2 * math.pi * 15 / 24

    # Warm climate so the cooling term stays active most of the year and the
    # load keeps a strong weather dependence in every season.
    temp_mean_c: float = 22.0
    temp_seasonal_amp_c: float = 6.0
    temp_diurnal_amp_c: float = 6.0
    # Daily weather-system level: AR(1) across days, interpolated to hours.
    temp_level_sigma_c: float = 5.0
    temp_level_rho: float = 0.85

    ghi_clear_peak: float = 950.0
    pressure_mean_hpa: float = 1013.0
    wind_mean_ms: float = 3.5

    start_ts: int = DEFAULT_START_TS

    def load_point(self) -> PointId:
        return PointId("campus-main-kw")

    def weather_point(self, role: str) -> PointId:
        return PointId(f"srrl-{role.replace('_', '-')}")


DEFAULT_SYNTH = SynthConfig()


def weekday_mod(ts: np.ndarray) -> np.ndarray:
    """1.0 Monday..Friday, 0.0 Saturday/Sunday (UTC calendar)."""
    day_index = (ts // 86400 + 3) % 7  # epoch day 0 was a Thursday; Monday -> 0
    return (day_index < 5).astype(np.float64)


def load_formula(ts: np.ndarray, dry_bulb: np.ndarray, cfg: SynthConfig) -> np.ndarray:
    """Deterministic part of the load; the noise term is added separately."""
    hour = (ts // HOUR) % 24
    return (
        cfg.base_kw
        + cfg.diurnal_amp_kw * np.sin(2 * math.pi * hour / 24 + cfg.diurnal_phase)
        + cfg.weekday_amp_kw * weekday_mod(ts)
        + cfg.cooling_kw_per_degc * np.maximum(0.0, dry_bulb - cfg.cooling_ref_c)
    )


def _daily_ar1(rng: np.random.Generator, days: int, sigma: float, rho: float) -> np.ndarray:
    """Stationary AR(1) sequence of daily values, innovations drawn up front."""
    innovations = rng.normal(0.0, sigma * math.sqrt(1 - rho**2), size=days)
    level = np.empty(days)
    prev = rng.normal(0.0, sigma)
    for d in range(days):
        prev = rho * prev + innovations[d]
        level[d] = prev
    return level


def _to_hours(daily: np.ndarray, n_hours: int) -> np.ndarray:
    """Linear interpolation from noon-anchored daily values to every hour."""
    day_centers = np.arange(daily.size) * 24.0 + 12.0
    hours = np.arange(n_hours, dtype=np.float64)
    return np.interp(hours, day_centers, daily)


def generate_synthetic_campus(
    seed: int, days: int, cfg: SynthConfig = DEFAULT_SYNTH
) -> tuple[list[IntervalSeries], IntervalSeries]:
    """Generate (weather series in WEATHER_ROLES order, load series), hourly.

    Deterministic for a fixed (seed, days, cfg): all random draws come from a
    single seeded generator in fixed order.
    """
    if days < 1:
        raise ValidationError(f"days must be >= 1, got {days}")
    rng = np.random.default_rng(seed)
    n = days * 24
    ts = cfg.start_ts + HOUR * np.arange(n, dtype=np.int64)
    hour = ((ts // HOUR) % 24).astype(np.float64)
    doy_frac = ((ts - cfg.start_ts) / 86400.0) % 365.0

    # Draw order is fixed: five daily weather-system levels, five hourly
    # sensor jitters, then load noise. Do not reorder; determinism tests pin
    # the outputs.
    temp_level = _to_hours(_daily_ar1(rng, days, cfg.temp_level_sigma_c, cfg.temp_level_rho), n)
    cloud_level = _to_hours(_daily_ar1(rng, days, 20.0, 0.6), n)
    rh_level = _to_hours(_daily_ar1(rng, days, 8.0, 0.5), n)
    wind_level = _to_hours(_daily_ar1(rng, days, 1.2, 0.5), n)
    pressure_level = _to_hours(_daily_ar1(rng, days, 3.0, 0.85), n)
    temp_jitter = rng.normal(0.0, 0.3, n)
    cloud_jitter = rng.normal(0.0, 8.0, n)
    rh_jitter = rng.normal(0.0, 1.5, n)
    wind_jitter = rng.normal(0.0, 0.4, n)
    pressure_jitter = rng.normal(0.0, 1.2, n)

    seasonal = np.sin(2 * math.pi * (doy_frac - 100.0) / 365.0)
    dry_bulb = (
        cfg.temp_mean_c
        + cfg.temp_seasonal_amp_c * seasonal
        + cfg.temp_diurnal_amp_c * np.sin(2 * math.pi * (hour - 9.0) / 24.0)
        + temp_level
        + temp_jitter
    )

    cloud = np.clip(45.0 + cloud_level + cloud_jitter, 0.0, 100.0)
    rel_humidity = np.clip(
        60.0
        - 1.5 * (dry_bulb - cfg.temp_mean_c)
        + 10.0 * np.sin(2 * math.pi * (hour - 4.0) / 24.0)
        + rh_level
        + rh_jitter,
        0.0,
        100.0,
    )
    # Clear-sky bell between 06:00 and 18:00, scaled by season and cloud.
    daylight = np.clip(np.sin(math.pi * (hour - 6.0) / 12.0), 0.0, None)
    ghi = cfg.ghi_clear_peak * (1.0 + 0.25 * seasonal) * daylight * (1.0 - 0.0075 * cloud)
    ghi = np.clip(ghi, 0.0, None)
    wind = np.clip(
        cfg.wind_mean_ms
        + 1.5 * np.sin(2 * math.pi * (hour - 14.0) / 24.0)
        + wind_level
        + wind_jitter,
        0.0,
        None,
    )
    pressure = np.clip(
        cfg.pressure_mean_hpa - 1.5 * seasonal + pressure_level + pressure_jitter, 500.0, None
    )

    load = load_formula(ts, dry_bulb, cfg)
    if cfg.noise_kw > 0:
        load = load + rng.normal(0.0, cfg.noise_kw, size=n)

    by_role = {
        "rel_humidity": rel_humidity,
        "pressure": pressure,
        "dry_bulb_temp": dry_bulb,
        "ghi": ghi,
        "cloud_cover": cloud,
        "wind_speed": wind,
    }
    weather = [
        IntervalSeries.from_arrays(
            cfg.weather_point(role), ROLE_UNITS[role], HOUR, ts, by_role[role]
        )
        for role in WEATHER_ROLES
    ]
    load_series = IntervalSeries.from_arrays(cfg.load_point(), ROLE_UNITS["load"], HOUR, ts, load)
    return weather, load_series
