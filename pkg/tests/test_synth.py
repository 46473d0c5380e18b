import numpy as np
import pytest

from loadcast.errors import ValidationError
from loadcast.series import WEATHER_ROLES, align
from loadcast.synth import (
    DEFAULT_SYNTH,
    SynthConfig,
    generate_synthetic_campus,
    load_formula,
    weekday_mod,
)


def test_deterministic_for_fixed_seed():
    w1, l1 = generate_synthetic_campus(7, 30)
    w2, l2 = generate_synthetic_campus(7, 30)
    assert l1 == l2
    for a, b in zip(w1, w2):
        assert a == b


def test_different_seeds_differ():
    _, l1 = generate_synthetic_campus(1, 10)
    _, l2 = generate_synthetic_campus(2, 10)
    assert not np.array_equal(l1.value_array(), l2.value_array())


def test_one_day_gives_24_samples():
    weather, load = generate_synthetic_campus(0, 1)
    assert len(load) == 24
    assert all(len(s) == 24 for s in weather)


def test_days_below_one_rejected():
    with pytest.raises(ValidationError):
        generate_synthetic_campus(0, 0)


def test_zero_noise_load_matches_formula():
    """Independent re-evaluation: with the noise term off, the load must equal
    the documented closed form applied to the generated temperature."""
    cfg = SynthConfig(noise_kw=0.0)
    weather, load = generate_synthetic_campus(11, 14, cfg)
    temp = weather[WEATHER_ROLES.index("dry_bulb_temp")]
    ts = load.ts_array()
    t = temp.value_array()
    hour = (ts // 3600) % 24
    day_index = (ts // 86400 + 3) % 7
    expected = (
        cfg.base_kw
        + cfg.diurnal_amp_kw * np.sin(2 * np.pi * hour / 24 + cfg.diurnal_phase)
        + cfg.weekday_amp_kw * (day_index < 5)
        + cfg.cooling_kw_per_degc * np.maximum(0.0, t - cfg.cooling_ref_c)
    )
    assert np.allclose(load.value_array(), expected, atol=1e-9)


def test_load_formula_helper_matches_generation():
    cfg = SynthConfig(noise_kw=0.0)
    weather, load = generate_synthetic_campus(3, 7, cfg)
    temp = weather[WEATHER_ROLES.index("dry_bulb_temp")]
    expected = load_formula(load.ts_array(), temp.value_array(), cfg)
    assert np.allclose(load.value_array(), expected, atol=1e-9)


def test_weekday_mod_calendar():
    # 2021-01-01 was a Friday; 2021-01-02/03 the weekend.
    base = 1609459200
    assert weekday_mod(np.array([base]))[0] == 1.0
    assert weekday_mod(np.array([base + 86400]))[0] == 0.0
    assert weekday_mod(np.array([base + 2 * 86400]))[0] == 0.0
    assert weekday_mod(np.array([base + 3 * 86400]))[0] == 1.0


@pytest.mark.parametrize("seed", range(100))
def test_invariants_hold_across_seeds(seed):
    """Every generated stream satisfies the series and weather-range
    invariants; alignment over the full span succeeds."""
    weather, load = generate_synthetic_campus(seed, 3)
    ranges = {
        "rel_humidity": (0.0, 100.0),
        "pressure": (1e-9, np.inf),
        "dry_bulb_temp": (-np.inf, np.inf),
        "ghi": (0.0, np.inf),
        "cloud_cover": (0.0, 100.0),
        "wind_speed": (0.0, np.inf),
    }
    for role, series in zip(WEATHER_ROLES, weather):
        lo, hi = ranges[role]
        vals = series.value_array()
        assert np.all(np.isfinite(vals))
        assert np.all(vals >= lo) and np.all(vals <= hi), role
    table = align(load, weather)
    assert len(table) == len(load)


def test_constants_documented_in_config():
    cfg = DEFAULT_SYNTH
    assert cfg.base_kw == 800.0
    assert cfg.diurnal_amp_kw == 300.0
    assert cfg.weekday_amp_kw == 150.0
    assert cfg.cooling_kw_per_degc == 25.0
    assert cfg.cooling_ref_c == 18.0
    assert cfg.noise_kw == 20.0
