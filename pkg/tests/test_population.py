import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from pydantic import ValidationError

from app.errors import ConfigurationError
from app.models.scenario_models import ArrivalConfig, SeedConfig, TriageConfig
from app.simulation.population import (
    ArrivalProfile,
    draw_true_esi,
    generate_arrivals,
    instantaneous_rate,
    make_streams,
    patience_minutes,
    stream_digest,
    triage,
    triage_row,
)

FLAT = ArrivalConfig(lambda_avg=8.0, daily_shape=[1.0] * 24, weekly_factors=[1.0] * 7)


def test_weekly_mean_rate_equals_lambda_avg():
    profile = ArrivalProfile.from_config(ArrivalConfig(lambda_avg=12.5))
    rates = [instantaneous_rate(t, profile) for t in range(7 * 1440)]
    assert np.mean(rates) == pytest.approx(12.5, rel=1e-9)


def test_surge_scales_rate():
    base = ArrivalProfile.from_config(ArrivalConfig())
    surged = ArrivalProfile.from_config(ArrivalConfig(surge_multiplier=1.5))
    assert instantaneous_rate(600, surged) == pytest.approx(1.5 * instantaneous_rate(600, base))


def test_constant_rate_count_matches_expectation():
    profile = ArrivalProfile.from_config(FLAT)
    horizon = 7 * 1440
    counts = []
    for seed in range(200):
        rng = np.random.default_rng(seed)
        counts.append(len(generate_arrivals(horizon, profile, rng, FLAT.esi_distribution)))
    expected = 8.0 * 24 * 7
    standard_error = math.sqrt(expected / len(counts))
    assert abs(np.mean(counts) - expected) < 3 * standard_error


def test_hourly_counts_follow_daily_shape():
    config = ArrivalConfig(lambda_avg=8.0)
    profile = ArrivalProfile.from_config(config)
    days = 400
    arrivals = generate_arrivals(days * 1440, profile, np.random.default_rng(7), config.esi_distribution)
    counts = np.zeros(24)
    for spec in arrivals:
        counts[int(spec.exact_time // 60) % 24] += 1
    expected = np.array([np.mean([instantaneous_rate(h * 60 + m, profile) for m in range(60)]) for h in range(24)])
    assert np.corrcoef(counts / days, expected)[0, 1] > 0.9


def test_arrivals_are_sorted_and_inside_horizon():
    config = ArrivalConfig()
    arrivals = generate_arrivals(1440, ArrivalProfile.from_config(config), np.random.default_rng(3), config.esi_distribution)
    times = [spec.exact_time for spec in arrivals]
    assert times == sorted(times)
    assert all(0 <= spec.arrival_time < 1440 for spec in arrivals)
    assert all(spec.arrival_time == math.floor(spec.exact_time) for spec in arrivals)


def test_zero_rate_produces_no_arrivals():
    config = ArrivalConfig(lambda_avg=0.0)
    assert generate_arrivals(1440, ArrivalProfile.from_config(config), np.random.default_rng(0), config.esi_distribution) == []


def test_invalid_esi_distribution_is_rejected():
    with pytest.raises(ConfigurationError):
        draw_true_esi(np.random.default_rng(0), {6: 1.0})
    with pytest.raises(ConfigurationError):
        draw_true_esi(np.random.default_rng(0), {1: 0.5, 2: 0.4})
    with pytest.raises(ValidationError):
        ArrivalConfig(esi_distribution={0: 1.0})


def test_same_patient_seed_gives_same_stream():
    config = ArrivalConfig()
    profile = ArrivalProfile.from_config(config)

    def digest(patient_seed, dynamics_seed):
        patient, _ = make_streams(SeedConfig(patient=patient_seed, dynamics=dynamics_seed))
        return stream_digest(generate_arrivals(1440, profile, patient, config.esi_distribution))

    assert digest(5, 1) == digest(5, 99)
    assert digest(5, 1) != digest(6, 1)


@given(
    esi=st.integers(min_value=1, max_value=5),
    p_under=st.floats(min_value=0.0, max_value=0.3),
    p_over=st.floats(min_value=0.0, max_value=0.3),
)
def test_triage_row_is_a_distribution_over_valid_levels(esi, p_under, p_over):
    config = TriageConfig(p_correct=1.0 - p_under - p_over, p_under=p_under, p_over=p_over)
    row = triage_row(esi, config)
    assert sum(row.values()) == pytest.approx(1.0)
    assert all(1 <= level <= 5 for level in row)
    assert all(abs(level - esi) <= 1 for level in row)
    assert all(prob >= 0 for prob in row.values())


def test_triage_folds_out_of_range_errors():
    config = TriageConfig()
    assert triage_row(1, config) == pytest.approx({1: 0.9, 2: 0.1})
    assert triage_row(5, config) == pytest.approx({5: 0.9, 4: 0.1})


def test_triage_draw_frequencies():
    config = TriageConfig()
    rng = np.random.default_rng(11)
    draws = [triage(3, config, rng) for _ in range(20000)]
    assert draws.count(3) / len(draws) == pytest.approx(0.8, abs=0.02)
    assert draws.count(4) / len(draws) == pytest.approx(0.1, abs=0.01)


def test_patience_from_quantile():
    ranges = ArrivalConfig().patience_minutes
    assert patience_minutes(0.5, 4, ranges) == pytest.approx(150.0)
    assert patience_minutes(0.0, 5, ranges) == pytest.approx(45.0)
    assert patience_minutes(0.9, 1, ranges) == math.inf
