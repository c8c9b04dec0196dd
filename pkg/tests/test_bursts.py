import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tlsnoise import rng as rngs
from tlsnoise.bursts import (ANTISYMMETRIC, UNIFORM, BurstEvent, burst_contribution, burst_traces, mode_profile,
                             sample_burst_schedule)


def test_zero_rate_is_empty():
    assert sample_burst_schedule(0.0, 2.6e4, np.random.default_rng(0)) == []


def test_negative_rate_rejected():
    with pytest.raises(ValueError):
        sample_burst_schedule(-1.0, 10.0, np.random.default_rng(0))


def test_poisson_mean_count():
    rate, duration = 0.2e-3, 2.6e4
    counts = np.array([len(sample_burst_schedule(rate, duration, rngs.stream(s, rngs.BURSTS)))
                       for s in range(1000)])
    mu = rate * duration
    assert abs(counts.mean() - mu) < 3 * np.sqrt(mu / counts.size)
    # Poisson: variance equals mean
    assert abs(counts.var() / mu - 1) < 0.15


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_schedule_supports(seed):
    ev = sample_burst_schedule(5e-3, 2.6e4, np.random.default_rng(seed), amplitude_range=(1e3, 2e4))
    for e in ev:
        assert 1.2 <= e.tau <= 3.0
        assert 1e3 <= e.amplitude <= 2e4
        assert 0 <= e.onset < 2.6e4
    assert [e.onset for e in ev] == sorted(e.onset for e in ev)


def test_class_mix_extremes():
    gen = np.random.default_rng(1)
    assert all(e.event_class == UNIFORM for e in sample_burst_schedule(1e-2, 1e4, gen, antisymmetric_fraction=0))
    anti = sample_burst_schedule(1e-2, 1e4, gen, antisymmetric_fraction=1)
    assert anti and all(e.event_class == ANTISYMMETRIC and 8 <= e.pivot <= 11 for e in anti)


def test_causality():
    e = BurstEvent(100.0, UNIFORM, 1e4, float("nan"), 2.0)
    t = np.linspace(0, 99.999, 50)
    for k in range(1, 15):
        assert np.all(burst_contribution(e, k, 14, t) == 0)


def test_tail_shape():
    e = BurstEvent(10.0, UNIFORM, 1e4, float("nan"), 2.0)
    assert burst_contribution(e, 3, 14, 10.0) == 1e4
    assert burst_contribution(e, 3, 14, 12.0) == pytest.approx(1e4 / np.e, rel=1e-12)


def test_pivot_mode_is_zero():
    e = BurstEvent(0.0, ANTISYMMETRIC, 1e4, 10.0, 2.0)
    assert np.all(burst_contribution(e, 10, 14, np.linspace(0, 20, 41)) == 0)


def test_antisymmetric_profile_signs():
    e = BurstEvent(0.0, ANTISYMMETRIC, 1e4, 10.0, 2.0)
    prof = mode_profile(e, np.arange(1, 15), 14)
    assert np.all(np.sign(prof[:9]) == -np.sign(prof[10]))
    assert np.all(np.sign(prof[10:]) == np.sign(prof[10]))
    mag = np.abs(prof)
    assert np.all(np.diff(mag[:10]) < 0) and np.all(np.diff(mag[9:]) > 0)
    assert prof[0] == pytest.approx((1 - 10) / 13)


def test_burst_traces_sums_events():
    evs = [BurstEvent(1.0, UNIFORM, 100.0, float("nan"), 1.5), BurstEvent(3.0, ANTISYMMETRIC, 50.0, 2.0, 2.5)]
    t = np.arange(0, 10, 0.5)
    tr = burst_traces(evs, 4, t)
    for k in range(4):
        expect = sum(burst_contribution(e, k + 1, 4, t) for e in evs)
        assert np.allclose(tr[k], expect, rtol=0, atol=1e-12)


def test_event_validation():
    with pytest.raises(ValueError):
        BurstEvent(0.0, "sideways", 1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        BurstEvent(0.0, UNIFORM, 1.0, 0.0, 0.0)
