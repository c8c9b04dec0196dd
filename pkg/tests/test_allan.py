import numpy as np
import pytest

from tlsnoise.analysis.allan import allan_deviation, default_taus
from tlsnoise.bath import Fluctuator, fluctuator_path


def _naive_oadev(y, m):
    avg = np.array([y[i:i + m].mean() for i in range(y.size - m + 1)])
    return np.sqrt(0.5 * np.mean((avg[m:] - avg[:-m]) ** 2))


def test_matches_naive_estimator():
    y = np.random.default_rng(0).standard_normal(600).cumsum()
    curve = allan_deviation(y, 0.5, [0.5, 1.5, 10.0, 100.0])
    for tau, s in zip(curve.tau, curve.adev):
        assert s == pytest.approx(_naive_oadev(y, int(round(tau / 0.5))), rel=1e-9)


def test_constant_trace():
    curve = allan_deviation(np.full(1000, 42.0), 1.0)
    assert np.all(curve.adev == 0)


def test_white_noise_law():
    sigma, dt = 2.0, 0.5
    h0 = 2 * sigma ** 2 * dt
    y = sigma * np.random.default_rng(1).standard_normal(2 ** 20)
    taus = dt * np.array([1, 4, 16, 64, 256])
    curve = allan_deviation(y, dt, taus)
    assert np.all(np.abs(curve.adev / np.sqrt(h0 / (2 * taus)) - 1) < 0.05)


def test_flicker_plateau_from_telegraph_sum():
    # log-uniform rates on [g1, g2] with amplitude d give h_-1 = N d^2 / ln(g2/g1)
    h_m1, n, g1, g2, dt, dur = 145.0, 100, 1e-4, 5.0, 0.02, 4e4
    d = np.sqrt(h_m1 * np.log(g2 / g1) / n)
    y = np.zeros(int(round(dur / dt)))
    for i, r in enumerate(np.geomspace(g1, g2, n)):
        y += d * fluctuator_path(Fluctuator(r, 1, i), dur, dt, seed=1)
    curve = allan_deviation(y, dt, [5.0, 10.0, 20.0, 50.0])
    assert np.all(np.abs(curve.adev / 14.2 - 1) < 0.15)
    assert np.sqrt(2 * np.log(2) * h_m1) == pytest.approx(14.2, abs=0.05)


def test_telegraph_local_maximum():
    # a telegraph with rate g is a Lorentzian with tau0 = 1 / (2 g)
    rate, dt = 0.5, 0.05
    y = 30.0 * fluctuator_path(Fluctuator(rate, 1, 0), 2e4, dt, seed=2)
    taus = dt * np.arange(4, 200, 2)
    peak = taus[np.argmax(allan_deviation(y, dt, taus).adev)]
    assert abs(peak / (1.89 / (2 * rate)) - 1) < 0.3


def test_scale_equivariance():
    y = np.random.default_rng(3).standard_normal(3000)
    a, b = allan_deviation(y, 1.0), allan_deviation(5.0 * y, 1.0)
    assert np.allclose(b.adev, 5.0 * a.adev, rtol=1e-12)


def test_default_taus():
    taus = default_taus(3000, 0.5)
    assert taus[0] == 0.5 and taus[-1] <= 500.0
    assert np.all(np.diff(taus) > 0)
    assert np.allclose(taus / 0.5, np.rint(taus / 0.5))


def test_tau_validation():
    with pytest.raises(ValueError, match="multiples"):
        allan_deviation(np.zeros(100), 0.5, [0.7])
    with pytest.raises(ValueError, match="third"):
        allan_deviation(np.zeros(100), 1.0, [40.0])
