import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from tlsnoise.analysis.allan import AdevCurve, allan_deviation, default_taus
from tlsnoise.analysis.noisefit import (FLICKER, LORENTZIAN, WHITE, NoiseModelFit, adev_model,
                                        fit_adev_model, fit_noise_model, fit_power_law,
                                        lorentzian_allan_factor, psd_model)
from tlsnoise.analysis.spectral import NoisePsd, welch_psd
from tlsnoise.analysis.synth import synthesize_trace
from tlsnoise.bath import BathConfig
from tlsnoise.bursts import sample_burst_schedule
from tlsnoise.simulate import simulate_trace_set

REF = dict(h_minus1=145.0, h0=0.0, a=53.12, tau0=1.22)


def _lor_only(a=53.12, tau0=1.22):
    return NoiseModelFit(a=a, tau0=tau0, components=(LORENTZIAN,))


def test_psd_model_reference_values():
    assert psd_model(1e-9, _lor_only()) == pytest.approx(1.377e4, rel=1e-3)
    assert psd_model(1.0, NoiseModelFit(h_minus1=145.0, components=(FLICKER,))) == pytest.approx(145.0)
    fit = _lor_only()
    knee = 1 / (2 * np.pi * fit.tau0)
    assert psd_model(knee, fit) == pytest.approx(0.5 * 4 * fit.a ** 2 * fit.tau0, rel=1e-12)


def test_inactive_components_contribute_nothing():
    fit = NoiseModelFit(h_minus1=10.0, h0=3.0, a=5.0, tau0=2.0, components=(WHITE,))
    assert np.all(psd_model(np.geomspace(1e-3, 1, 5), fit) == 3.0)
    assert fit.report()["h_minus1_hz2"] == 0.0 and fit.report()["a_hz"] == 0.0


def test_fit_validation():
    with pytest.raises(ValueError):
        NoiseModelFit(h0=-1.0)
    with pytest.raises(ValueError):
        NoiseModelFit(tau0=0.0)


def test_allan_factor_series_branch_is_continuous():
    x = np.array([0.999e-3, 1.001e-3])
    v = lorentzian_allan_factor(x)
    assert v[0] == pytest.approx(v[1], rel=1e-2)
    assert lorentzian_allan_factor(1e-8) == pytest.approx(2e-8 / 3, rel=1e-6)


def test_adev_asymptotics():
    fit = _lor_only()
    big = 1e4 * fit.tau0
    assert adev_model(big, fit) == pytest.approx(fit.a * np.sqrt(2 * fit.tau0 / big), rel=1e-3)
    # leading order as tau -> 0: A sqrt(2 tau / (3 tau0))
    small = 1e-9
    assert adev_model(small, fit) == pytest.approx(fit.a * np.sqrt(2 * small / (3 * fit.tau0)), rel=1e-6)
    white = NoiseModelFit(h0=8.0, components=(WHITE,))
    assert adev_model(2.0, white) == pytest.approx(np.sqrt(8.0 / 4.0))
    flick = NoiseModelFit(h_minus1=145.0, components=(FLICKER,))
    assert adev_model(3.0, flick) == pytest.approx(14.18, abs=0.01)


def test_lorentzian_adev_maximum():
    fit = _lor_only()
    res = minimize_scalar(lambda t: -adev_model(t, fit), bounds=(0.1, 10), method="bounded")
    assert res.x / fit.tau0 == pytest.approx(1.89, abs=0.01)


def test_combine_modes():
    fit = NoiseModelFit(**REF)
    tau = np.array([0.5, 2.0, 20.0])
    q, s = adev_model(tau, fit, "quadrature"), adev_model(tau, fit, "sum")
    assert np.all(s >= q)
    with pytest.raises(ValueError):
        adev_model(tau, fit, "product")


def _check_recovery(fit, tol, params=("h_minus1", "a", "tau0")):
    for k in params:
        assert getattr(fit, k) == pytest.approx(REF[k], rel=tol), k


def test_noiseless_psd_recovery():
    f = np.geomspace(1e-3, 1.0, 200)
    fit = fit_noise_model(NoisePsd(f, psd_model(f, NoiseModelFit(**REF)), 0, 0.5, "hann"))
    _check_recovery(fit, 0.01)
    assert fit.h0 < 1e-3 and fit.converged


def test_noiseless_adev_recovery():
    tau = np.geomspace(0.05, 500.0, 60)
    curve = AdevCurve(tau, adev_model(tau, NoiseModelFit(**REF)))
    _check_recovery(fit_adev_model(curve), 0.01)


def test_noiseless_adev_recovery_sum_mode():
    tau = np.geomspace(0.05, 500.0, 60)
    curve = AdevCurve(tau, adev_model(tau, NoiseModelFit(**REF), "sum"))
    _check_recovery(fit_adev_model(curve, combine="sum"), 0.01)


def test_white_only_adev_fit():
    dt, n = 0.5, 2 ** 18
    y = 3.0 * np.random.default_rng(0).standard_normal(n)
    fit = fit_adev_model(allan_deviation(y, dt, default_taus(n, dt)), tau_range=(dt, n * dt / 30), span=n * dt)
    assert fit.h0 == pytest.approx(2 * 9.0 * dt, rel=0.05)
    # other terms stay negligible next to the white variance at every fitted tau
    tau = default_taus(n, dt)
    white_var = fit.h0 / (2 * tau)
    assert np.all(2 * np.log(2) * fit.h_minus1 < 0.05 * white_var)
    assert np.all(fit.a ** 2 * lorentzian_allan_factor(tau / fit.tau0) < 0.05 * white_var)


@pytest.mark.parametrize("comps,params", [((FLICKER,), dict(h_minus1=145.0)), ((WHITE,), dict(h0=20.0))])
def test_psd_and_adev_fits_agree(comps, params):
    n, dt = 2 ** 20, 0.05
    y = synthesize_trace(NoiseModelFit(components=comps, **params), n, dt, np.random.default_rng(1))
    p = fit_noise_model(welch_psd(y, dt, 2 ** 15), comps)
    a = fit_adev_model(allan_deviation(y, dt, default_taus(n, dt)), comps, tau_range=(5 * dt, n * dt / 30),
                       span=n * dt)
    key = next(iter(params))
    assert getattr(p, key) == pytest.approx(getattr(a, key), rel=0.2)
    assert getattr(p, key) == pytest.approx(params[key], rel=0.1)


def test_synthesizer_spectrum():
    fit = NoiseModelFit(**REF)
    dt, n = 0.05, 2 ** 16
    acc = 0.0
    for s in range(20):
        psd = welch_psd(synthesize_trace(fit, n, dt, np.random.default_rng(s)), dt, 2 ** 12)
        acc = acc + psd.psd
    ratio = (acc / 20) / psd_model(psd.freq, fit)
    band = (psd.freq > 0.02) & (psd.freq < 5.0)
    assert np.all(np.abs(ratio[band] - 1) < 0.25)
    assert abs(np.mean(ratio[band]) - 1) < 0.03


def test_tls_only_trace_is_flicker_dominated_at_low_frequency():
    # the bath's fastest fluctuators roll the spectrum off near 0.2 Hz, which the
    # Lorentzian term absorbs, so A is not zero here; flicker is still the larger term at 1 mHz
    tr = simulate_trace_set(BathConfig(master_seed=0), 2.6e4, 0.5)
    fit = fit_noise_model(welch_psd(tr.deviations[6], 0.5))
    assert fit.h_minus1 > 0
    f = 1e-3
    lor = 4 * fit.a ** 2 * fit.tau0 / (1 + (2 * np.pi * f * fit.tau0) ** 2)
    assert fit.h_minus1 / f > lor


def test_adev_fit_finds_burst_relaxation_time():
    # bursts with fixed 1.22 s tails dominate short-tau ADEV once they are frequent enough
    seed = 0
    ev = sample_burst_schedule(2e-3, 2.6e4, np.random.default_rng(seed), tau_range=(1.22, 1.22),
                               amplitude_range=(5e3, 2e4))
    tr = simulate_trace_set(BathConfig(master_seed=seed), 2.6e4, 0.5, bursts=ev)
    n = tr.n_samples
    fit = fit_adev_model(allan_deviation(tr.deviations[6], 0.5, default_taus(n, 0.5)), span=n * 0.5)
    assert 1.2 <= fit.tau0 <= 3.0
    assert fit.tau0 == pytest.approx(1.22, rel=0.25)


def test_fit_errors():
    f = np.geomspace(1e-3, 1, 20)
    with pytest.raises(ValueError, match="zero"):
        fit_noise_model(NoisePsd(f, np.zeros_like(f), 0, 0.5, "hann"))
    with pytest.raises(ValueError, match="8"):
        fit_noise_model(NoisePsd(f, 1 / f, 0, 0.5, "hann"), f_range=(0.5, 1.0))
    with pytest.raises(ValueError, match="6"):
        fit_adev_model(AdevCurve(np.array([1.0, 2.0]), np.array([1.0, 1.0])))
    with pytest.raises(ValueError):
        fit_noise_model(NoisePsd(f, 1 / f, 0, 0.5, "hann"), components=())


def test_power_law_fit():
    f = np.geomspace(1e-3, 1, 100)
    c, alpha, err = fit_power_law(NoisePsd(f, 7.0 * f ** -1.3, 0, 0.5, "hann"))
    assert alpha == pytest.approx(-1.3, abs=1e-9) and c == pytest.approx(7.0, rel=1e-9)
    _, alpha_u, _ = fit_power_law(NoisePsd(f, 7.0 * f ** -1.3, 0, 0.5, "hann"), weighting="uniform")
    assert alpha_u == pytest.approx(-1.3, abs=1e-9)
    with pytest.raises(ValueError):
        fit_power_law(NoisePsd(f, 1 / f, 0, 0.5, "hann"), weighting="cubic")
