"""Gaussian test traces with a prescribed one-sided spectral density."""
from __future__ import annotations

import numpy as np

from .noisefit import NoiseModelFit, psd_model


def synthesize_trace(fit: NoiseModelFit, n: int, dt: float, gen: np.random.Generator) -> np.ndarray:
    """Frequency-domain synthesis: random-phase Gaussian Fourier amplitudes shaped by ``psd_model``.

    The periodogram of the result has expectation ``psd_model`` at every
    positive Fourier frequency k / (n dt); the mean (DC bin) is zero.
    """
    f = np.fft.rfftfreq(n, dt)
    s = np.zeros_like(f)
    s[1:] = psd_model(f[1:], fit)
    amp = np.sqrt(s * n / (2.0 * dt))
    spec = amp * (gen.standard_normal(f.size) + 1j * gen.standard_normal(f.size)) / np.sqrt(2.0)
    if n % 2 == 0:
        spec[-1] = amp[-1] * gen.standard_normal()
    spec[0] = 0.0
    return np.fft.irfft(spec, n=n)
