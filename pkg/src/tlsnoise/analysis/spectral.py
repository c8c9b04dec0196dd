"""Welch power spectral density of a frequency-deviation trace."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal


@dataclass
class NoisePsd:
    freq: np.ndarray
    psd: np.ndarray
    segment_length: int
    overlap: float
    window: str


def default_segment_length(n: int) -> int:
    """Largest power of two not exceeding a eighth of the trace."""
    return 1 << max(int(np.floor(np.log2(max(n // 8, 1)))), 0)


def welch_psd(trace, dt: float, segment_length: int | None = None, overlap: float = 0.5,
              window: str = "hann") -> NoisePsd:
    """One-sided averaged periodogram in Hz^2/Hz; the zero-frequency bin is dropped."""
    x = np.asarray(trace, dtype=float)
    if dt <= 0:
        raise ValueError("dt must be > 0")
    nseg = default_segment_length(x.size) if segment_length is None else int(segment_length)
    if nseg > x.size:
        raise ValueError(f"segment length {nseg} exceeds trace length {x.size}")
    if nseg < 2:
        raise ValueError("segment length must be >= 2")
    if not 0.0 <= overlap <= 0.9:
        raise ValueError("overlap must lie in [0, 0.9]")
    f, s = signal.welch(x, fs=1.0 / dt, window=window, nperseg=nseg, noverlap=int(overlap * nseg),
                        detrend="constant", scaling="density", return_onesided=True)
    keep = f > 0
    return NoisePsd(f[keep], s[keep], nseg, float(overlap), str(window))


def n_segments(n: int, segment_length: int, overlap: float) -> int:
    step = segment_length - int(overlap * segment_length)
    return 1 + (n - segment_length) // step
