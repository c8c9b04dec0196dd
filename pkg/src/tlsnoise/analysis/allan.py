"""Overlapping Allan deviation of frequency-deviation data (result in Hz)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class AdevCurve:
    tau: np.ndarray
    adev: np.ndarray
    estimator: str = "overlapping"


def default_taus(n: int, dt: float, per_decade: int = 10) -> np.ndarray:
    m_max = max(n // 3, 1)
    m = np.unique(np.rint(np.logspace(0, np.log10(m_max), int(per_decade * np.log10(m_max)) + 2)).astype(int))
    return m[(m >= 1) & (m <= m_max)] * dt


def allan_deviation(trace, dt: float, taus=None) -> AdevCurve:
    y = np.asarray(trace, dtype=float)
    n = y.size
    taus = default_taus(n, dt) if taus is None else np.atleast_1d(np.asarray(taus, dtype=float))
    ms = np.rint(taus / dt).astype(np.int64)
    bad = np.abs(ms * dt - taus) > 1e-9 * np.maximum(taus, dt)
    if np.any(bad) or np.any(ms < 1):
        raise ValueError(f"averaging times {taus[bad | (ms < 1)]} are not positive multiples of dt={dt}")
    if np.any(taus > n * dt / 3.0 * (1 + 1e-12)):
        raise ValueError("averaging time exceeds a third of the trace span")
    y = y - y.mean()
    csum = np.concatenate([[0.0], np.cumsum(y)])
    out = np.empty(ms.size)
    for i, m in enumerate(ms):
        avg = (csum[m:] - csum[:-m]) / m          # all overlapping m-sample means
        d = avg[m:] - avg[:-m]
        out[i] = np.sqrt(0.5 * np.mean(d * d))
    return AdevCurve(ms * dt, out)
