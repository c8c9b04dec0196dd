"""Cross-mode correlation coefficients and their detuning dependence."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class CorrelationMatrix:
    matrix: np.ndarray
    mode_frequencies: np.ndarray

    @property
    def n_modes(self) -> int:
        return self.matrix.shape[0]


@dataclass
class DetuningCurve:
    detuning: np.ndarray     # mean |f_i - f_j| per bin, Hz
    correlation: np.ndarray  # mean C_ij per bin
    counts: np.ndarray       # pairs per bin


def correlation_matrix(traces, window: tuple | None = None) -> CorrelationMatrix:
    """Pearson coefficients between mode deviations over a sample window.

    Means are removed over the window before forming the products.
    """
    dev = traces.deviations
    if window is not None:
        start, stop = window
        dev = dev[:, start:stop]
    if dev.shape[1] < 2:
        raise ValueError("correlation window needs at least 2 samples")
    x = dev - dev.mean(axis=1, keepdims=True)
    power = np.mean(x * x, axis=1)
    for k, p in enumerate(power):
        if not p > 0:
            raise ValueError(f"mode {k + 1} ({traces.mode_frequencies[k]:.6g} Hz) has zero variance in the window")
    c = (x @ x.T) / x.shape[1]
    norm = np.sqrt(power)
    c = c / norm[:, None] / norm[None, :]
    c = 0.5 * (c + c.T)
    np.fill_diagonal(c, 1.0)
    return CorrelationMatrix(np.clip(c, -1.0, 1.0), np.asarray(traces.mode_frequencies, dtype=float))


def correlation_vs_detuning(cm: CorrelationMatrix, bin_width: float) -> DetuningCurve:
    """Average off-diagonal coefficients in detuning bins centred on multiples of ``bin_width``."""
    n = cm.n_modes
    if n < 2:
        raise ValueError("need at least two modes")
    if bin_width <= 0:
        raise ValueError("bin width must be > 0")
    i, j = np.triu_indices(n, k=1)
    det = np.abs(cm.mode_frequencies[i] - cm.mode_frequencies[j])
    vals = cm.matrix[i, j]
    idx = np.rint(det / bin_width).astype(np.int64)
    keys = np.unique(idx)
    counts = np.array([np.sum(idx == k) for k in keys])
    return DetuningCurve(
        np.array([det[idx == k].mean() for k in keys]),
        np.array([vals[idx == k].mean() for k in keys]),
        counts,
    )
