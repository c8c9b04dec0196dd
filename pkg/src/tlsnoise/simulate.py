"""Multimode frequency-deviation traces from a TLS bath plus bursts."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import rng as rngs
from .bath import BathConfig, TlsEnsemble, block_shift_increments, sample_ensemble
from .bursts import burst_traces
from .resonator import ResonatorParams, extract_shift

DEFAULT_SAMPLE_CAP = 2_000_000
# fixed partition of defects into work units; never depends on the worker count
BLOCK_SIZE = 128


@dataclass
class TimeTraceSet:
    t0: float
    dt: float
    mode_frequencies: np.ndarray
    deviations: np.ndarray    # (n_modes, n_samples), Hz

    def __post_init__(self):
        self.mode_frequencies = np.asarray(self.mode_frequencies, dtype=float)
        self.deviations = np.atleast_2d(np.asarray(self.deviations, dtype=float))
        if self.dt <= 0:
            raise ValueError("sample interval must be > 0")
        if self.deviations.shape[0] != self.mode_frequencies.size:
            raise ValueError("one deviation row per mode frequency required")

    @property
    def n_modes(self) -> int:
        return self.deviations.shape[0]

    @property
    def n_samples(self) -> int:
        return self.deviations.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_samples)

    def window(self, start: int, stop: int) -> "TimeTraceSet":
        return TimeTraceSet(self.t0 + start * self.dt, self.dt, self.mode_frequencies,
                            self.deviations[:, start:stop])


def simulate_trace_set(cfg: BathConfig, duration: float, dt: float, bursts=(), noise_floor: float = 5.0,
                       workers: int = 1, sample_cap: int = DEFAULT_SAMPLE_CAP,
                       ensemble: TlsEnsemble | None = None) -> TimeTraceSet:
    """Synthesise deviation traces for every mode in ``cfg``.

    Each mode's TLS term is its dispersive shift relative to t = 0. Burst
    tails and white measurement noise (std ``noise_floor``) are added on top.
    Output is bit-identical for any ``workers`` value.
    """
    if dt <= 0 or duration <= 0:
        raise ValueError("duration and dt must be > 0")
    n = int(round(duration / dt))
    if n > sample_cap:
        raise ValueError(f"{n} samples requested; cap is {sample_cap}")
    modes = np.asarray(cfg.mode_frequencies, dtype=float)
    if ensemble is None:
        ensemble = sample_ensemble(cfg)

    blocks = [range(i, min(i + BLOCK_SIZE, len(ensemble))) for i in range(0, len(ensemble), BLOCK_SIZE)]
    inc = np.zeros((n, modes.size))

    def work(rows):
        return block_shift_increments(ensemble, rows, modes, n, dt)

    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(work, blocks):
                inc += part
    else:
        for rows in blocks:
            inc += work(rows)
    dev = np.cumsum(inc, axis=0).T.copy()

    times = dt * np.arange(n)
    if bursts:
        dev += burst_traces(bursts, modes.size, times)
    if noise_floor > 0:
        for k in range(modes.size):
            dev[k] += noise_floor * rngs.stream(cfg.master_seed, rngs.NOISE, k).standard_normal(n)
    return TimeTraceSet(0.0, dt, modes, dev)


def render_s11_traces(traces: TimeTraceSet, params: list) -> np.ndarray:
    """Reflection time series of each mode probed at its fitted frequency.

    Sample n of mode k is the model with f_r shifted by the deviation,
    evaluated at the fixed probe tone ``params[k].f_r``.
    """
    if len(params) != traces.n_modes:
        raise ValueError("one ResonatorParams per mode required")
    out = np.empty(traces.deviations.shape, dtype=complex)
    for k, p in enumerate(params):
        f_inst = p.f_r + traces.deviations[k]
        x = (p.f_r - f_inst) / f_inst
        bracket = 1.0 - 2.0 * (p.q_loaded / p.q_external) * np.exp(1j * p.phi0) / (1.0 + 2j * p.q_loaded * x)
        out[k] = -p.a * np.exp(-1j * (np.pi - p.theta)) * bracket
    return out


def extract_traces(s11: np.ndarray, params: list, dt: float, t0: float = 0.0,
                   mode_frequencies=None) -> tuple:
    """Invert reflection series back to deviations; returns ``(TimeTraceSet, residuals)``."""
    s11 = np.atleast_2d(s11)
    dev = np.empty(s11.shape)
    res = np.empty(s11.shape)
    for k, p in enumerate(params):
        dev[k], res[k] = extract_shift(s11[k], np.full(s11.shape[1], p.f_r), p)
    freqs = [p.f_r for p in params] if mode_frequencies is None else mode_frequencies
    return TimeTraceSet(t0, dt, freqs, dev), res


def default_resonators(mode_frequencies, linewidth_range=(18e3, 32e3), a: float = 1.0,
                       theta: float = 0.3, phi0: float = 0.05, coupling_ratio: float = 2.5) -> list:
    """Per-mode reflection parameters with linewidths spread over ``linewidth_range``."""
    freqs = np.asarray(mode_frequencies, dtype=float)
    lw = np.linspace(linewidth_range[0], linewidth_range[1], freqs.size) if freqs.size > 1 else \
        np.array([np.mean(linewidth_range)])
    return [ResonatorParams(a, theta, f / w, coupling_ratio * f / w, phi0, f) for f, w in zip(freqs, lw)]
