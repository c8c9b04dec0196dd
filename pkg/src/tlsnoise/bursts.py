"""Phenomenological burst events: abrupt shift, exponential relaxation tail."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

UNIFORM = "uniform"
ANTISYMMETRIC = "antisymmetric"
EVENT_CLASSES = (UNIFORM, ANTISYMMETRIC)


@dataclass(frozen=True)
class BurstEvent:
    onset: float
    event_class: str
    amplitude: float
    pivot: float
    tau: float

    def __post_init__(self):
        if self.event_class not in EVENT_CLASSES:
            raise ValueError(f"unknown burst class {self.event_class!r}")
        if self.tau <= 0:
            raise ValueError("relaxation time must be > 0")


@dataclass
class BurstSettings:
    rate: float = 0.0
    antisymmetric_fraction: float = 0.5
    amplitude_range: tuple = (1e3, 2e4)
    pivot_range: tuple = (8.0, 11.0)
    tau_range: tuple = (1.2, 3.0)


def sample_burst_schedule(rate: float, duration: float, gen: np.random.Generator,
                          antisymmetric_fraction: float = 0.5,
                          amplitude_range=(1e3, 2e4),
                          pivot_range=(8.0, 11.0),
                          tau_range=(1.2, 3.0)) -> list:
    """Poisson onsets over ``[0, duration)`` with randomised class, size, pivot and tail."""
    if rate < 0:
        raise ValueError("burst rate must be >= 0")
    n = int(gen.poisson(rate * duration)) if rate > 0 else 0
    if n == 0:
        return []
    onsets = np.sort(gen.uniform(0.0, duration, n))
    anti = gen.random(n) < antisymmetric_fraction
    lo, hi = amplitude_range
    amps = np.exp(gen.uniform(np.log(lo), np.log(hi), n))
    pivots = gen.uniform(pivot_range[0], pivot_range[1], n)
    taus = gen.uniform(tau_range[0], tau_range[1], n)
    return [
        BurstEvent(float(t), ANTISYMMETRIC if a else UNIFORM, float(A), float(k0) if a else float("nan"), float(tau))
        for t, a, A, k0, tau in zip(onsets, anti, amps, pivots, taus)
    ]


def mode_profile(event: BurstEvent, mode_index, n_modes: int):
    """Relative amplitude across modes (1-based index). Affine, zero at the pivot."""
    k = np.asarray(mode_index, dtype=float)
    if event.event_class == UNIFORM:
        return np.ones_like(k)
    return (k - event.pivot) / max(n_modes - 1, 1)


def burst_contribution(event: BurstEvent, mode_index, n_modes: int, t):
    t = np.asarray(t, dtype=float)
    lag = t - event.onset
    tail = np.where(lag >= 0, np.exp(-np.clip(lag, 0, None) / event.tau), 0.0)
    out = mode_profile(event, mode_index, n_modes) * event.amplitude * tail
    return out[()] if np.ndim(out) == 0 else out


def burst_traces(events, n_modes: int, times) -> np.ndarray:
    """Summed contribution of all events, shape ``(n_modes, len(times))``."""
    times = np.asarray(times, dtype=float)
    out = np.zeros((n_modes, times.size))
    if times.size == 0:
        return out
    dt = times[1] - times[0] if times.size > 1 else 1.0
    k = np.arange(1, n_modes + 1)
    for ev in events:
        i0 = int(np.searchsorted(times, ev.onset, side="left"))
        if i0 >= times.size:
            continue
        # tails below 1e-17 of the peak are irrelevant in double precision
        span = min(times.size, i0 + int(np.ceil(40.0 * ev.tau / dt)) + 1)
        seg = times[i0:span]
        tail = ev.amplitude * np.exp(-(seg - ev.onset) / ev.tau)
        out[:, i0:span] += mode_profile(ev, k, n_modes)[:, None] * tail[None, :]
    return out
