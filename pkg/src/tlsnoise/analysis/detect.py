"""Burst detection on multimode traces.

Jumps are flagged where per-mode first differences, in units of a rolling
robust scale (1.4826 x rolling median of |diff|), cross a threshold in
several modes at the same sample.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.optimize import least_squares

MAD_TO_SIGMA = 1.4826


@dataclass
class DetectedBurst:
    onset_index: int
    peak_deviations: np.ndarray   # per mode, Hz, relative to the pre-onset level
    tau: float                    # relaxation time fitted to the tail along the onset jump, s
    onset_time: float = 0.0

    @property
    def dominant_mode(self) -> int:
        return int(np.argmax(np.abs(self.peak_deviations)))


def robust_step_scale(dev: np.ndarray, window: int) -> np.ndarray:
    """Rolling robust standard deviation of the first differences, per mode.

    The running median over ``window`` samples is evaluated every
    ``window // 8`` samples on full windows only and linearly interpolated in
    between; samples near the trace ends take the nearest full-window value.
    """
    d = np.abs(np.diff(np.atleast_2d(dev), axis=1))
    n = d.shape[1]
    w = max(min(window, n), 1)
    step = max(w // 8, 1)
    med = np.median(sliding_window_view(d, w, axis=1)[:, ::step], axis=2)
    centers = np.arange(med.shape[1]) * step + (w - 1) / 2.0
    x = np.arange(n)
    return MAD_TO_SIGMA * np.array([np.interp(x, centers, m) for m in med])


def _fit_tail(dt: float, steps: np.ndarray) -> float:
    """Relaxation time from the per-sample steps of a jump that decays as exp(-t / tau).

    ``steps[0]`` is the onset jump and ``steps[j]`` the change from sample
    j - 1 to j after it. Fitting steps rather than levels keeps the wandering
    TLS background from dominating the residuals. Returns nan when the fit is
    meaningless.
    """
    if steps.size < 3 or steps[0] == 0:
        return float("nan")
    j = np.arange(steps.size)

    def model(p):
        e = np.exp(-j * dt / np.exp(p[1]))
        out = np.empty_like(e)
        out[0] = p[0]
        out[1:] = p[0] * np.diff(e)
        return out

    tau0 = dt
    if steps[1] / steps[0] < 0:
        tau0 = -dt / np.log1p(max(steps[1] / steps[0], -0.99))
    with np.errstate(over="ignore", invalid="ignore"):
        res = least_squares(lambda p: model(p) - steps, [steps[0], np.log(tau0)], method="lm")
        tau = float(np.exp(res.x[1]))
    return tau if res.success and np.isfinite(tau) else float("nan")


def detect_bursts(traces, threshold: float = 8.0, min_separation: float = 20.0, scale_window: int = 1201,
                  min_modes: int = 3, baseline_samples: int = 4, peak_samples: int = 3,
                  tail_duration: float = 20.0) -> list:
    """Flag abrupt multimode jumps and fit their relaxation tails.

    A sample is a hit when at least ``min_modes`` modes (capped at the mode
    count) jump by more than ``threshold`` robust sigmas at once. Bursts move
    many modes together, while a telegraph step of a defect next to one mode
    moves mostly that mode. Hits closer than ``min_separation`` seconds to the
    previous hit are merged into one event unless they jump in the same
    direction as that event's onset.
    """
    if threshold <= 0:
        raise ValueError("threshold must be > 0")
    dev = traces.deviations
    dt = traces.dt
    if dev.shape[1] < 3:
        return []
    d = np.abs(np.diff(dev, axis=1))
    scale = robust_step_scale(dev, scale_window)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(scale > 0, d / scale, np.where(d > 0, np.inf, 0.0))
    need = max(1, min(min_modes, dev.shape[0]))
    hits = np.flatnonzero((z > threshold).sum(axis=0) >= need) + 1     # sample where the jump has appeared
    if hits.size == 0:
        return []
    # A hit within the separation of the previous one continues the same event
    # unless its jump points along the event's onset jump: relaxation tails
    # step against the onset, a new burst steps with it.
    sep = max(int(round(min_separation / dt)), 1)
    jumps = np.diff(dev, axis=1)
    onsets, last = [], None
    for h in hits:
        if last is None or h - last >= sep or np.dot(jumps[:, h - 1], jumps[:, onsets[-1] - 1]) > 0:
            onsets.append(int(h))
        last = h

    n = dev.shape[1]
    out = []
    n_tail = max(int(round(tail_duration / dt)), 3)
    for i, on in enumerate(onsets):
        nxt = onsets[i + 1] if i + 1 < len(onsets) else n
        lo = max(on - baseline_samples, 0)
        base = np.median(dev[:, lo:on], axis=1) if on > lo else dev[:, on - 1 if on > 0 else 0]
        seg = dev[:, on:min(on + peak_samples, nxt)] - base[:, None]
        idx = np.argmax(np.abs(seg), axis=1)
        peak = seg[np.arange(seg.shape[0]), idx]
        # tail fitted on the projection onto the onset jump, which averages the
        # independent TLS backgrounds of the modes
        jump = jumps[:, on - 1]
        w = jump / np.linalg.norm(jump)
        stop = min(on + n_tail, nxt, n)
        tau = _fit_tail(dt, w @ jumps[:, on - 1:stop - 1])
        out.append(DetectedBurst(on, peak, tau, traces.t0 + on * dt))
    return out


def quiet_window(n_samples: int, dt: float, bursts, margin: float = 60.0) -> tuple:
    """Longest burst-free sample range ``(start, stop)``.

    Each detection blocks ``margin`` seconds before its onset and ``margin``
    seconds after it, so relaxation tails stay out of the window.
    """
    pad = int(round(margin / dt))
    blocked = sorted((max(b.onset_index - pad, 0), min(b.onset_index + pad, n_samples)) for b in bursts)
    best = (0, 0)
    cursor = 0
    for lo, hi in blocked:
        if lo - cursor > best[1] - best[0]:
            best = (cursor, lo)
        cursor = max(cursor, hi)
    if n_samples - cursor > best[1] - best[0]:
        best = (cursor, n_samples)
    return best
