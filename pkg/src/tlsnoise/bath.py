"""TLS defect ensemble with spectral diffusion from thermal fluctuators.

Each defect pulls every mode by g^2 sigma_z / (f_mode - f_tls). Its transition
frequency wanders as f_tls + sum_m xi_m(t) d_m, where xi_m are symmetric random
telegraph processes (the thermal fluctuators).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import rng as rngs

DEFAULT_MODES = tuple(2.371e9 + 2.0e6 * k for k in range(14))


@dataclass
class BathConfig:
    mode_frequencies: tuple = DEFAULT_MODES
    n_tls: int = 5000
    tls_band: tuple = (2.36e9, 2.41e9)
    g_max: float = 10e3
    g_min: float = 1e3
    g_exponent: float = -1.0
    n_fluctuators_per_tls: int = 4
    rate_band: tuple = (1e-4, 1.0)
    shift_scale: float = 20e3
    guard_detuning: float = 200e3
    master_seed: int = 0

    def __post_init__(self):
        self.mode_frequencies = tuple(float(f) for f in self.mode_frequencies)
        self.tls_band = tuple(float(f) for f in self.tls_band)
        self.rate_band = tuple(float(r) for r in self.rate_band)
        self.validate()

    def validate(self):
        lo, hi = self.tls_band
        if not lo < hi:
            raise ValueError("tls_band must be an increasing (low, high) pair")
        if self.mode_frequencies and not (lo <= min(self.mode_frequencies) and max(self.mode_frequencies) <= hi):
            raise ValueError("tls_band must cover every mode frequency")
        if not 0 < self.rate_band[0] < self.rate_band[1]:
            raise ValueError("rate_band needs 0 < gamma_min < gamma_max")
        if self.guard_detuning <= 0:
            raise ValueError("guard_detuning must be > 0")
        if self.n_tls < 0 or self.n_fluctuators_per_tls < 0:
            raise ValueError("counts must be non-negative")
        if not 0 < self.g_min <= self.g_max:
            raise ValueError("coupling range needs 0 < g_min <= g_max")


def quiet_analog_config(**overrides) -> BathConfig:
    """Bath whose defects all sit outside the mode comb.

    A 3 MHz guard empties the band between the first and last mode, so every
    mode sees the same distant defects through slowly varying detunings.
    Their shifts are strongly correlated between neighbouring modes and the
    correlation fades across the comb.
    """
    kw = dict(guard_detuning=3e6, g_max=200e3)
    kw.update(overrides)
    return BathConfig(**kw)


@dataclass
class Fluctuator:
    switching_rate: float
    current_state: int
    rng_stream_id: int

    def __post_init__(self):
        if self.switching_rate <= 0:
            raise ValueError("switching rate must be > 0")
        if self.current_state not in (-1, 1):
            raise ValueError("fluctuator state must be -1 or +1")


@dataclass
class TlsDefect:
    base_frequency: float
    coupling: float
    sigma_z: int = -1
    saturated: bool = False
    fluctuator_couplings: list = field(default_factory=list)
    fluctuators: list = field(default_factory=list)


@dataclass
class TlsEnsemble:
    """Array-backed defect collection; ``defects`` gives the per-object view."""

    f_tls: np.ndarray
    g: np.ndarray
    sigma_z: np.ndarray
    saturated: np.ndarray
    rates: np.ndarray       # (n_tls, n_fluct) switching rates, Hz
    shifts: np.ndarray      # (n_tls, n_fluct) signed frequency kicks d_m, Hz
    states: np.ndarray      # (n_tls, n_fluct) initial telegraph states
    guard_detuning: float
    seed: int = 0

    def __len__(self):
        return self.f_tls.size

    @property
    def n_fluctuators(self) -> int:
        return self.rates.shape[1] if self.rates.ndim == 2 else 0

    def stream_id(self, i: int, m: int) -> int:
        return i * self.n_fluctuators + m

    def fluctuator(self, i: int, m: int) -> Fluctuator:
        return Fluctuator(float(self.rates[i, m]), int(self.states[i, m]), self.stream_id(i, m))

    def defects(self) -> list:
        return [
            TlsDefect(float(self.f_tls[i]), float(self.g[i]), int(self.sigma_z[i]), bool(self.saturated[i]),
                      [float(d) for d in self.shifts[i]],
                      [self.fluctuator(i, m) for m in range(self.n_fluctuators)])
            for i in range(len(self))
        ]

    def offsets(self, states=None) -> np.ndarray:
        """Spectral-diffusion offset of every defect for the given fluctuator states."""
        st = self.states if states is None else states
        return np.sum(st * self.shifts, axis=1) if self.shifts.size else np.zeros(len(self))

    def saturate(self, band: tuple) -> "TlsEnsemble":
        """Copy with every defect inside ``band`` flagged saturated."""
        lo, hi = band
        sat = self.saturated | ((self.f_tls >= lo) & (self.f_tls <= hi))
        return TlsEnsemble(self.f_tls, self.g, self.sigma_z, sat, self.rates, self.shifts, self.states,
                           self.guard_detuning, self.seed)

    @classmethod
    def from_defects(cls, defects, guard_detuning: float, seed: int = 0) -> "TlsEnsemble":
        n = len(defects)
        m = max((len(d.fluctuator_couplings) for d in defects), default=0)
        rates = np.ones((n, m))
        shifts = np.zeros((n, m))
        states = np.ones((n, m), dtype=np.int8)
        for i, d in enumerate(defects):
            for j, dm in enumerate(d.fluctuator_couplings):
                shifts[i, j] = dm
                if j < len(d.fluctuators):
                    rates[i, j] = d.fluctuators[j].switching_rate
                    states[i, j] = d.fluctuators[j].current_state
        return cls(
            np.array([d.base_frequency for d in defects], dtype=float),
            np.array([d.coupling for d in defects], dtype=float),
            np.array([d.sigma_z for d in defects], dtype=np.int8),
            np.array([d.saturated for d in defects], dtype=bool),
            rates, shifts, states, float(guard_detuning), seed,
        )


def _sample_couplings(gen, n, g_min, g_max, exponent):
    u = gen.random(n)
    if abs(exponent + 1.0) < 1e-12:
        return g_min * (g_max / g_min) ** u
    p = exponent + 1.0
    return (g_min ** p + u * (g_max ** p - g_min ** p)) ** (1.0 / p)


def sample_ensemble(cfg: BathConfig, max_rounds: int = 200) -> TlsEnsemble:
    """Draw a defect ensemble; fully determined by ``cfg.master_seed``."""
    cfg.validate()
    gen = rngs.stream(cfg.master_seed, rngs.ENSEMBLE)
    n, m = cfg.n_tls, cfg.n_fluctuators_per_tls
    lo, hi = cfg.tls_band
    modes = np.asarray(cfg.mode_frequencies, dtype=float)

    f_tls = gen.uniform(lo, hi, n)

    def too_close(f):
        if modes.size == 0:
            return np.zeros(f.size, dtype=bool)
        return np.min(np.abs(f[:, None] - modes[None, :]), axis=1) < cfg.guard_detuning

    bad = too_close(f_tls)
    rounds = 0
    while bad.any():
        rounds += 1
        if rounds > max_rounds:
            raise RuntimeError(
                f"could not place {int(bad.sum())} defects outside the guard detuning after {max_rounds} "
                "resampling rounds; band too crowded")
        f_tls[bad] = gen.uniform(lo, hi, int(bad.sum()))
        bad = too_close(f_tls)

    g = _sample_couplings(gen, n, cfg.g_min, cfg.g_max, cfg.g_exponent)
    glo, ghi = np.log(cfg.rate_band[0]), np.log(cfg.rate_band[1])
    rates = np.exp(gen.uniform(glo, ghi, (n, m)))
    signs = gen.choice(np.array([-1.0, 1.0]), size=(n, m))
    states = gen.choice(np.array([-1, 1], dtype=np.int8), size=(n, m))
    return TlsEnsemble(
        f_tls=f_tls,
        g=g,
        sigma_z=-np.ones(n, dtype=np.int8),
        saturated=np.zeros(n, dtype=bool),
        rates=rates,
        shifts=cfg.shift_scale * signs,
        states=states,
        guard_detuning=float(cfg.guard_detuning),
        seed=int(cfg.master_seed),
    )


def switch_probability(rate: float, dt: float) -> float:
    """Probability that a telegraph state sampled every ``dt`` differs from the previous sample."""
    return float(-np.expm1(-2.0 * rate * dt) / 2.0)


def flip_steps(rate: float, dt: float, n_samples: int, gen: np.random.Generator) -> np.ndarray:
    """Sample indices at which a grid-sampled telegraph path changes sign.

    The continuous process has exponential dwell times with mean 1/rate; seen
    on the dt grid it is a two-state Markov chain, so the gaps between observed
    sign changes are geometric with ``switch_probability``.
    """
    p = switch_probability(rate, dt)
    if p <= 0.0 or n_samples < 2:
        return np.empty(0, dtype=np.int64)
    out = []
    last = 0
    expected = (n_samples - 1) * p
    batch = int(expected + 6.0 * np.sqrt(expected) + 16)
    while last < n_samples:
        gaps = gen.geometric(p, batch)
        steps = last + np.cumsum(gaps)
        out.append(steps)
        last = int(steps[-1])
        batch = max(16, batch // 4)
    steps = np.concatenate(out)
    return steps[steps < n_samples]


def fluctuator_path(fluct: Fluctuator, duration: float, dt: float, seed: int = 0) -> np.ndarray:
    """Telegraph sample path (+-1 per sample) of one fluctuator on the dt grid."""
    if duration <= 0 or dt <= 0:
        raise ValueError("duration and dt must be > 0")
    n = int(round(duration / dt))
    gen = rngs.stream(seed, rngs.FLUCTUATOR, fluct.rng_stream_id)
    marks = np.zeros(n, dtype=np.int8)
    marks[flip_steps(fluct.switching_rate, dt, n, gen)] = 1
    parity = np.cumsum(marks, dtype=np.int64) & 1
    return (fluct.current_state * (1 - 2 * parity)).astype(np.int8)


def clamp_detuning(delta, guard: float):
    delta = np.asarray(delta, dtype=float)
    sign = np.where(delta < 0, -1.0, 1.0)
    return sign * np.maximum(np.abs(delta), guard / 2.0)


def dispersive_shift(mode_f, ensemble: TlsEnsemble, offsets=None):
    """Summed dispersive pull on ``mode_f`` (scalar or array of Hz).

    ``offsets`` are the instantaneous spectral-diffusion offsets of the defects
    (defaults to the ensemble's current fluctuator states). Saturated defects
    contribute nothing.
    """
    mode_f = np.asarray(mode_f, dtype=float)
    if len(ensemble) == 0:
        return np.zeros_like(mode_f)[()] if mode_f.ndim == 0 else np.zeros_like(mode_f)
    off = ensemble.offsets() if offsets is None else np.asarray(offsets, dtype=float)
    active = ~ensemble.saturated
    f_inst = ensemble.f_tls[active] + off[active]
    weight = ensemble.g[active] ** 2 * ensemble.sigma_z[active]
    det = clamp_detuning(mode_f[..., None] - f_inst, ensemble.guard_detuning)
    out = np.sum(weight / det, axis=-1)
    return out[()] if out.ndim == 0 else out


@njit(cache=True)
def _accumulate(steps, bounds, rows, states, shifts, f_tls, weight, modes, guard, inc):
    # k-way merge of each defect's fluctuator switch times; the defect's
    # contribution is re-evaluated once per distinct switch step
    n_fl = states.shape[1]
    n_modes = modes.size
    half = guard / 2.0
    ptr = np.empty(n_fl, dtype=np.int64)
    state = np.empty(n_fl)
    prev = np.empty(n_modes)
    for j in range(rows.size):
        r = rows[j]
        off = 0.0
        for m in range(n_fl):
            ptr[m] = bounds[j * n_fl + m]
            state[m] = states[r, m]
            off += state[m] * shifts[r, m]
        for k in range(n_modes):
            d = modes[k] - f_tls[r] - off
            if abs(d) < half:
                d = half if d >= 0 else -half
            prev[k] = weight[r] / d
        while True:
            step = -1
            for m in range(n_fl):
                if ptr[m] < bounds[j * n_fl + m + 1]:
                    s = steps[ptr[m]]
                    if step < 0 or s < step:
                        step = s
            if step < 0:
                break
            for m in range(n_fl):
                if ptr[m] < bounds[j * n_fl + m + 1] and steps[ptr[m]] == step:
                    off -= 2.0 * state[m] * shifts[r, m]
                    state[m] = -state[m]
                    ptr[m] += 1
            for k in range(n_modes):
                d = modes[k] - f_tls[r] - off
                if abs(d) < half:
                    d = half if d >= 0 else -half
                cur = weight[r] / d
                inc[step, k] += cur - prev[k]
                prev[k] = cur


def block_shift_increments(ensemble: TlsEnsemble, rows, modes, n_samples: int, dt: float) -> np.ndarray:
    """Per-sample increments of the dispersive shift from the defects in ``rows``.

    Returns an ``(n_samples, n_modes)`` array whose cumulative sum is each
    mode's shift relative to t = 0. Only fluctuator switches change a
    defect's contribution, so the work scales with the number of switches.
    """
    modes = np.asarray(modes, dtype=float)
    inc = np.zeros((n_samples, modes.size))
    rows = np.array([i for i in rows if not ensemble.saturated[i]], dtype=np.int64)
    n_fl = ensemble.n_fluctuators
    if rows.size == 0 or n_fl == 0:
        return inc
    chunks = []
    for i in rows:
        for m in range(n_fl):
            gen = rngs.stream(ensemble.seed, rngs.FLUCTUATOR, ensemble.stream_id(i, m))
            chunks.append(flip_steps(ensemble.rates[i, m], dt, n_samples, gen))
    bounds = np.zeros(len(chunks) + 1, dtype=np.int64)
    np.cumsum([c.size for c in chunks], out=bounds[1:])
    steps = np.concatenate(chunks) if bounds[-1] else np.empty(0, dtype=np.int64)
    weight = ensemble.g ** 2 * ensemble.sigma_z
    _accumulate(steps.astype(np.int64), bounds, rows, ensemble.states.astype(float), ensemble.shifts,
                ensemble.f_tls, weight, modes, float(ensemble.guard_detuning), inc)
    return inc
