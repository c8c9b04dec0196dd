"""Single-port reflection model of one resonance mode.

    S11(f) = -a exp(-i(pi - theta)) [1 - 2 (Q_L/Q_C) exp(i phi0) / (1 + 2i Q_L (f - f_r)/f_r)]

Far from resonance S11 -> a exp(i theta); the loop of the resonance circle is
traced with diameter 2 Q_L/Q_C, rotated by phi0.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import least_squares

PARAM_NAMES = ("a", "theta_rad", "q_loaded", "q_external", "phi0_rad", "f_r_hz")

# below this |1 - w| the inversion amplifies noise by more than 1e6
SINGULAR_FLOOR = 1e-6


class InversionError(ValueError):
    """Raised when a reflection sample cannot be mapped back to a frequency."""


@dataclass(frozen=True)
class ResonatorParams:
    a: float
    theta: float
    q_loaded: float
    q_external: float
    phi0: float
    f_r: float

    def __post_init__(self):
        vals = (self.a, self.theta, self.q_loaded, self.q_external, self.phi0, self.f_r)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError(f"non-finite resonator parameter in {self}")
        if self.a <= 0:
            raise ValueError("amplitude scale a must be > 0")
        if self.q_loaded <= 0 or self.q_external <= 0:
            raise ValueError("quality factors must be > 0")
        if self.f_r <= 0:
            raise ValueError("resonance frequency must be > 0")

    @property
    def linewidth(self) -> float:
        return self.f_r / self.q_loaded

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.theta, self.q_loaded, self.q_external, self.phi0, self.f_r])

    @classmethod
    def from_array(cls, x) -> "ResonatorParams":
        return cls(*(float(v) for v in x))

    def to_dict(self) -> dict:
        return dict(zip(PARAM_NAMES, (float(v) for v in self.as_array())))

    @classmethod
    def from_dict(cls, d: dict) -> "ResonatorParams":
        return cls(*(float(d[k]) for k in PARAM_NAMES))


@dataclass(frozen=True)
class ComplexSweep:
    freq: np.ndarray
    s11: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.freq, dtype=float)
        s = np.asarray(self.s11, dtype=complex)
        if f.ndim != 1 or f.shape != s.shape:
            raise ValueError("frequency grid and reflection samples must be 1-D with equal length")
        if f.size == 0:
            raise ValueError("empty frequency grid")
        if np.any(np.diff(f) <= 0):
            raise ValueError("frequency grid must be strictly increasing")
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(s))):
            raise ValueError("sweep contains non-finite values")
        object.__setattr__(self, "freq", f)
        object.__setattr__(self, "s11", s)

    def __len__(self):
        return self.freq.size


@dataclass
class FitOptions:
    max_nfev: int = 2000
    xtol: float = 1e-15
    ftol: float = 1e-15
    gtol: float = 1e-15


@dataclass
class FitResult:
    params: ResonatorParams
    stderr: dict
    residual_norm: float
    converged: bool
    iterations: int
    message: str = ""


def s11_response(params: ResonatorParams, probe_f):
    """Evaluate the reflection coefficient at ``probe_f`` (scalar or array, Hz)."""
    f = np.asarray(probe_f, dtype=float)
    x = (f - params.f_r) / params.f_r
    bracket = 1.0 - 2.0 * (params.q_loaded / params.q_external) * np.exp(1j * params.phi0) / (
        1.0 + 2j * params.q_loaded * x
    )
    out = -params.a * np.exp(-1j * (np.pi - params.theta)) * bracket
    return out[()] if out.ndim == 0 else out


def s11_sweep(params: ResonatorParams, grid) -> ComplexSweep:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("grid must be a non-empty 1-D sequence")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    return ComplexSweep(grid, s11_response(params, grid))


def guess_params(sweep: ComplexSweep) -> ResonatorParams:
    """Deterministic starting point read off the sweep.

    The off-resonant point a*exp(i theta) comes from the sweep endpoints. After
    dividing it out, 1 - S/(a e^{i theta}) is a Lorentzian loop whose largest
    excursion sits at f_r and equals 2 (Q_L/Q_C) e^{i phi0}; its half-power
    width gives Q_L.
    """
    f, s = sweep.freq, sweep.s11
    n_edge = max(1, len(f) // 50)
    off = 0.5 * (s[:n_edge].mean() + s[-n_edge:].mean())
    a = float(abs(off))
    theta = float(np.angle(off))
    z = 1.0 - s / off
    mag2 = np.abs(z) ** 2
    i0 = int(np.argmax(mag2))
    f_r = float(f[i0])
    z0 = z[i0]
    half = 0.5 * mag2[i0]
    lo = hi = i0
    while lo > 0 and mag2[lo - 1] >= half:
        lo -= 1
    while hi < len(f) - 1 and mag2[hi + 1] >= half:
        hi += 1

    def cross(i_in, i_out):
        t = (mag2[i_in] - half) / (mag2[i_in] - mag2[i_out])
        return f[i_in] + t * (f[i_out] - f[i_in])

    if lo > 0 and hi < len(f) - 1:
        fwhm = cross(hi, hi + 1) - cross(lo, lo - 1)
    else:
        fwhm = max(f[hi] - f[lo], f[-1] - f[0]) if len(f) > 1 else f_r * 1e-5
    q_loaded = f_r / fwhm
    q_external = 2.0 * q_loaded / max(abs(z0), 1e-6)
    return ResonatorParams(a, theta, q_loaded, q_external, float(np.angle(z0)), f_r)


def wrap_angle(x) -> float:
    """Map an angle onto [-pi, pi)."""
    return float((x + np.pi) % (2 * np.pi) - np.pi)


def _to_internal(p: ResonatorParams, ref: ResonatorParams) -> np.ndarray:
    return np.array([
        np.log(p.a),
        p.theta,
        np.log(p.q_loaded),
        np.log(p.q_external),
        p.phi0,
        (p.f_r - ref.f_r) / ref.linewidth,
    ])


def _from_internal(x, ref: ResonatorParams) -> ResonatorParams:
    return ResonatorParams(
        float(np.exp(x[0])),
        wrap_angle(x[1]),
        float(np.exp(x[2])),
        float(np.exp(x[3])),
        wrap_angle(x[4]),
        float(ref.f_r + x[5] * ref.linewidth),
    )


def fit_resonance(sweep: ComplexSweep, guess: ResonatorParams | None = None,
                  options: FitOptions | None = None) -> FitResult:
    """Least-squares fit of all six reflection parameters.

    Levenberg-Marquardt on the stacked real/imaginary residuals. Internally the
    positive quantities are fitted in log space and f_r in units of the guess
    linewidth, so the problem is well scaled for Q ~ 1e5 and f_r ~ GHz.
    """
    options = options or FitOptions()
    n_par = len(PARAM_NAMES)
    if 2 * len(sweep) < n_par or len(sweep) < n_par:
        raise ValueError(f"sweep has {len(sweep)} points; at least {n_par} needed to fit {n_par} parameters")
    if guess is None:
        guess = guess_params(sweep)
    if not np.all(np.isfinite(guess.as_array())):
        raise ValueError("initial guess must be finite")

    f, s = sweep.freq, sweep.s11
    ref = guess

    def model(x):
        a, theta, q_l, q_c, phi0 = np.exp(x[0]), x[1], np.exp(x[2]), np.exp(x[3]), x[4]
        f_r = ref.f_r + x[5] * ref.linewidth
        bracket = 1.0 - 2.0 * (q_l / q_c) * np.exp(1j * phi0) / (1.0 + 2j * q_l * (f - f_r) / f_r)
        return -a * np.exp(-1j * (np.pi - theta)) * bracket

    def resid(x):
        r = model(x) - s
        return np.concatenate([r.real, r.imag])

    x0 = _to_internal(guess, ref)
    try:
        # wild trial steps may overflow exp(); the damping rejects them
        with np.errstate(over="ignore", invalid="ignore"):
            res = least_squares(resid, x0, method="lm", xtol=options.xtol, ftol=options.ftol,
                                gtol=options.gtol, max_nfev=options.max_nfev)
    except (ValueError, FloatingPointError) as exc:
        return FitResult(guess, {k: float("nan") for k in PARAM_NAMES}, float("inf"), False, 0, str(exc))

    x = res.x
    r = res.fun
    norm = float(np.sqrt(np.sum(r ** 2)))
    converged = bool(res.status > 0 and np.isfinite(norm))
    try:
        with np.errstate(over="ignore"):
            params = _from_internal(x, ref)
    except ValueError as exc:
        return FitResult(guess, {k: float("nan") for k in PARAM_NAMES}, float("inf"), False, res.nfev, str(exc))

    # standard errors: covariance in internal coordinates mapped through d(param)/d(internal)
    dof = max(r.size - n_par, 1)
    s2 = float(np.sum(r ** 2)) / dof
    jac = res.jac
    try:
        cov_int = np.linalg.pinv(jac.T @ jac) * s2
        chain = np.array([params.a, 1.0, params.q_loaded, params.q_external, 1.0, ref.linewidth])
        se = np.sqrt(np.clip(np.diag(cov_int), 0, None)) * chain
    except np.linalg.LinAlgError:
        se = np.full(n_par, np.nan)
    return FitResult(params, dict(zip(PARAM_NAMES, map(float, se))), norm, converged,
                     int(res.nfev), res.message)


def _invert(sample, params: ResonatorParams, floor: float):
    """Complex normalised detuning delta = (probe - f_r) / f_r of each sample."""
    s = np.asarray(sample, dtype=complex)
    w = -s * np.exp(1j * (np.pi - params.theta)) / params.a
    gap = 1.0 - w
    if np.any(np.abs(gap) < floor):
        raise InversionError("sample sits at the off-resonant fixed point; inversion is singular")
    u = 2.0 * (params.q_loaded / params.q_external) * np.exp(1j * params.phi0) / gap
    return (u - 1.0) / (2j * params.q_loaded)


def _finish(value, resid):
    if not (np.all(np.isfinite(value)) and np.all(np.isfinite(resid))):
        raise InversionError("inversion produced a non-finite frequency")
    if np.ndim(value) == 0:
        return float(value), float(resid)
    return value, resid


def extract_frequency(sample, probe_f, params: ResonatorParams, floor: float = SINGULAR_FLOOR):
    """Invert the reflection model for the instantaneous resonance frequency.

    Works on scalars or arrays of samples. Returns ``(f_r_instant, residual)``
    where ``residual = |Im delta|`` is zero for samples on the model manifold.
    """
    delta = _invert(sample, params, floor)
    return _finish(np.asarray(probe_f, dtype=float) / (1.0 + delta.real), np.abs(delta.imag))


def extract_shift(sample, probe_f, params: ResonatorParams, floor: float = SINGULAR_FLOOR):
    """Like :func:`extract_frequency` but returns ``f_r_instant - probe_f``.

    The difference is formed from the normalised detuning directly, so small
    shifts keep full relative precision instead of losing it to the
    subtraction of two GHz numbers.
    """
    delta = _invert(sample, params, floor)
    d = delta.real
    return _finish(-np.asarray(probe_f, dtype=float) * d / (1.0 + d), np.abs(delta.imag))


def with_frequency(params: ResonatorParams, f_r: float) -> ResonatorParams:
    return replace(params, f_r=float(f_r))
