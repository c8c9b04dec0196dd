"""Power-law + Lorentzian noise models and their fits.

Spectral density (one-sided, Hz^2/Hz):

    S(f) = h_minus1 / f + h0 + 4 A^2 tau0 / (1 + (2 pi f tau0)^2)

Allan deviation terms (Hz):

    flicker     sqrt(2 ln2 h_minus1)
    white       sqrt(h0 / (2 tau))
    lorentzian  (A tau0 / tau) sqrt(4 e^{-x} - e^{-2x} + 2x - 3),  x = tau / tau0

The ADEV terms can be combined as written (``combine="sum"``) or as
independent variances (``combine="quadrature"``, the default). Only the
latter is the Allan deviation of a sum of independent processes.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares, nnls

FLICKER = "flicker"
WHITE = "white"
LORENTZIAN = "lorentzian"
COMPONENTS = (FLICKER, WHITE, LORENTZIAN)
# covariance / stderr coordinates
COORDS = ("h_minus1", "h0", "a_sq", "tau0")


@dataclass
class NoiseModelFit:
    h_minus1: float = 0.0
    h0: float = 0.0
    a: float = 0.0
    tau0: float = 1.0
    components: tuple = COMPONENTS
    residual: float = 0.0
    converged: bool = True
    covariance: np.ndarray | None = None
    stderr: dict = field(default_factory=dict)

    def __post_init__(self):
        self.components = tuple(c for c in COMPONENTS if c in self.components)
        if min(self.h_minus1, self.h0, self.a) < 0:
            raise ValueError("noise-model parameters must be non-negative")
        if LORENTZIAN in self.components and not self.tau0 > 0:
            raise ValueError("tau0 must be > 0 when the Lorentzian term is active")

    def active(self, name: str) -> bool:
        return name in self.components

    def report(self) -> dict:
        return {
            "h_minus1_hz2": self.h_minus1 if self.active(FLICKER) else 0.0,
            "h0_hz2_per_hz": self.h0 if self.active(WHITE) else 0.0,
            "a_hz": self.a if self.active(LORENTZIAN) else 0.0,
            "tau0_s": self.tau0 if self.active(LORENTZIAN) else 0.0,
            "residual": self.residual,
            "converged": self.converged,
        }


def psd_model(f, fit: NoiseModelFit):
    f = np.asarray(f, dtype=float)
    out = np.zeros_like(f)
    if fit.active(FLICKER):
        out = out + fit.h_minus1 / f
    if fit.active(WHITE):
        out = out + fit.h0
    if fit.active(LORENTZIAN):
        out = out + 4.0 * fit.a ** 2 * fit.tau0 / (1.0 + (2 * np.pi * f * fit.tau0) ** 2)
    return out[()] if out.ndim == 0 else out


def lorentzian_allan_factor(x):
    """(4e^{-x} - e^{-2x} + 2x - 3) / x^2, stable for small x."""
    x = np.asarray(x, dtype=float)
    small = x < 1e-3
    xs = np.where(small, 1.0, x)
    big = (4.0 * np.expm1(-xs) - np.expm1(-2.0 * xs) + 2.0 * xs) / xs ** 2
    series = (2.0 / 3.0) * x - 0.5 * x ** 2 + (7.0 / 30.0) * x ** 3
    return np.where(small, series, big)


def _adev_terms(tau, fit: NoiseModelFit):
    tau = np.asarray(tau, dtype=float)
    terms = []
    if fit.active(FLICKER):
        terms.append(np.full_like(tau, 2.0 * np.log(2.0) * fit.h_minus1))
    if fit.active(WHITE):
        terms.append(fit.h0 / (2.0 * tau))
    if fit.active(LORENTZIAN):
        terms.append(fit.a ** 2 * lorentzian_allan_factor(tau / fit.tau0))
    return tau, terms    # Allan variances of each term


def adev_model(tau, fit: NoiseModelFit, combine: str = "quadrature"):
    tau, terms = _adev_terms(tau, fit)
    if combine == "quadrature":
        out = np.sqrt(np.sum(terms, axis=0)) if terms else np.zeros_like(tau)
    elif combine == "sum":
        out = np.sum(np.sqrt(terms), axis=0) if terms else np.zeros_like(tau)
    else:
        raise ValueError(f"unknown combine mode {combine!r}")
    return out[()] if out.ndim == 0 else out


def _basis(kind: str, x, tau0: float, components):
    """Columns of the model that are linear in (h_minus1, h0, A^2)."""
    cols = []
    for c in components:
        if kind == "psd":
            if c == FLICKER:
                cols.append(1.0 / x)
            elif c == WHITE:
                cols.append(np.ones_like(x))
            else:
                cols.append(4.0 * tau0 / (1.0 + (2 * np.pi * x * tau0) ** 2))
        else:
            if c == FLICKER:
                cols.append(np.full_like(x, 2.0 * np.log(2.0)))
            elif c == WHITE:
                cols.append(1.0 / (2.0 * x))
            else:
                cols.append(lorentzian_allan_factor(x / tau0))
    return np.column_stack(cols)


def _fit(kind: str, x, y, components, combine: str = "quadrature", tau0_grid=None, weights=None) -> NoiseModelFit:
    components = tuple(c for c in COMPONENTS if c in components)
    if not components:
        raise ValueError("at least one noise component must be active")
    has_lor = LORENTZIAN in components
    n_lin = len(components)
    # psd: y is S; adev: y is sigma, the linear model is in sigma^2
    target = y if kind == "psd" else y ** 2

    def model_sigma_or_s(c, tau0):
        b = _basis(kind, x, tau0, components)
        if kind == "psd" or combine == "quadrature":
            return b @ c
        return (np.sqrt(b) @ np.sqrt(c)) ** 2

    def unpack(p):
        c = p[:n_lin]
        if combine == "sum" and kind == "adev":
            c = c ** 2     # fitted in sqrt coordinates
        tau0 = float(np.exp(p[n_lin])) if has_lor else 1.0
        return c, tau0

    logy = np.log(target)
    scale = 1.0 if kind == "psd" else 0.5    # adev residuals are in log sigma
    if weights is not None:
        scale = scale * np.asarray(weights, dtype=float)

    def resid(p):
        c, tau0 = unpack(p)
        m = model_sigma_or_s(c, tau0)
        return scale * (np.log(np.maximum(m, 1e-300)) - logy)

    if tau0_grid is None:
        span = (1.0 / (2 * np.pi * x.max()), 1.0 / (2 * np.pi * x.min())) if kind == "psd" else (x.min() / 3, x.max())
        tau0_grid = np.geomspace(span[0], span[1], 12) if has_lor else [1.0]

    best = None
    for t0 in tau0_grid:
        b = _basis(kind, x, t0, components)
        c0, _ = nnls(b / target[:, None], np.ones_like(target))
        c0 = np.maximum(c0, 1e-12 * np.max(np.abs(c0)) if np.any(c0 > 0) else 1e-12)
        if combine == "sum" and kind == "adev":
            c0 = np.sqrt(c0)
        p0 = np.concatenate([c0, [np.log(t0)] if has_lor else []])
        lower = np.concatenate([np.zeros(n_lin), [np.log(tau0_grid[0]) - 5] if has_lor else []])
        upper = np.concatenate([np.full(n_lin, np.inf), [np.log(tau0_grid[-1]) + 5] if has_lor else []])
        p0 = np.clip(p0, lower, upper)
        try:
            res = least_squares(resid, p0, bounds=(lower, upper), method="trf", x_scale="jac",
                                xtol=1e-12, ftol=1e-12, gtol=1e-12, max_nfev=2000)
        except ValueError:
            continue
        if best is None or res.cost < best.cost:
            best = res
    if best is None:
        return NoiseModelFit(components=components, residual=float("inf"), converged=False)

    c, tau0 = unpack(best.x)
    vals = dict(zip(components, c))
    dof = max(x.size - best.x.size, 1)
    s2 = 2.0 * best.cost / dof
    cov_p = np.linalg.pinv(best.jac.T @ best.jac) * s2
    # chain rule to (h_minus1, h0, a_sq, tau0)
    chain = np.zeros((4, best.x.size))
    for j, comp in enumerate(components):
        row = COMPONENTS.index(comp)
        chain[row, j] = 2.0 * np.sqrt(c[j]) if (combine == "sum" and kind == "adev") else 1.0
    if has_lor:
        chain[3, n_lin] = tau0
    cov = chain @ cov_p @ chain.T
    stderr = dict(zip(COORDS, np.sqrt(np.clip(np.diag(cov), 0, None))))
    return NoiseModelFit(
        h_minus1=float(vals.get(FLICKER, 0.0)),
        h0=float(vals.get(WHITE, 0.0)),
        a=float(np.sqrt(vals.get(LORENTZIAN, 0.0))),
        tau0=tau0,
        components=components,
        residual=float(np.sqrt(2.0 * best.cost)),
        converged=bool(best.status > 0),
        covariance=cov,
        stderr={k: float(v) for k, v in stderr.items()},
    )


def fit_noise_model(psd, components=COMPONENTS, f_range=None) -> NoiseModelFit:
    """Fit the spectral model to a Welch estimate by least squares in log S."""
    f, s = np.asarray(psd.freq, dtype=float), np.asarray(psd.psd, dtype=float)
    if not np.any(s > 0):
        raise ValueError("PSD is identically zero; nothing to fit")
    keep = (s > 0) & np.isfinite(s)
    if f_range is not None:
        keep &= (f >= f_range[0]) & (f <= f_range[1])
    if keep.sum() < 8:
        raise ValueError(f"only {int(keep.sum())} usable frequency points in the fit range; need 8")
    return _fit("psd", f[keep], s[keep], components)


def fit_adev_model(curve, components=COMPONENTS, combine: str = "quadrature", tau_range=None,
                   span: float | None = None) -> NoiseModelFit:
    """Fit the ADEV model to a measured curve by least squares in log sigma.

    With ``span`` (the trace duration, s) each point is weighted by the square
    root of its number of independent averages, sqrt(span / tau); otherwise
    weights are uniform.
    """
    tau, sig = np.asarray(curve.tau, dtype=float), np.asarray(curve.adev, dtype=float)
    if not np.any(sig > 0):
        raise ValueError("ADEV curve is identically zero; nothing to fit")
    keep = (sig > 0) & np.isfinite(sig)
    if tau_range is not None:
        keep &= (tau >= tau_range[0]) & (tau <= tau_range[1])
    if keep.sum() < 6:
        raise ValueError(f"only {int(keep.sum())} usable averaging times; need 6")
    w = None if span is None else np.sqrt(span / tau[keep])
    return _fit("adev", tau[keep], sig[keep], components, combine=combine, weights=w)


def fit_power_law(psd, f_range=None, weighting: str = "decade") -> tuple:
    """Free power law S = c f^alpha by linear regression in log-log; returns (c, alpha, stderr_alpha).

    Welch bins are evenly spaced in f, so an unweighted regression lets the top
    decade outvote everything below it. ``weighting="decade"`` (default) gives
    every point weight 1/f, i.e. equal total weight per decade;
    ``"uniform"`` weights all bins equally.
    """
    f, s = np.asarray(psd.freq, dtype=float), np.asarray(psd.psd, dtype=float)
    keep = s > 0
    if f_range is not None:
        keep &= (f >= f_range[0]) & (f <= f_range[1])
    if keep.sum() < 3:
        raise ValueError("too few points for a power-law fit")
    if weighting not in ("decade", "uniform"):
        raise ValueError(f"unknown weighting {weighting!r}")
    lx, ly = np.log(f[keep]), np.log(s[keep])
    w = 1.0 / np.sqrt(f[keep]) if weighting == "decade" else None     # polyfit weights multiply residuals
    coef, cov = np.polyfit(lx, ly, 1, w=w, cov=True)
    return float(np.exp(coef[1])), float(coef[0]), float(np.sqrt(cov[0, 0]))
