"""Plain-text file formats (UTF-8, LF line endings, %.17g numbers)."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .analysis.allan import AdevCurve
from .analysis.correlation import CorrelationMatrix, DetuningCurve
from .analysis.noisefit import NoiseModelFit
from .analysis.spectral import NoisePsd
from .bursts import BurstEvent
from .resonator import PARAM_NAMES, ComplexSweep, ResonatorParams
from .simulate import TimeTraceSet

FMT = "%.17g"


def _num(x) -> str:
    return FMT % x


def _write(path, text: str):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _rows(header: str, cols) -> str:
    arr = np.column_stack([np.asarray(c, dtype=float) for c in cols])
    lines = [header] + [",".join(FMT % v for v in row) for row in arr]
    return "\n".join(lines) + "\n"


def _read_numeric(path, n_header: int = 1) -> np.ndarray:
    rows = []
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip() and not ln.startswith("#")]
    for ln in lines[n_header:]:
        rows.append([float(v) for v in ln.split(",")])
    return np.array(rows, dtype=float)


# key=value reports -----------------------------------------------------------

def write_kv(path, values: dict):
    out = []
    for k, v in values.items():
        if isinstance(v, bool):
            out.append(f"{k}={'true' if v else 'false'}")
        elif isinstance(v, (int, np.integer)):
            out.append(f"{k}={int(v)}")
        elif isinstance(v, (float, np.floating)):
            out.append(f"{k}={_num(float(v))}")
        else:
            out.append(f"{k}={v}")
    _write(path, "\n".join(out) + "\n")


def read_kv(path) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def write_params(path, params: ResonatorParams):
    write_kv(path, params.to_dict())


def read_params(path) -> ResonatorParams:
    kv = read_kv(path)
    missing = [k for k in PARAM_NAMES if k not in kv]
    if missing:
        raise ValueError(f"{path}: missing keys {missing}")
    return ResonatorParams.from_dict({k: float(kv[k]) for k in PARAM_NAMES})


def write_fit_report(path, fit: NoiseModelFit):
    write_kv(path, fit.report())


def read_fit_report(path) -> NoiseModelFit:
    kv = read_kv(path)
    comps = []
    if float(kv["h_minus1_hz2"]) > 0:
        comps.append("flicker")
    if float(kv["h0_hz2_per_hz"]) > 0:
        comps.append("white")
    if float(kv["a_hz"]) > 0 and float(kv["tau0_s"]) > 0:
        comps.append("lorentzian")
    tau0 = float(kv["tau0_s"])
    return NoiseModelFit(float(kv["h_minus1_hz2"]), float(kv["h0_hz2_per_hz"]), float(kv["a_hz"]),
                         tau0 if tau0 > 0 else 1.0, tuple(comps), float(kv["residual"]),
                         kv["converged"] == "true")


# sweeps ------------------------------------------------------------------------

def write_sweep(path, sweep: ComplexSweep):
    _write(path, _rows("freq_hz,re,im", [sweep.freq, sweep.s11.real, sweep.s11.imag]))


def read_sweep(path) -> ComplexSweep:
    with open(path, encoding="utf-8") as fh:
        head = fh.readline().strip()
    if head != "freq_hz,re,im":
        raise ValueError(f"{path}: expected header 'freq_hz,re,im', got {head!r}")
    arr = _read_numeric(path)
    return ComplexSweep(arr[:, 0], arr[:, 1] + 1j * arr[:, 2])


# traces ------------------------------------------------------------------------

def write_traces(path, traces: TimeTraceSet, seed: int | None = None):
    head = [f"# dt_s={_num(traces.dt)}",
            "# mode_freq_hz=" + ",".join(_num(f) for f in traces.mode_frequencies)]
    if seed is not None:
        head.append(f"# seed={int(seed)}")
    cols = ["time_s"] + [f"mode_{k + 1:02d}" for k in range(traces.n_modes)]
    body = _rows(",".join(cols), [traces.times, *traces.deviations])
    _write(path, "\n".join(head) + "\n" + body)


def read_traces(path) -> tuple:
    """Returns ``(TimeTraceSet, seed or None)``."""
    meta = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            k, _, v = line[1:].strip().partition("=")
            meta[k.strip()] = v.strip()
    if "dt_s" not in meta or "mode_freq_hz" not in meta:
        raise ValueError(f"{path}: missing '# dt_s=' or '# mode_freq_hz=' header line")
    arr = _read_numeric(path)
    freqs = [float(v) for v in meta["mode_freq_hz"].split(",")]
    t0 = float(arr[0, 0]) if arr.size else 0.0
    seed = int(meta["seed"]) if "seed" in meta else None
    return TimeTraceSet(t0, float(meta["dt_s"]), freqs, arr[:, 1:].T.copy()), seed


def write_bursts(path, events):
    lines = ["onset_s,class,amplitude_hz,pivot,tau_s"]
    for e in events:
        lines.append(",".join([_num(e.onset), e.event_class, _num(e.amplitude), _num(e.pivot), _num(e.tau)]))
    _write(path, "\n".join(lines) + "\n")


def read_bursts(path) -> list:
    out = []
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    for line in lines[1:]:
        if not line.strip():
            continue
        t, cls, a, k0, tau = line.split(",")
        out.append(BurstEvent(float(t), cls, float(a), float(k0), float(tau)))
    return out


# analysis outputs ------------------------------------------------------------

def write_psd(path, psd: NoisePsd):
    _write(path, _rows("freq_hz,psd_hz2_per_hz", [psd.freq, psd.psd]))


def read_psd(path) -> NoisePsd:
    arr = _read_numeric(path)
    return NoisePsd(arr[:, 0], arr[:, 1], 0, 0.0, "")


def write_adev(path, curve: AdevCurve):
    _write(path, _rows("tau_s,adev_hz", [curve.tau, curve.adev]))


def read_adev(path) -> AdevCurve:
    arr = _read_numeric(path)
    return AdevCurve(arr[:, 0], arr[:, 1])


def write_correlation(path, cm: CorrelationMatrix):
    header = ",".join(_num(f) for f in cm.mode_frequencies)
    _write(path, _rows(header, cm.matrix.T))


def read_correlation(path) -> CorrelationMatrix:
    with open(path, encoding="utf-8") as fh:
        freqs = [float(v) for v in fh.readline().strip().split(",")]
    return CorrelationMatrix(np.atleast_2d(_read_numeric(path)), np.array(freqs))


def write_detuning(path, curve: DetuningCurve):
    _write(path, _rows("detuning_hz,correlation,pairs", [curve.detuning, curve.correlation, curve.counts]))


def read_detuning(path) -> DetuningCurve:
    arr = np.atleast_2d(_read_numeric(path))
    return DetuningCurve(arr[:, 0], arr[:, 1], arr[:, 2].astype(int))


def write_detections(path, bursts, n_modes: int):
    cols = ["onset_index", "onset_s", "tau_s"] + [f"peak_mode_{k + 1:02d}" for k in range(n_modes)]
    lines = [",".join(cols)]
    for b in bursts:
        lines.append(",".join([str(b.onset_index), _num(b.onset_time), _num(b.tau)] +
                              [_num(v) for v in b.peak_deviations]))
    _write(path, "\n".join(lines) + "\n")


# raw reflection series ---------------------------------------------------------

def write_reflection(path, s11: np.ndarray, dt: float, t0: float = 0.0, seed: int | None = None):
    s11 = np.atleast_2d(s11)
    head = [f"# dt_s={_num(dt)}"]
    if seed is not None:
        head.append(f"# seed={int(seed)}")
    cols = ["time_s"]
    for k in range(s11.shape[0]):
        cols += [f"mode_{k + 1:02d}_re", f"mode_{k + 1:02d}_im"]
    parts = [t0 + dt * np.arange(s11.shape[1])]
    for row in s11:
        parts += [row.real, row.imag]
    _write(path, "\n".join(head) + "\n" + _rows(",".join(cols), parts))


def read_reflection(path) -> tuple:
    """Returns ``(s11 array (n_modes, n), dt, t0)``."""
    dt = None
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            k, _, v = line[1:].strip().partition("=")
            if k.strip() == "dt_s":
                dt = float(v)
    if dt is None:
        raise ValueError(f"{path}: missing '# dt_s=' header line")
    arr = _read_numeric(path)
    vals = arr[:, 1:]
    if vals.shape[1] % 2:
        raise ValueError(f"{path}: expected re/im column pairs after time_s")
    s11 = (vals[:, 0::2] + 1j * vals[:, 1::2]).T.copy()
    return s11, dt, float(arr[0, 0]) if arr.size else 0.0


def write_param_table(path, params):
    out = {}
    for k, p in enumerate(params, 1):
        for key, v in p.to_dict().items():
            out[f"mode_{k:02d}.{key}"] = v
    write_kv(path, out)


def read_param_table(path) -> list:
    """Per-mode parameters from ``mode_NN.key=value`` lines; a plain single-mode file also works."""
    kv = read_kv(path)
    if all(k in kv for k in PARAM_NAMES):
        return [read_params(path)]
    modes = {}
    for key, v in kv.items():
        mode, _, name = key.partition(".")
        if not mode.startswith("mode_") or name not in PARAM_NAMES:
            raise ValueError(f"{path}: unexpected key {key!r}")
        modes.setdefault(int(mode[5:]), {})[name] = float(v)
    out = []
    for k in sorted(modes):
        missing = [n for n in PARAM_NAMES if n not in modes[k]]
        if missing:
            raise ValueError(f"{path}: mode {k} lacks {missing}")
        out.append(ResonatorParams.from_dict(modes[k]))
    return out
