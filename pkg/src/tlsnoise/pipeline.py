"""End-to-end run: simulate, extract, analyze, write artifacts and a manifest."""
from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import io
from . import rng as rngs
from .analysis.allan import allan_deviation, default_taus
from .analysis.correlation import correlation_matrix, correlation_vs_detuning
from .analysis.detect import detect_bursts, quiet_window
from .analysis.noisefit import fit_adev_model, fit_noise_model
from .analysis.spectral import default_segment_length, welch_psd
from .bath import sample_ensemble
from .bursts import sample_burst_schedule
from .config import RunConfig
from .simulate import (TimeTraceSet, default_resonators, extract_traces, render_s11_traces,
                       simulate_trace_set)

MANIFEST_NAME = "manifest.json"


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class RunManifest:
    config: dict
    seed: int
    mode_frequencies: list
    artifacts: dict = field(default_factory=dict)     # relative path -> sha256 hex
    version: str = __version__
    wall_clock_s: float = 0.0
    complete: bool = False
    failed_stage: str | None = None
    error: str | None = None
    quiet_window_s: list | None = None
    directory: str = "."

    def to_json(self) -> str:
        d = {k: v for k, v in self.__dict__.items() if k != "directory"}
        return json.dumps(d, indent=2, sort_keys=True) + "\n"

    def write(self, directory=None) -> Path:
        path = Path(directory or self.directory) / MANIFEST_NAME
        path.write_text(self.to_json(), encoding="utf-8")
        return path

    @classmethod
    def read(cls, path) -> "RunManifest":
        path = Path(path)
        if path.is_dir():
            path = path / MANIFEST_NAME
        d = json.loads(path.read_text(encoding="utf-8"))
        return cls(directory=str(path.parent), **d)

    def path(self, name: str) -> Path:
        if name not in self.artifacts:
            raise FileNotFoundError(f"artifact {name!r} is not listed in the manifest")
        p = Path(self.directory) / name
        if not p.is_file():
            raise FileNotFoundError(f"artifact {name!r} is listed but missing from {self.directory}")
        return p

    def verify(self) -> list:
        """Names whose current checksum differs from the recorded one (or that vanished)."""
        bad = []
        for name, digest in self.artifacts.items():
            p = Path(self.directory) / name
            if not p.is_file() or sha256_file(p) != digest:
                bad.append(name)
        return bad


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class _Run:
    """Tracks the current stage and records every written artifact."""

    def __init__(self, out: Path, manifest: RunManifest):
        self.out = out
        self.manifest = manifest
        self.stage = "setup"

    def write(self, name: str, writer, *args, **kw):
        path = self.out / name
        writer(path, *args, **kw)
        self.manifest.artifacts[name] = sha256_file(path)
        return path


def _stage(run: _Run, name: str):
    run.stage = name


def simulate_stage(cfg: RunConfig, seed: int) -> tuple:
    """Returns ``(traces, injected bursts, resonators or None, extraction residuals or None)``."""
    sim = cfg.simulation
    bath = cfg.with_seed(seed).bath
    events = sample_burst_schedule(sim.burst_rate_hz, sim.duration_s, rngs.stream(seed, rngs.BURSTS),
                                   antisymmetric_fraction=sim.antisymmetric_fraction,
                                   amplitude_range=sim.burst_amplitude_hz, pivot_range=sim.burst_pivot,
                                   tau_range=sim.burst_tau_s)
    ensemble = sample_ensemble(bath)
    traces = simulate_trace_set(bath, sim.duration_s, sim.dt_s, bursts=events, noise_floor=sim.noise_floor_hz,
                                workers=sim.workers, sample_cap=sim.sample_cap, ensemble=ensemble)
    if not cfg.resonator.raw_reflection:
        return traces, events, None, None
    params = resonators_for(cfg)
    s11 = render_s11_traces(traces, params)
    if cfg.resonator.probe_noise > 0:
        for k in range(s11.shape[0]):
            g = rngs.stream(seed, rngs.PROBE, k)
            s11[k] += cfg.resonator.probe_noise * (g.standard_normal(s11.shape[1]) +
                                                   1j * g.standard_normal(s11.shape[1]))
    extracted, resid = extract_traces(s11, params, traces.dt, traces.t0, traces.mode_frequencies)
    return extracted, events, params, resid


def resonators_for(cfg: RunConfig) -> list:
    res = cfg.resonator
    if not res.generate_defaults:
        return list(res.modes)
    return default_resonators(cfg.bath.mode_frequencies, res.linewidth_range_hz, res.a, res.theta_rad,
                              res.phi0_rad, res.coupling_ratio)


def select_quiet_window(cfg: RunConfig, n: int, dt: float, bursts, override=None, t0: float = 0.0):
    """Sample range of the quiet window, or None when disabled.

    Manual windows (config or ``override``) are given in seconds on the trace
    time axis.
    """
    an = cfg.analysis
    if override is not None:
        start, stop = override
    elif an.quiet_window == "manual":
        start, stop = an.quiet_start_s, an.quiet_stop_s
    elif an.quiet_window == "auto":
        return quiet_window(n, dt, bursts, an.quiet_margin_s)
    else:
        return None
    lo, hi = int(round((start - t0) / dt)), int(round((stop - t0) / dt))
    lo, hi = max(lo, 0), min(hi, n)
    if hi - lo < 2:
        raise ValueError(f"quiet window [{start}, {stop}] s holds fewer than 2 samples")
    return lo, hi


def _psd(cfg: RunConfig, trace, dt):
    an = cfg.analysis
    seg = an.welch_segment or default_segment_length(trace.size)
    if seg > trace.size:
        seg = default_segment_length(trace.size)
    return welch_psd(trace, dt, segment_length=seg, overlap=an.welch_overlap, window=an.welch_window)


def analyze_traces(run: _Run, cfg: RunConfig, traces: TimeTraceSet, quiet_override=None):
    """Analysis stages shared by ``pipeline`` and ``analyze``; writes into ``run``."""
    an = cfg.analysis
    dt, n = traces.dt, traces.n_samples
    k = an.psd_mode - 1
    if not 0 <= k < traces.n_modes:
        raise StageError("setup", ValueError(f"analysis.psd_mode={an.psd_mode} but the traces hold "
                                             f"{traces.n_modes} modes"))

    _stage(run, "detect")
    detected = detect_bursts(traces, threshold=an.burst_threshold, min_separation=an.burst_min_separation_s)
    run.write("bursts_detected.csv", io.write_detections, detected, traces.n_modes)
    window = select_quiet_window(cfg, n, dt, detected, quiet_override, traces.t0)
    if window is not None:
        run.manifest.quiet_window_s = [traces.t0 + window[0] * dt, traces.t0 + window[1] * dt]
        quiet = traces.window(*window)

    _stage(run, "psd")
    psd_full = _psd(cfg, traces.deviations[k], dt)
    run.write("psd_full.csv", io.write_psd, psd_full)
    if window is not None:
        psd_quiet = _psd(cfg, quiet.deviations[k], dt)
        run.write("psd_quiet.csv", io.write_psd, psd_quiet)

    _stage(run, "adev")
    curve = allan_deviation(traces.deviations[k], dt, default_taus(n, dt, an.adev_per_decade))
    run.write("adev.csv", io.write_adev, curve)

    _stage(run, "correlation")
    cm_full = correlation_matrix(traces)
    run.write("correlation_full.csv", io.write_correlation, cm_full)
    if window is not None:
        cm_quiet = correlation_matrix(quiet)
        run.write("correlation_quiet.csv", io.write_correlation, cm_quiet)

    _stage(run, "detuning")
    run.write("detuning_full.csv", io.write_detuning, correlation_vs_detuning(cm_full, an.correlation_bin_hz))
    if window is not None:
        run.write("detuning_quiet.csv", io.write_detuning, correlation_vs_detuning(cm_quiet, an.correlation_bin_hz))

    _stage(run, "psd_fit")
    fr = tuple(an.psd_fit_range_hz) or None
    run.write("psd_fit_full.txt", io.write_fit_report, fit_noise_model(psd_full, an.noise_components, fr))
    if window is not None:
        run.write("psd_fit_quiet.txt", io.write_fit_report, fit_noise_model(psd_quiet, an.noise_components, fr))

    _stage(run, "adev_fit")
    fit = fit_adev_model(curve, an.noise_components, combine=an.adev_combine, span=n * dt)
    run.write("adev_fit.txt", io.write_fit_report, fit)


def _execute(cfg: RunConfig, seed: int, out, body, mode_frequencies) -> RunManifest:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(config=cfg.with_seed(seed).snapshot(), seed=int(seed),
                           mode_frequencies=[float(f) for f in mode_frequencies], directory=str(out))
    run = _Run(out, manifest)
    t0 = time.perf_counter()
    try:
        body(run)
        manifest.complete = True
    except Exception as exc:
        err = exc if isinstance(exc, StageError) else StageError(run.stage, exc)
        manifest.failed_stage = err.stage
        manifest.error = str(err.cause)
        raise err from exc
    finally:
        manifest.wall_clock_s = time.perf_counter() - t0
        manifest.write()
    return manifest


def run_pipeline(cfg: RunConfig, seed: int | None = None, out=None, quiet_override=None) -> RunManifest:
    """Simulate and analyze; every artifact lands in ``out`` with a manifest.

    A failing stage raises :class:`StageError`; whatever was written before
    stays on disk and the manifest records ``complete = false`` and the stage.
    """
    seed = cfg.bath.master_seed if seed is None else int(seed)
    out = Path(cfg.output.directory if out is None else out)

    def body(run):
        _stage(run, "simulate")
        traces, events, params, resid = simulate_stage(cfg, seed)
        run.write("traces.csv", io.write_traces, traces, seed)
        run.write("bursts_injected.csv", io.write_bursts, events)
        if params is not None:
            run.write("resonators.txt", io.write_param_table, params)
            run.write("extraction.txt", io.write_kv, {"max_consistency_residual": float(np.max(resid, initial=0.0))})
        analyze_traces(run, cfg, traces, quiet_override)

    return _execute(cfg, seed, out, body, cfg.bath.mode_frequencies)


def run_analysis(cfg: RunConfig, traces: TimeTraceSet, seed: int = 0, out=None, quiet_override=None) -> RunManifest:
    """Analysis stages on an existing trace set (e.g. loaded from CSV)."""
    out = Path(cfg.output.directory if out is None else out)
    return _execute(cfg, seed, out, lambda run: analyze_traces(run, cfg, traces, quiet_override),
                    traces.mode_frequencies)

