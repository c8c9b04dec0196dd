"""gnuplot data files and scripts for the standard figures of a run.

Nothing is rendered here. Each figure becomes whitespace-separated data plus a
short ``.gp`` script that plots it.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from . import io
from .analysis.noisefit import adev_model, psd_model

FIGURES = ("traces", "correlation", "detuning", "psd", "adev")
FMT = io.FMT


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def _table(header: str, cols) -> str:
    arr = np.column_stack([np.asarray(c, dtype=float) for c in cols])
    return f"# {header}\n" + "".join(" ".join(FMT % v for v in row) + "\n" for row in arr)


def waterfall(traces, spacing: float) -> str:
    """One gnuplot data block per mode: time and deviation + k * spacing (k from 0)."""
    blocks = []
    for k in range(traces.n_modes):
        blocks.append(_table(f"mode {k + 1} offset {FMT % (k * spacing)}",
                             [traces.times, traces.deviations[k] + k * spacing]))
    return "\n\n".join(blocks)


def heatmap(cm) -> str:
    """Three-column grid (row, column, C) with a blank line after each row, 1-based indices."""
    n = cm.matrix.shape[0]
    lines = ["# i j C_ij"]
    for i in range(n):
        lines += [f"{i + 1} {j + 1} {FMT % cm.matrix[i, j]}" for j in range(n)]
        lines.append("")
    return "\n".join(lines) + "\n"


def _figure_traces(man, out):
    traces, _ = io.read_traces(man.path("traces.csv"))
    spacing = float(man.config.get("output", {}).get("waterfall_spacing_hz", 500.0))
    dat = _write(out / "traces.dat", waterfall(traces, spacing))
    gp = (f"set xlabel 'time (s)'\nset ylabel 'frequency deviation + offset (Hz)'\nunset key\n"
          f"plot for [k=0:{traces.n_modes - 1}] '{dat.name}' index k using 1:2 with lines\n")
    return [dat, _write(out / "traces.gp", gp)]


def _figure_correlation(man, out):
    files = []
    for tag in ("full", "quiet"):
        name = f"correlation_{tag}.csv"
        if name not in man.artifacts:
            continue
        cm = io.read_correlation(man.path(name))
        dat = _write(out / f"correlation_{tag}.dat", heatmap(cm))
        gp = (f"set view map\nset xlabel 'mode'\nset ylabel 'mode'\nset cbrange [-1:1]\n"
              f"splot '{dat.name}' using 1:2:3 with image\n")
        files += [dat, _write(out / f"correlation_{tag}.gp", gp)]
    if not files:
        raise FileNotFoundError("no correlation matrix in the manifest")
    return files


def _figure_detuning(man, out):
    files, plots = [], []
    for tag in ("full", "quiet"):
        name = f"detuning_{tag}.csv"
        if name not in man.artifacts:
            continue
        c = io.read_detuning(man.path(name))
        dat = _write(out / f"detuning_{tag}.dat", _table("detuning_hz correlation pairs",
                                                           [c.detuning, c.correlation, c.counts]))
        files.append(dat)
        plots.append(f"'{dat.name}' using ($1/1e6):2 with linespoints title '{tag}'")
    if not files:
        raise FileNotFoundError("no detuning curve in the manifest")
    gp = "set xlabel 'detuning (MHz)'\nset ylabel 'correlation'\nplot " + ", ".join(plots) + "\n"
    return files + [_write(out / "detuning.gp", gp)]


def _figure_psd(man, out):
    files = []
    for tag in ("full", "quiet"):
        name = f"psd_{tag}.csv"
        if name not in man.artifacts:
            continue
        psd = io.read_psd(man.path(name))
        fit = io.read_fit_report(man.path(f"psd_fit_{tag}.txt"))
        dat = _write(out / f"psd_{tag}.dat", _table("freq_hz measured model",
                                                     [psd.freq, psd.psd, psd_model(psd.freq, fit)]))
        gp = (f"set logscale xy\nset xlabel 'frequency (Hz)'\nset ylabel 'S_f (Hz^2/Hz)'\n"
              f"plot '{dat.name}' using 1:2 with lines title 'measured', "
              f"'' using 1:3 with lines title 'model'\n")
        files += [dat, _write(out / f"psd_{tag}.gp", gp)]
    if not files:
        raise FileNotFoundError("no PSD in the manifest")
    return files


def _figure_adev(man, out):
    curve = io.read_adev(man.path("adev.csv"))
    fit = io.read_fit_report(man.path("adev_fit.txt"))
    combine = man.config.get("analysis", {}).get("adev_combine", "quadrature")
    dat = _write(out / "adev.dat", _table("tau_s measured model",
                                          [curve.tau, curve.adev, adev_model(curve.tau, fit, combine)]))
    gp = (f"set logscale xy\nset xlabel 'tau (s)'\nset ylabel 'ADEV (Hz)'\n"
          f"plot '{dat.name}' using 1:2 with points title 'measured', '' using 1:3 with lines title 'model'\n")
    return [dat, _write(out / "adev.gp", gp)]


_BUILDERS = {"traces": _figure_traces, "correlation": _figure_correlation, "detuning": _figure_detuning,
             "psd": _figure_psd, "adev": _figure_adev}


def emit_plot_data(manifest, figure: str = "all", out=None) -> list:
    """Write plot data for ``figure`` (one of FIGURES, or ``"all"``); returns the files written."""
    if figure != "all" and figure not in _BUILDERS:
        raise ValueError(f"unknown figure {figure!r}; expected one of {FIGURES} or 'all'")
    out = Path(out) if out is not None else Path(manifest.directory) / "plots"
    names = FIGURES if figure == "all" else (figure,)
    files = []
    for name in names:
        files += _BUILDERS[name](manifest, out)
    return files
