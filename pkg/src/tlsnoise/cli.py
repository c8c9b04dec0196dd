"""Command-line entry point (``tlsnoise``)."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__, io
from .config import ConfigError, RunConfig, load_config
from .pipeline import RunManifest, StageError, resonators_for, run_analysis, run_pipeline, simulate_stage
from .plotdata import FIGURES, emit_plot_data
from .resonator import fit_resonance
from .simulate import extract_traces, render_s11_traces


def _global_flags(p: argparse.ArgumentParser, suppress: bool):
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", metavar="PATH", default=d, help="run configuration file")
    p.add_argument("--seed", type=int, metavar="INT", default=d, help="master seed (overrides the config)")
    p.add_argument("--out", metavar="DIR", default=d, help="output directory (overrides the config)")
    p.add_argument("--quiet-window", nargs=2, type=float, metavar=("START", "END"), default=d,
                   help="quiet window in seconds (overrides the config)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tlsnoise", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        _global_flags(p, suppress=True)
        return p

    p = add("simulate", "simulate multimode deviation traces")
    p.add_argument("--reflection", action="store_true", help="also write the raw reflection series")

    p = add("fit-resonance", "fit the reflection model to a sweep CSV")
    p.add_argument("sweep", help="CSV with header freq_hz,re,im")
    p.add_argument("--guess", metavar="PARAMS", help="key=value file with a starting point")

    p = add("extract", "invert a reflection series into deviation traces")
    p.add_argument("reflection", help="CSV written by 'simulate --reflection'")
    p.add_argument("--params", required=True, metavar="PARAMS", help="per-mode parameter table (resonators.txt)")

    p = add("analyze", "run the analysis stages on a trace CSV")
    p.add_argument("traces", help="trace CSV")

    p = add("report", "write gnuplot data and scripts for a finished run")
    p.add_argument("run_dir", nargs="?", help="directory holding manifest.json (default: --out)")
    p.add_argument("--figure", default="all", choices=FIGURES + ("all",))

    add("pipeline", "simulate, analyze and write every artifact with a manifest")
    return parser


def _config(args) -> RunConfig:
    return load_config(args.config) if args.config else RunConfig().validate()


def _out(args, cfg: RunConfig) -> Path:
    return Path(args.out if args.out else cfg.output.directory)


def _seed(args, cfg: RunConfig) -> int:
    return cfg.bath.master_seed if args.seed is None else args.seed


def _say(msg: str):
    print(msg, flush=True)


def cmd_simulate(args):
    cfg = _config(args)
    seed, out = _seed(args, cfg), _out(args, cfg)
    traces, events, _, _ = simulate_stage(cfg, seed)
    io.write_traces(out / "traces.csv", traces, seed)
    io.write_bursts(out / "bursts_injected.csv", events)
    _say(f"wrote {out / 'traces.csv'} ({traces.n_modes} modes x {traces.n_samples} samples)")
    if args.reflection:
        params = resonators_for(cfg)
        io.write_reflection(out / "reflection.csv", render_s11_traces(traces, params), traces.dt, traces.t0, seed)
        io.write_param_table(out / "resonators.txt", params)
        _say(f"wrote {out / 'reflection.csv'} and {out / 'resonators.txt'}")


def cmd_fit_resonance(args):
    sweep = io.read_sweep(args.sweep)
    guess = io.read_params(args.guess) if args.guess else None
    res = fit_resonance(sweep, guess)
    report = dict(res.params.to_dict())
    report.update({"residual_norm": res.residual_norm, "converged": res.converged, "iterations": res.iterations})
    report.update({f"stderr_{k}": v for k, v in res.stderr.items()})
    if args.out:
        path = Path(args.out) / (Path(args.sweep).stem + "_fit.txt")
        io.write_kv(path, report)
        _say(f"wrote {path}")
    for k, v in report.items():
        _say(f"{k}={str(v).lower() if isinstance(v, bool) else v}")
    if not res.converged:
        raise StageError("fit-resonance", RuntimeError(res.message))


def cmd_extract(args):
    s11, dt, t0 = io.read_reflection(args.reflection)
    params = io.read_param_table(args.params)
    if len(params) != s11.shape[0]:
        raise ValueError(f"{len(params)} parameter sets for {s11.shape[0]} reflection series")
    traces, resid = extract_traces(s11, params, dt, t0)
    out = Path(args.out or ".")
    io.write_traces(out / "traces.csv", traces, args.seed)
    _say(f"wrote {out / 'traces.csv'}; max consistency residual {float(np.max(resid, initial=0.0)):.3g}")


def cmd_analyze(args):
    cfg = _config(args)
    traces, seed = io.read_traces(args.traces)
    seed = args.seed if args.seed is not None else (seed if seed is not None else cfg.bath.master_seed)
    man = run_analysis(cfg, traces, seed, _out(args, cfg), _override(args))
    _say(f"analysis complete: {len(man.artifacts)} artifacts in {man.directory}")


def cmd_report(args):
    run_dir = args.run_dir or args.out
    if run_dir is None:
        raise ValueError("report needs a run directory (positional or --out)")
    man = RunManifest.read(run_dir)
    bad = man.verify()
    if bad:
        raise ValueError(f"checksum mismatch for {bad}")
    for name in ("psd_fit_full.txt", "psd_fit_quiet.txt", "adev_fit.txt"):
        if name in man.artifacts:
            _say(f"{name}: " + ", ".join(f"{k}={v}" for k, v in io.read_kv(man.path(name)).items()))
    files = emit_plot_data(man, args.figure)
    _say(f"wrote {len(files)} plot files under {Path(man.directory) / 'plots'}")


def cmd_pipeline(args):
    cfg = _config(args)
    man = run_pipeline(cfg, _seed(args, cfg), _out(args, cfg), _override(args))
    _say(f"pipeline complete: {len(man.artifacts)} artifacts in {man.directory} "
         f"({len(man.mode_frequencies)} modes, seed {man.seed})")


def _override(args):
    return tuple(args.quiet_window) if args.quiet_window else None


COMMANDS = {"simulate": cmd_simulate, "fit-resonance": cmd_fit_resonance, "extract": cmd_extract,
            "analyze": cmd_analyze, "report": cmd_report, "pipeline": cmd_pipeline}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except StageError as exc:
        print(f"tlsnoise: error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"tlsnoise: error: stage 'config' failed: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"tlsnoise: error: stage '{args.command}' failed: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
