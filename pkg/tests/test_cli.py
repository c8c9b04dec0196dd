import numpy as np
import pytest

from tlsnoise import io
from tlsnoise.cli import build_parser, main
from tlsnoise.pipeline import RunManifest
from tlsnoise.resonator import ResonatorParams, s11_sweep

SMALL = "[bath]\nn_tls = 300\n[simulation]\nduration_s = 2000\n"


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "run.ini"
    p.write_text(SMALL, encoding="utf-8")
    return str(p)


def test_global_flags_before_or_after_subcommand():
    p = build_parser()
    a = p.parse_args(["--seed", "4", "pipeline"])
    b = p.parse_args(["pipeline", "--seed", "4", "--quiet-window", "1", "2"])
    assert a.seed == 4 and b.seed == 4 and b.quiet_window == [1.0, 2.0]


def test_pipeline_and_report(cfg_path, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["--config", cfg_path, "--seed", "2", "--out", str(out), "pipeline"]) == 0
    man = RunManifest.read(out)
    assert man.complete and man.seed == 2
    assert main(["report", str(out)]) == 0
    assert (out / "plots" / "psd_full.dat").is_file()
    assert "adev_fit.txt" in capsys.readouterr().out


def test_report_rejects_tampered_run(cfg_path, tmp_path, capsys):
    out = tmp_path / "out"
    main(["--config", cfg_path, "--out", str(out), "pipeline"])
    (out / "adev.csv").write_text("tampered\n")
    assert main(["report", str(out)]) == 1
    assert "checksum" in capsys.readouterr().err


def test_simulate_extract_analyze(cfg_path, tmp_path):
    sim = tmp_path / "sim"
    assert main(["simulate", "--config", cfg_path, "--out", str(sim), "--reflection"]) == 0
    ext = tmp_path / "ext"
    assert main(["extract", str(sim / "reflection.csv"), "--params", str(sim / "resonators.txt"),
                 "--out", str(ext)]) == 0
    a, _ = io.read_traces(sim / "traces.csv")
    b, _ = io.read_traces(ext / "traces.csv")
    assert np.max(np.abs(a.deviations - b.deviations)) < 1e-3
    ana = tmp_path / "ana"
    assert main(["analyze", str(sim / "traces.csv"), "--config", cfg_path, "--out", str(ana)]) == 0
    assert RunManifest.read(ana).complete


def test_fit_resonance(tmp_path, capsys):
    p = ResonatorParams(1.0, 0.3, 1e5, 2.5e5, 0.1, 2.39e9)
    io.write_sweep(tmp_path / "sweep.csv", s11_sweep(p, p.f_r + np.linspace(-5, 5, 201) * p.linewidth))
    assert main(["fit-resonance", str(tmp_path / "sweep.csv"), "--out", str(tmp_path)]) == 0
    fit = io.read_params(tmp_path / "sweep_fit.txt")
    assert fit.q_loaded == pytest.approx(1e5, rel=1e-6)
    assert "converged=true" in capsys.readouterr().out


def test_stage_failure_exit_code(tmp_path, capsys):
    cfg = tmp_path / "dead.ini"
    cfg.write_text("[bath]\nn_tls = 0\n[simulation]\nduration_s = 500\nnoise_floor_hz = 0\n")
    assert main(["--config", str(cfg), "--out", str(tmp_path / "o"), "pipeline"]) == 1
    assert "stage 'correlation' failed" in capsys.readouterr().err


def test_config_error_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[simulation]\ndt_s = 0\n")
    assert main(["--config", str(cfg), "pipeline"]) == 1
    assert "simulation.dt_s" in capsys.readouterr().err


def test_missing_input_exit_code(tmp_path, capsys):
    assert main(["analyze", str(tmp_path / "nope.csv")]) == 1
    assert "stage 'analyze' failed" in capsys.readouterr().err
