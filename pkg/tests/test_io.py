import numpy as np
import pytest

from tlsnoise import io
from tlsnoise.analysis.allan import AdevCurve
from tlsnoise.analysis.correlation import CorrelationMatrix, DetuningCurve
from tlsnoise.analysis.detect import DetectedBurst
from tlsnoise.analysis.noisefit import FLICKER, LORENTZIAN, NoiseModelFit
from tlsnoise.analysis.spectral import NoisePsd
from tlsnoise.bursts import ANTISYMMETRIC, UNIFORM, BurstEvent
from tlsnoise.resonator import ResonatorParams, s11_sweep
from tlsnoise.simulate import TimeTraceSet

P = ResonatorParams(1.1, 0.3, 8e4, 2e5, 0.2, 2.39e9 + 0.1)


def test_kv_round_trip(tmp_path):
    io.write_kv(tmp_path / "a.txt", {"x": 0.1, "n": 3, "ok": True, "name": "hann"})
    assert io.read_kv(tmp_path / "a.txt") == {"x": "0.10000000000000001", "n": "3", "ok": "true", "name": "hann"}


def test_kv_rejects_garbage(tmp_path):
    (tmp_path / "b.txt").write_text("x=1\nnonsense\n")
    with pytest.raises(ValueError, match=":2"):
        io.read_kv(tmp_path / "b.txt")


def test_params_round_trip_is_exact(tmp_path):
    io.write_params(tmp_path / "p.txt", P)
    assert io.read_params(tmp_path / "p.txt") == P


def test_param_table(tmp_path):
    q = ResonatorParams(0.9, -1.0, 1e5, 3e5, 0.0, 2.38e9)
    io.write_param_table(tmp_path / "t.txt", [P, q])
    assert io.read_param_table(tmp_path / "t.txt") == [P, q]
    io.write_params(tmp_path / "single.txt", P)
    assert io.read_param_table(tmp_path / "single.txt") == [P]


def test_fit_report_round_trip(tmp_path):
    fit = NoiseModelFit(145.0, 0.0, 53.12, 1.22, (FLICKER, LORENTZIAN), residual=0.5, converged=True)
    io.write_fit_report(tmp_path / "f.txt", fit)
    kv = io.read_kv(tmp_path / "f.txt")
    assert set(kv) == {"h_minus1_hz2", "h0_hz2_per_hz", "a_hz", "tau0_s", "residual", "converged"}
    back = io.read_fit_report(tmp_path / "f.txt")
    assert (back.h_minus1, back.a, back.tau0, back.components) == (145.0, 53.12, 1.22, (FLICKER, LORENTZIAN))


def test_sweep_round_trip(tmp_path):
    sw = s11_sweep(P, P.f_r + np.linspace(-1e5, 1e5, 11))
    io.write_sweep(tmp_path / "s.csv", sw)
    back = io.read_sweep(tmp_path / "s.csv")
    assert np.array_equal(back.freq, sw.freq) and np.array_equal(back.s11, sw.s11)
    (tmp_path / "bad.csv").write_text("f,re,im\n1,2,3\n")
    with pytest.raises(ValueError, match="header"):
        io.read_sweep(tmp_path / "bad.csv")


def test_trace_file_format(tmp_path):
    dev = np.random.default_rng(0).standard_normal((3, 5)) * 1e3
    tr = TimeTraceSet(10.0, 0.5, [2.37e9, 2.372e9, 2.374e9], dev)
    io.write_traces(tmp_path / "t.csv", tr, seed=42)
    raw = (tmp_path / "t.csv").read_bytes()
    assert b"\r" not in raw
    lines = raw.decode("utf-8").splitlines()
    assert lines[0] == "# dt_s=0.5"
    assert lines[1].startswith("# mode_freq_hz=2370000000,")
    assert lines[2] == "# seed=42"
    assert lines[3] == "time_s,mode_01,mode_02,mode_03"
    back, seed = io.read_traces(tmp_path / "t.csv")
    assert seed == 42 and back.t0 == 10.0 and back.dt == 0.5
    assert np.array_equal(back.deviations, dev)
    assert np.array_equal(back.mode_frequencies, tr.mode_frequencies)


def test_trace_file_needs_header(tmp_path):
    (tmp_path / "t.csv").write_text("time_s,mode_01\n0,1\n")
    with pytest.raises(ValueError, match="dt_s"):
        io.read_traces(tmp_path / "t.csv")


def test_burst_schedule_round_trip(tmp_path):
    evs = [BurstEvent(12.5, UNIFORM, 1e4, float("nan"), 1.5), BurstEvent(99.0, ANTISYMMETRIC, 3e3, 9.5, 2.2)]
    io.write_bursts(tmp_path / "b.csv", evs)
    assert (tmp_path / "b.csv").read_text().splitlines()[0] == "onset_s,class,amplitude_hz,pivot,tau_s"
    back = io.read_bursts(tmp_path / "b.csv")
    assert back[1] == evs[1]
    assert back[0].onset == 12.5 and np.isnan(back[0].pivot)


def test_analysis_outputs_round_trip(tmp_path):
    psd = NoisePsd(np.array([0.1, 0.2]), np.array([3.0, 1.0 / 3]), 4, 0.5, "hann")
    io.write_psd(tmp_path / "p.csv", psd)
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "freq_hz,psd_hz2_per_hz"
    assert np.array_equal(io.read_psd(tmp_path / "p.csv").psd, psd.psd)

    curve = AdevCurve(np.array([0.5, 1.0, 2.0]), np.array([3.0, 2.0, 1.0 / 7]))
    io.write_adev(tmp_path / "a.csv", curve)
    assert (tmp_path / "a.csv").read_text().splitlines()[0] == "tau_s,adev_hz"
    assert np.array_equal(io.read_adev(tmp_path / "a.csv").adev, curve.adev)

    m = np.array([[1.0, 0.1 / 3], [0.1 / 3, 1.0]])
    cm = CorrelationMatrix(m, np.array([2.37e9, 2.372e9]))
    io.write_correlation(tmp_path / "c.csv", cm)
    assert (tmp_path / "c.csv").read_text().splitlines()[0] == "2370000000,2372000000"
    back = io.read_correlation(tmp_path / "c.csv")
    assert np.array_equal(back.matrix, m) and np.array_equal(back.mode_frequencies, cm.mode_frequencies)

    dc = DetuningCurve(np.array([2e6, 4e6]), np.array([0.5, -0.1]), np.array([13, 12]))
    io.write_detuning(tmp_path / "d.csv", dc)
    back = io.read_detuning(tmp_path / "d.csv")
    assert np.array_equal(back.correlation, dc.correlation) and back.counts.tolist() == [13, 12]


def test_detections_file(tmp_path):
    io.write_detections(tmp_path / "d.csv", [DetectedBurst(10, np.array([1.0, -2.0]), 1.5, 5.0)], 2)
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert lines == ["onset_index,onset_s,tau_s,peak_mode_01,peak_mode_02", "10,5,1.5,1,-2"]


def test_reflection_round_trip(tmp_path):
    s11 = np.array([[0.1 + 0.2j, -0.3j], [1.0, 0.5 - 0.5j]])
    io.write_reflection(tmp_path / "r.csv", s11, 0.5, t0=2.0, seed=1)
    back, dt, t0 = io.read_reflection(tmp_path / "r.csv")
    assert np.array_equal(back, s11) and dt == 0.5 and t0 == 2.0
