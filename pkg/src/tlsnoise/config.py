"""Run configuration: ``[section]`` headers with ``key = value`` lines.

Parsing is strict. Unknown sections or keys, duplicates and malformed values
raise :class:`ConfigError` naming ``section.key`` and the line number.
Sections that are absent take their defaults.
"""
from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .analysis.noisefit import COMPONENTS
from .bath import DEFAULT_MODES, BathConfig
from .resonator import ResonatorParams
from .simulate import DEFAULT_SAMPLE_CAP

QUIET_MODES = ("auto", "manual", "none")


class ConfigError(ValueError):
    pass


@dataclass
class ResonatorSection:
    generate_defaults: bool = True
    linewidth_range_hz: tuple = (18e3, 32e3)
    a: float = 1.0
    theta_rad: float = 0.3
    phi0_rad: float = 0.05
    coupling_ratio: float = 2.5
    raw_reflection: bool = False
    probe_noise: float = 0.0
    # explicit per-mode parameter sets, used when generate_defaults is false
    modes: tuple = ()


@dataclass
class SimulationSection:
    duration_s: float = 2.6e4
    dt_s: float = 0.5
    noise_floor_hz: float = 5.0
    burst_rate_hz: float = 0.0
    antisymmetric_fraction: float = 0.5
    burst_amplitude_hz: tuple = (1e3, 2e4)
    burst_pivot: tuple = (8.0, 11.0)
    burst_tau_s: tuple = (1.2, 3.0)
    sample_cap: int = DEFAULT_SAMPLE_CAP
    workers: int = 1


@dataclass
class AnalysisSection:
    psd_mode: int = 7
    welch_segment: int = 0              # 0 picks the default length
    welch_overlap: float = 0.5
    welch_window: str = "hann"
    psd_fit_range_hz: tuple = ()
    noise_components: tuple = COMPONENTS
    adev_per_decade: int = 10
    adev_combine: str = "quadrature"
    correlation_bin_hz: float = 2e6
    quiet_window: str = "auto"
    quiet_start_s: float = 0.0
    quiet_stop_s: float = 0.0
    quiet_margin_s: float = 60.0
    burst_threshold: float = 8.0
    burst_min_separation_s: float = 20.0


@dataclass
class OutputSection:
    directory: str = "out"
    waterfall_spacing_hz: float = 500.0


@dataclass
class RunConfig:
    bath: BathConfig = field(default_factory=BathConfig)
    resonator: ResonatorSection = field(default_factory=ResonatorSection)
    simulation: SimulationSection = field(default_factory=SimulationSection)
    analysis: AnalysisSection = field(default_factory=AnalysisSection)
    output: OutputSection = field(default_factory=OutputSection)

    @property
    def n_samples(self) -> int:
        return int(round(self.simulation.duration_s / self.simulation.dt_s))

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, bath=replace(self.bath, master_seed=int(seed)))

    def validate(self):
        sim, an = self.simulation, self.analysis
        if not sim.dt_s > 0:
            raise ConfigError("simulation.dt_s: must be > 0")
        if not sim.duration_s > 0:
            raise ConfigError("simulation.duration_s: must be > 0")
        if self.n_samples > sim.sample_cap:
            raise ConfigError(f"simulation.duration_s: {self.n_samples} samples exceed "
                              f"simulation.sample_cap={sim.sample_cap}")
        if sim.noise_floor_hz < 0:
            raise ConfigError("simulation.noise_floor_hz: must be >= 0")
        if sim.burst_rate_hz < 0:
            raise ConfigError("simulation.burst_rate_hz: must be >= 0")
        if not 0 <= sim.antisymmetric_fraction <= 1:
            raise ConfigError("simulation.antisymmetric_fraction: must lie in [0, 1]")
        if sim.workers < 1:
            raise ConfigError("simulation.workers: must be >= 1")
        lo, hi = sim.burst_tau_s
        if not 0 < lo <= hi:
            raise ConfigError("simulation.burst_tau_s: needs 0 < low <= high")
        n_modes = len(self.bath.mode_frequencies)
        anti = sim.burst_rate_hz > 0 and sim.antisymmetric_fraction > 0
        if anti and not 1 <= sim.burst_pivot[0] <= sim.burst_pivot[1] <= max(n_modes, 1):
            raise ConfigError(f"simulation.burst_pivot: must lie within [1, {n_modes}]")
        if not 1 <= an.psd_mode <= n_modes:
            raise ConfigError(f"analysis.psd_mode: must lie within [1, {n_modes}]")
        if not 0 <= an.welch_overlap <= 0.9:
            raise ConfigError("analysis.welch_overlap: must lie in [0, 0.9]")
        if an.quiet_window not in QUIET_MODES:
            raise ConfigError(f"analysis.quiet_window: expected one of {QUIET_MODES}")
        if an.quiet_window == "manual" and not an.quiet_stop_s > an.quiet_start_s:
            raise ConfigError("analysis.quiet_stop_s: must exceed analysis.quiet_start_s")
        if an.correlation_bin_hz <= 0:
            raise ConfigError("analysis.correlation_bin_hz: must be > 0")
        if an.burst_threshold <= 0:
            raise ConfigError("analysis.burst_threshold: must be > 0")
        if an.adev_combine not in ("quadrature", "sum"):
            raise ConfigError("analysis.adev_combine: expected 'quadrature' or 'sum'")
        bad = [c for c in an.noise_components if c not in COMPONENTS]
        if bad or not an.noise_components:
            raise ConfigError(f"analysis.noise_components: expected a subset of {COMPONENTS}")
        res = self.resonator
        if not res.generate_defaults and len(res.modes) != n_modes:
            raise ConfigError(f"resonator.mode_XX: {len(res.modes)} parameter sets for {n_modes} modes")
        return self

    def snapshot(self) -> dict:
        """Plain nested dict of every setting (used in the run manifest)."""
        def plain(v):
            if isinstance(v, ResonatorParams):
                return v.to_dict()
            if isinstance(v, (tuple, list)):
                return [plain(x) for x in v]
            return v
        return {sec.name: {f.name: plain(getattr(getattr(self, sec.name), f.name))
                           for f in fields(getattr(self, sec.name))}
                for sec in fields(self)}


# parsing ---------------------------------------------------------------------

_SECTIONS = {"bath": None, "resonator": ResonatorSection, "simulation": SimulationSection,
             "analysis": AnalysisSection, "output": OutputSection}

# config key -> (BathConfig field, kind)
_BATH_KEYS = {
    "n_tls": ("n_tls", "int"),
    "tls_band_hz": ("tls_band", "pair"),
    "g_max_hz": ("g_max", "float"),
    "g_min_hz": ("g_min", "float"),
    "g_exponent": ("g_exponent", "float"),
    "fluctuators_per_tls": ("n_fluctuators_per_tls", "int"),
    "rate_band_hz": ("rate_band", "pair"),
    "shift_scale_hz": ("shift_scale", "float"),
    "guard_detuning_hz": ("guard_detuning", "float"),
    "master_seed": ("master_seed", "int"),
    "mode_freq_hz": ("mode_frequencies", "list"),
    "mode_start_hz": (None, "float"),
    "mode_spacing_hz": (None, "float"),
    "n_modes": (None, "int"),
}
_MODE_KEY = re.compile(r"mode_(\d{2})$")


def _kind_of(default) -> str:
    if isinstance(default, bool):
        return "bool"
    if isinstance(default, int):
        return "int"
    if isinstance(default, float):
        return "float"
    if isinstance(default, tuple):
        return "strs" if default and isinstance(default[0], str) else "list"
    return "str"


def _convert(raw: str, kind: str):
    raw = raw.strip()
    if kind == "bool":
        low = raw.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    if kind == "str":
        return raw
    items = [s.strip() for s in raw.split(",") if s.strip()]
    if kind == "strs":
        return tuple(items)
    vals = tuple(float(s) for s in items)
    if kind == "pair" and len(vals) != 2:
        raise ValueError(f"expected two comma-separated numbers, got {raw!r}")
    return vals


def _line_index(text: str) -> dict:
    """Map ``(section, key)`` to its 1-based line number."""
    out, section = {}, None
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
        elif s and s[0] not in "#;" and ("=" in s or ":" in s):
            key = re.split(r"[=:]", s, maxsplit=1)[0].strip()
            out.setdefault((section, key), n)
    return out


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"),
                                       inline_comment_prefixes=None, strict=True, empty_lines_in_values=False)
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"{exc.section}.{exc.option}: duplicate key (line {exc.lineno})") from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"[{exc.section}]: duplicate section (line {exc.lineno})") from None
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"line {exc.lineno}: key outside any [section]") from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else "?"
        raise ConfigError(f"line {lineno}: expected 'key = value'") from None
    lines = _line_index(text)

    def where(sec, key):
        return f"{sec}.{key} (line {lines.get((sec, key), '?')})"

    for sec in parser.sections():
        if sec not in _SECTIONS:
            raise ConfigError(f"[{sec}]: unknown section (line {_find_section(text, sec)})")

    cfg = RunConfig()
    # bath
    bath_kw = {}
    if parser.has_section("bath"):
        grid = {}
        for key, raw in parser.items("bath"):
            if key not in _BATH_KEYS:
                raise ConfigError(f"{where('bath', key)}: unknown key")
            target, kind = _BATH_KEYS[key]
            try:
                val = _convert(raw, kind)
            except ValueError as exc:
                raise ConfigError(f"{where('bath', key)}: {exc}") from None
            if target is None:
                grid[key] = val
            else:
                bath_kw[target] = val
        if grid:
            if "mode_frequencies" in bath_kw:
                raise ConfigError(f"{where('bath', next(iter(grid)))}: give either mode_freq_hz or the "
                                  "mode_start_hz/mode_spacing_hz/n_modes grid, not both")
            missing = {"mode_start_hz", "mode_spacing_hz", "n_modes"} - set(grid)
            if missing:
                raise ConfigError(f"bath.{sorted(missing)[0]}: required with the other mode-grid keys")
            bath_kw["mode_frequencies"] = tuple(grid["mode_start_hz"] + grid["mode_spacing_hz"] * k
                                                for k in range(grid["n_modes"]))
    try:
        cfg.bath = BathConfig(**bath_kw)
    except ValueError as exc:
        raise ConfigError(f"[bath]: {exc}") from None

    for name, cls in _SECTIONS.items():
        if cls is None or not parser.has_section(name):
            continue
        section = cls()
        defaults = {f.name: getattr(section, f.name) for f in fields(cls)}
        modes = {}
        for key, raw in parser.items(name):
            m = _MODE_KEY.match(key) if name == "resonator" else None
            try:
                if m:
                    vals = _convert(raw, "list")
                    if len(vals) != 6:
                        raise ValueError("expected a, theta_rad, q_loaded, q_external, phi0_rad, f_r_hz")
                    modes[int(m.group(1))] = ResonatorParams(*vals)
                    continue
                if key not in defaults or key == "modes":
                    raise ConfigError(f"{where(name, key)}: unknown key")
                val = _convert(raw, _kind_of(defaults[key]))
            except ValueError as exc:
                if isinstance(exc, ConfigError):
                    raise
                raise ConfigError(f"{where(name, key)}: {exc}") from None
            setattr(section, key, val)
        if modes:
            if sorted(modes) != list(range(1, len(modes) + 1)):
                raise ConfigError("resonator.mode_XX: keys must run mode_01, mode_02, ... without gaps")
            section.modes = tuple(modes[k] for k in sorted(modes))
        setattr(cfg, name, section)

    try:
        return cfg.validate()
    except ConfigError as exc:
        key = str(exc).split(":", 1)[0]
        sec, _, opt = key.partition(".")
        ln = lines.get((sec, opt))
        raise ConfigError(f"{exc} (line {ln})" if ln else str(exc)) from None


def _find_section(text: str, sec: str):
    for n, line in enumerate(text.splitlines(), 1):
        if line.strip() == f"[{sec}]":
            return n
    return "?"


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(path.read_text(encoding="utf-8"), source=str(path))


def default_config_text() -> str:
    """A complete config listing every key at its default value."""
    b = BathConfig()
    cfg = RunConfig()
    fmt = lambda v: ", ".join(repr(float(x)) if not isinstance(x, str) else x for x in v) \
        if isinstance(v, tuple) else ("true" if v is True else "false" if v is False else str(v))
    out = ["[bath]",
           f"n_tls = {b.n_tls}",
           f"tls_band_hz = {fmt(b.tls_band)}",
           f"g_max_hz = {b.g_max!r}",
           f"g_min_hz = {b.g_min!r}",
           f"g_exponent = {b.g_exponent!r}",
           f"fluctuators_per_tls = {b.n_fluctuators_per_tls}",
           f"rate_band_hz = {fmt(b.rate_band)}",
           f"shift_scale_hz = {b.shift_scale!r}",
           f"guard_detuning_hz = {b.guard_detuning!r}",
           f"master_seed = {b.master_seed}",
           f"mode_start_hz = {DEFAULT_MODES[0]!r}",
           f"mode_spacing_hz = {DEFAULT_MODES[1] - DEFAULT_MODES[0]!r}",
           f"n_modes = {len(DEFAULT_MODES)}"]
    for name in ("resonator", "simulation", "analysis", "output"):
        out += ["", f"[{name}]"]
        sec = getattr(cfg, name)
        for f in fields(sec):
            if f.name == "modes" or getattr(sec, f.name) == ():
                continue
            out.append(f"{f.name} = {fmt(getattr(sec, f.name))}")
    return "\n".join(out) + "\n"
