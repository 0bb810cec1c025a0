"""Sectioned key = value run configuration and initial-condition presets."""
from __future__ import annotations

import configparser
import io
import os
import warnings
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .grid import Grid2D, MACField
from .model import SimState, regularize_initial_rho
from .params import (
    AssumptionConstants,
    AssumptionError,
    ModelParams,
    ViscosityLaw,
    validate_assumptions,
)
from .potentials import FloryHugginsPotential
from .stepper import StepConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    nx: int = 64
    ny: int = 64
    Lx: float = 4.0 * np.pi
    Ly: float = 4.0 * np.pi

    def build(self) -> Grid2D:
        return Grid2D(self.nx, self.ny, self.Lx, self.Ly)


@dataclass(frozen=True)
class RunSpec:
    t_end: float = 0.2
    output_every: int = 1
    snapshot_every: int = 0
    render: bool = False
    output_dir: str = "out"
    seed: int = 0
    energy_mode: str = "approx"


@dataclass(frozen=True)
class InitialSpec:
    """Initial data. Presets: constant, spinodal, tanh_stripe, smooth, file."""

    phi: str = "spinodal"
    phi_value: float = 0.0
    phi_amplitude: float = 0.05
    phi_modes: int = 0
    phi_width: float = 0.5
    rho: str = "constant"
    rho_value: float = 0.3
    rho_amplitude: float = 0.0
    rho_modes: int = 0
    rho_width: float = 0.5
    file: str | None = None
    rho_cutoff: float | None = None


@dataclass(frozen=True)
class MonitorSpec:
    mass_tol: float = 1e-10
    energy_rise_tol: float = 1e-8
    lower_bound: bool = True


@dataclass(frozen=True)
class RunConfig:
    grid: GridSpec = field(default_factory=GridSpec)
    params: ModelParams = field(default_factory=ModelParams)
    stepper: StepConfig = field(default_factory=lambda: StepConfig(dt=1e-4))
    run: RunSpec = field(default_factory=RunSpec)
    initial: InitialSpec = field(default_factory=InitialSpec)
    monitors: MonitorSpec = field(default_factory=MonitorSpec)

    def with_changes(self, **changes) -> "RunConfig":
        """Replace fields by dotted name, e.g. ``{"params.theta": 0.5, "stepper.dt": 1e-3}``."""
        out = self
        for key, value in changes.items():
            head, _, leaf = key.partition(".")
            sub = getattr(out, head)
            if "." in leaf:
                mid, _, leaf2 = leaf.partition(".")
                inner = getattr(sub, mid)
                sub = _replace(sub, **{mid: _replace(inner, **{leaf2: value})})
            else:
                sub = _replace(sub, **{leaf: value})
            out = replace(out, **{head: sub})
        return out


def _replace(obj, **kw):
    if isinstance(obj, ModelParams):
        return obj.replace(**kw)
    return replace(obj, **kw)


# section name -> (getter from RunConfig, dataclass type)
_SECTIONS = {
    "grid": (lambda c: c.grid, GridSpec),
    "model": (lambda c: c.params, ModelParams),
    "viscosity": (lambda c: c.params.viscosity, ViscosityLaw),
    "potential": (lambda c: c.params.potential, FloryHugginsPotential),
    "assumptions": (lambda c: c.params.constants, AssumptionConstants),
    "stepper": (lambda c: c.stepper, StepConfig),
    "run": (lambda c: c.run, RunSpec),
    "initial": (lambda c: c.initial, InitialSpec),
    "monitors": (lambda c: c.monitors, MonitorSpec),
}
_NESTED = {"viscosity", "potential", "constants"}
_OPTIONAL_WORD = {"regularization_eps": "none", "stab_s1": "auto", "stab_s2": "auto",
                  "rho_clip": "auto", "file": "none", "rho_cutoff": "none"}


def _keys(cls) -> list[str]:
    return [f.name for f in fields(cls) if f.name not in _NESTED]


def _format(name: str, value) -> str:
    if value is None:
        return _OPTIONAL_WORD[name]
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _convert(name: str, text: str, default, line: int):
    t = text.strip()
    if name in _OPTIONAL_WORD and t.lower() == _OPTIONAL_WORD[name]:
        return None
    try:
        if isinstance(default, bool):
            low = t.lower()
            if low in ("1", "yes", "true", "on"):
                return True
            if low in ("0", "no", "false", "off"):
                return False
            raise ValueError(t)
        if isinstance(default, int):
            return int(t)
        if isinstance(default, float) or (default is None and name in _OPTIONAL_WORD and name != "file"):
            return float(t)
        return t
    except ValueError:
        raise ConfigError(f"line {line}: cannot parse {name} = {text!r}") from None


def _line_of(lines: list[str], section: str, key: str | None) -> int:
    current = None
    for i, raw in enumerate(lines, 1):
        s = raw.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip()
            if key is None and current == section:
                return i
        elif current == section and key is not None:
            k = s.split("=", 1)[0].split(":", 1)[0].strip()
            if k == key:
                return i
    return 0


def parse_config_text(text: str, base_dir: str = ".") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"parse error: {exc}") from None
    lines = text.splitlines()
    defaults = RunConfig()
    values: dict[str, dict] = {}
    for section in cp.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"line {_line_of(lines, section, None)}: unknown section [{section}]")
        getter, cls = _SECTIONS[section]
        current = getter(defaults)
        allowed = _keys(cls)
        values[section] = {}
        for key, raw in cp.items(section):
            line = _line_of(lines, section, key)
            if key not in allowed:
                raise ConfigError(f"line {line}: unknown key {key!r} in [{section}]")
            values[section][key] = _convert(key, raw, getattr(current, key), line)

    def build(section):
        getter, cls = _SECTIONS[section]
        return values.get(section, {}), getter(defaults)

    try:
        kw, cur = build("viscosity")
        viscosity = replace(cur, **kw)
        kw, cur = build("potential")
        potential = FloryHugginsPotential(**{**{k: getattr(cur, k) for k in _keys(FloryHugginsPotential)}, **kw})
        kw, cur = build("assumptions")
        constants = replace(cur, **kw)
        kw, cur = build("model")
        params = cur.replace(viscosity=viscosity, potential=potential, constants=constants, **kw)
        kw, cur = build("stepper")
        stepper = replace(cur, **kw)
        grid = replace(build("grid")[1], **build("grid")[0])
        run = replace(build("run")[1], **build("run")[0])
        initial = replace(build("initial")[1], **build("initial")[0])
        monitors = replace(build("monitors")[1], **build("monitors")[0])
    except AssumptionError as exc:
        raise ConfigError(str(exc)) from None
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid value: {exc}") from None
    if initial.file is not None and not os.path.isabs(initial.file):
        initial = replace(initial, file=os.path.normpath(os.path.join(base_dir, initial.file)))
    cfg = RunConfig(grid, params, stepper, run, initial, monitors)
    validate_config(cfg)
    return cfg


def parse_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_config_text(text, base_dir=os.path.dirname(os.path.abspath(path)))


def serialize_config(cfg: RunConfig) -> str:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    for section, (getter, cls) in _SECTIONS.items():
        obj = getter(cfg)
        cp[section] = {k: _format(k, getattr(obj, k)) for k in _keys(cls)}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def validate_config(cfg: RunConfig) -> None:
    """Semantic checks: grid, assumption report, stepper/model compatibility, initial data."""
    try:
        cfg.grid.build()
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from None
    try:
        report = validate_assumptions(cfg.params)
    except AssumptionError as exc:
        raise ConfigError(str(exc)) from None
    failed = [c.name for c in report.checks if not c.passed]
    if failed:
        raise ConfigError(f"{', '.join(failed)} violated:\n{report}")
    st = cfg.stepper
    eps = cfg.params.regularization_eps
    if st.potential_mode == "regularized" and eps is None:
        raise ConfigError("potential_mode = regularized needs model.regularization_eps")
    if st.rho_clip is not None and eps is not None and not 0 < st.rho_clip < eps:
        raise ConfigError("stepper.rho_clip must lie in (0, regularization_eps)")
    if not cfg.run.t_end > 0:
        raise ConfigError("run.t_end must be positive")
    if cfg.run.output_every < 1 or cfg.run.snapshot_every < 0:
        raise ConfigError("run.output_every must be >= 1 and run.snapshot_every >= 0")
    if cfg.run.energy_mode not in ("exact", "penalized", "approx"):
        raise ConfigError(f"unknown energy_mode {cfg.run.energy_mode!r}")
    if cfg.run.energy_mode == "approx" and eps is None:
        raise ConfigError("energy_mode = approx needs model.regularization_eps")
    ini = cfg.initial
    if "file" in (ini.phi, ini.rho):
        if ini.file is None or not os.path.isfile(ini.file):
            raise ConfigError(f"initial.file {ini.file!r} does not exist")
    initial_state(cfg)


def _field(g: Grid2D, kind: str, value, amplitude, modes, width, rng, which: str, snap) -> np.ndarray:
    x, y = g.centers()
    if kind == "constant":
        return np.full(g.shape, float(value))
    if kind == "spinodal":
        noise = rng.uniform(-1.0, 1.0, g.shape)
        if modes > 0:
            noise = g.galerkin_project(noise, modes)
            noise = noise - g.mean(noise)
            noise = noise / np.abs(noise).max()
        return value + amplitude * noise
    if kind == "tanh_stripe":
        return value + amplitude * np.tanh((np.abs(x - 0.5 * g.Lx) - 0.25 * g.Lx) / width)
    if kind == "smooth":
        shape = 0.6 * np.cos(np.pi * x / g.Lx) * np.cos(np.pi * y / g.Ly) + 0.4 * np.cos(
            2.0 * np.pi * x / g.Lx
        )
        return value + amplitude * shape
    if kind == "file":
        return getattr(snap, which).copy()
    raise ConfigError(f"unknown initial preset {kind!r} for {which}")


def initial_state(cfg: RunConfig, grid: Grid2D | None = None) -> SimState:
    """Build the initial state; ``grid`` overrides the configured grid (analytic presets only)."""
    g = grid or cfg.grid.build()
    ini = cfg.initial
    snap = None
    if "file" in (ini.phi, ini.rho):
        from .io import read_snapshot

        snap = read_snapshot(ini.file)
        if snap.grid != g:
            raise ConfigError("initial.file grid does not match the configured grid")
    seeds = np.random.SeedSequence(cfg.run.seed).spawn(2)
    phi = _field(g, ini.phi, ini.phi_value, ini.phi_amplitude, ini.phi_modes, ini.phi_width,
                 np.random.default_rng(seeds[0]), "phi", snap)
    rho = _field(g, ini.rho, ini.rho_value, ini.rho_amplitude, ini.rho_modes, ini.rho_width,
                 np.random.default_rng(seeds[1]), "rho", snap)
    m = g.mean(rho)
    if not 0.0 < m < 1.0:
        raise ConfigError(
            f"mean of rho0 is {m:.6g}; the pure-state rule requires it strictly inside (0, 1)"
        )
    if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(rho))):
        raise ConfigError("initial data is not finite")
    if cfg.stepper.potential_mode == "singular" and (rho.min() <= 0 or rho.max() >= 1):
        raise ConfigError("singular potential needs rho0 strictly inside (0, 1)")
    if ini.rho_cutoff is not None:
        if rho.min() <= 0 or rho.max() >= 1:
            raise ConfigError("rho_cutoff needs rho0 strictly inside (0, 1)")
        reg = regularize_initial_rho(g, rho, ini.rho_cutoff, cfg.params)
        rho = reg.rho
        if reg.mean_shift != 0.0:
            warnings.warn(f"rho_cutoff moved mean(rho0) by {reg.mean_shift:.3e}", stacklevel=2)
    u = snap.u.copy() if snap is not None else None
    return SimState(g, phi, rho, u=u)
