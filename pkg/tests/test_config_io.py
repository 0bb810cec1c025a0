import os
from importlib.resources import files

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nschs import cli
from nschs.config import (
    ConfigError,
    RunConfig,
    initial_state,
    parse_config,
    parse_config_text,
    serialize_config,
)
from nschs.diagnostics import TRACE_COLUMNS
from nschs.grid import Grid2D, MACField
from nschs.io import SnapshotError, read_snapshot, read_trace, write_pgm, write_snapshot
from nschs.model import SimState, regularize_initial_rho
from nschs.runner import EXIT_CONFIG, EXIT_MONITOR, EXIT_OK, run_simulation
from nschs.stepper import default_stabilization, suggest_dt

CONFIGS = files("nschs") / "configs"
SHIPPED = sorted(p.name for p in CONFIGS.iterdir() if p.name.endswith(".ini"))


def small(**changes) -> RunConfig:
    base = {"grid.nx": 16, "grid.ny": 16, "run.t_end": 2e-3, "stepper.dt": 1e-4}
    base.update(changes)
    return RunConfig().with_changes(**base)


@pytest.mark.parametrize("name", SHIPPED)
def test_shipped_configs_parse(name):
    cfg = parse_config(str(CONFIGS / name))
    assert parse_config_text(serialize_config(cfg)) == cfg


def test_roundtrip_defaults_and_changes():
    cfg = small(**{"params.theta": 0.7, "params.regularization_eps": None,
                   "stepper.potential_mode": "singular", "run.energy_mode": "exact",
                   "initial.rho_cutoff": 5.0, "stepper.rho_clip": 1e-4})
    assert parse_config_text(serialize_config(cfg)) == cfg


def test_partial_config_uses_defaults():
    cfg = parse_config_text("[grid]\nnx = 8\nny = 8\n[model]\ntheta = 0.5\n")
    assert cfg.grid.nx == 8 and cfg.params.theta == 0.5
    assert cfg.params.alpha == RunConfig().params.alpha


def test_unknown_key_reports_line():
    with pytest.raises(ConfigError, match=r"line 3: unknown key 'thta'"):
        parse_config_text("[grid]\nnx = 8\nthta = 1\n")


def test_unknown_section_and_bad_value():
    with pytest.raises(ConfigError, match="line 2: unknown section"):
        parse_config_text("\n[solver]\nx = 1\n")
    with pytest.raises(ConfigError, match="line 2: cannot parse nx"):
        parse_config_text("[grid]\nnx = many\n")
    with pytest.raises(ConfigError, match="parse error"):
        parse_config_text("nx = 1\n")


def test_semantic_errors_name_assumption():
    with pytest.raises(ConfigError, match="H1"):
        parse_config_text("[viscosity]\nnu_floor = 0\n")
    with pytest.raises(ConfigError, match="H4"):
        parse_config_text("[model]\nbeta = 0\n")
    with pytest.raises(ConfigError, match="regularization_eps"):
        parse_config_text("[model]\nregularization_eps = none\n")
    with pytest.raises(ConfigError, match="rho_clip"):
        parse_config_text("[stepper]\nrho_clip = 0.2\n")


@pytest.mark.parametrize("value", [0.0, 1.0])
def test_pure_state_rule(value):
    with pytest.raises(ConfigError, match="pure-state rule"):
        parse_config_text(f"[grid]\nnx = 8\nny = 8\n[initial]\nrho_value = {value}\n")


def test_singular_needs_interior_rho():
    with pytest.raises(ConfigError, match="singular"):
        parse_config_text(
            "[grid]\nnx = 8\nny = 8\n[stepper]\npotential_mode = singular\n"
            "[initial]\nrho = tanh_stripe\nrho_value = 0.5\nrho_amplitude = 0.6\n"
        )


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="does not exist"):
        parse_config_text("[initial]\nphi = file\nfile = nowhere.bin\n", str(tmp_path))
    with pytest.raises(ConfigError, match="cannot read"):
        parse_config(str(tmp_path / "absent.ini"))


def test_initial_presets():
    cfg = small()
    a, b = initial_state(cfg), initial_state(cfg)
    assert np.array_equal(a.phi, b.phi)
    assert np.abs(a.phi).max() <= cfg.initial.phi_amplitude
    c = initial_state(cfg.with_changes(**{"run.seed": 1}))
    assert not np.array_equal(a.phi, c.phi)
    smooth = initial_state(cfg.with_changes(**{"initial.phi": "smooth", "initial.phi_amplitude": 0.5}))
    assert np.abs(smooth.phi).max() <= 0.5
    stripe = initial_state(cfg.with_changes(**{"initial.phi": "tanh_stripe", "initial.phi_amplitude": 1.0}))
    assert stripe.phi.min() < -0.9 and stripe.phi.max() > 0.9
    modes = initial_state(cfg.with_changes(**{"initial.phi_modes": 10}))
    assert abs(modes.grid.mean(modes.phi)) <= 1e-15
    assert np.abs(modes.phi).max() == pytest.approx(cfg.initial.phi_amplitude)


def test_initial_rho_cutoff_applied():
    cfg = small(**{"initial.rho": "smooth", "initial.rho_value": 0.5, "initial.rho_amplitude": 0.45})
    raw = initial_state(cfg)
    with pytest.warns(UserWarning, match="moved mean"):
        cut = initial_state(cfg.with_changes(**{"initial.rho_cutoff": 1.0}))
    assert not np.array_equal(raw.rho, cut.rho)
    # the cutoff solve does not pin the mean; the shift is what the solver reports
    shift = regularize_initial_rho(raw.grid, raw.rho, 1.0, cfg.params).mean_shift
    assert cut.grid.mean(cut.rho) - raw.grid.mean(raw.rho) == pytest.approx(shift, abs=1e-14)
    assert 0 < cut.rho.min() and cut.rho.max() < 1


def test_file_preset(tmp_path):
    cfg = small()
    s = initial_state(cfg)
    s.phi = s.phi + 0.25
    write_snapshot(s, str(tmp_path / "init.bin"))
    text = serialize_config(cfg.with_changes(**{"initial.phi": "file", "initial.rho": "file",
                                                 "initial.file": "init.bin"}))
    (tmp_path / "c.ini").write_text(text.replace(str(tmp_path) + os.sep, ""))
    loaded = parse_config(str(tmp_path / "c.ini"))
    st2 = initial_state(loaded)
    assert np.array_equal(st2.phi, s.phi)
    bad = loaded.with_changes(**{"grid.nx": 8})
    with pytest.raises(ConfigError, match="grid"):
        initial_state(bad)


@given(st.integers(4, 12), st.integers(4, 12), st.floats(0.1, 100), st.floats(0.1, 100), st.floats(0, 1e6))
@settings(max_examples=25, deadline=None)
def test_snapshot_roundtrip(nx, ny, Lx, Ly, t):
    import tempfile

    rng = np.random.default_rng(nx * 100 + ny)
    g = Grid2D(nx, ny, Lx, Ly)
    u = MACField(rng.standard_normal((nx + 1, ny)), rng.standard_normal((nx, ny + 1)))
    s = SimState(g, rng.standard_normal(g.shape), rng.random(g.shape), u=u,
                 p=rng.standard_normal(g.shape), t=t)
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "s.bin")
        write_snapshot(s, path)
        r = read_snapshot(path)
    assert r.grid == g and r.t == t
    for name in ("phi", "rho", "p"):
        assert np.array_equal(getattr(r, name), getattr(s, name))
    assert np.array_equal(r.u.ux, s.u.ux) and np.array_equal(r.u.uy, s.u.uy)


def test_snapshot_errors(tmp_path):
    g = Grid2D(6, 5)
    path = str(tmp_path / "s.bin")
    write_snapshot(SimState(g, np.zeros(g.shape), np.full(g.shape, 0.5)), path)
    data = open(path, "rb").read()
    open(path, "wb").write(data[:-8])
    with pytest.raises(SnapshotError, match="shape mismatch"):
        read_snapshot(path)
    open(path, "wb").write(b"XXXXXX" + data[6:])
    with pytest.raises(SnapshotError, match="bad magic"):
        read_snapshot(path)
    open(path, "wb").write(data[:10])
    with pytest.raises(SnapshotError, match="shape mismatch"):
        read_snapshot(path)


def test_pgm(tmp_path):
    f = np.zeros((4, 3))
    f[3, 2] = 1.0
    write_pgm(f, str(tmp_path / "a.pgm"))
    data = (tmp_path / "a.pgm").read_bytes()
    assert data.startswith(b"P5\n4 3\n255\n")
    img = np.frombuffer(data[len(b"P5\n4 3\n255\n"):], dtype=np.uint8).reshape(3, 4)
    # largest x, largest y lands at the top-right pixel
    assert img[0, 3] == 255 and img.sum() == 255
    write_pgm(np.ones((4, 3)), str(tmp_path / "b.pgm"))


def test_run_writes_files_and_is_deterministic(tmp_path):
    cfg = small(**{"run.snapshot_every": 10, "run.render": True})
    a = run_simulation(cfg, str(tmp_path / "a"))
    b = run_simulation(cfg, str(tmp_path / "b"))
    assert a.exit_code == EXIT_OK and a.steps == 20
    ta = (tmp_path / "a" / "trace.csv").read_bytes()
    assert ta == (tmp_path / "b" / "trace.csv").read_bytes()
    assert ta.splitlines()[0].decode() == ",".join(TRACE_COLUMNS)
    names = sorted(os.listdir(tmp_path / "a"))
    assert "snap_0000010.bin" in names and "phi_0000020.pgm" in names and "rho_0000000.pgm" in names
    trace = read_trace(str(tmp_path / "a" / "trace.csv"))
    assert len(trace["t"]) == 21
    assert np.all(np.diff(trace["E_total"]) <= 0)
    assert np.array_equal(trace["E_total"], a.trace.column("E_total"))
    last = read_snapshot(str(tmp_path / "a" / "snap_0000020.bin"))
    assert np.array_equal(last.phi, a.state.phi)


def test_run_output_every():
    res = run_simulation(small(**{"run.output_every": 7}), write_files=False)
    assert [round(r.t / 1e-4) for r in res.trace] == [0, 7, 14, 20]


def test_suggested_dt_keeps_energy_monotone():
    cfg = small(**{"run.t_end": 0.02, "grid.nx": 32, "grid.ny": 32})
    st0 = initial_state(cfg)
    dt = suggest_dt(st0, cfg.params, default_stabilization(st0, cfg.params, cfg.stepper))
    res = run_simulation(cfg.with_changes(**{"stepper.dt": dt}), write_files=False)
    assert res.ok
    assert np.all(np.diff(res.trace.column("E_total")) <= 1e-10 * np.abs(res.trace.column("E_total")[1:]))


def test_stabilized_scheme_survives_large_dt():
    res = run_simulation(small(**{"stepper.dt": 1e-2, "run.t_end": 0.2}), write_files=False)
    assert res.ok


def test_deliberate_blowup_names_monitor():
    cfg = small(**{"stepper.dt": 1.0, "stepper.stab_s1": 0.0, "stepper.stab_s2": 0.0,
                   "run.t_end": 50.0, "grid.nx": 32, "grid.ny": 32})
    res = run_simulation(cfg, write_files=False)
    assert res.exit_code == EXIT_MONITOR
    assert res.message.startswith("energy rise")


def test_cfl_monitor():
    cfg = small(**{"stepper.cfl_limit": 1e-12, "initial.phi_amplitude": 0.5, "initial.phi_modes": 20})
    res = run_simulation(cfg, write_files=False)
    assert res.exit_code == EXIT_MONITOR and res.message.startswith("cfl")


def test_mass_monitor_trips():
    cfg = small(**{"monitors.mass_tol": 0.0, "grid.nx": 32, "grid.ny": 32, "initial.phi_value": 0.1})
    res = run_simulation(cfg, write_files=False)
    # rounding alone moves the mean by a few ulps within twenty steps
    assert res.exit_code in (EXIT_OK, EXIT_MONITOR)
    if res.exit_code == EXIT_MONITOR:
        assert res.message.startswith("mass drift")


def test_lower_bound_monitor():
    from nschs.runner import check_monitors
    from nschs.diagnostics import sample

    cfg = small()
    s = initial_state(cfg)
    rec = sample(s, cfg.params)
    assert check_monitors(cfg, rec, rec, None, -np.inf) is None
    assert check_monitors(cfg, rec, rec, None, rec.energy.total + 1).startswith("energy below bound")
    assert check_monitors(cfg, rec, rec, rec.energy.total - 1.0, -np.inf).startswith("energy rise")


def test_cli_validate_and_errors(tmp_path, capsys):
    assert cli.main(["validate", str(CONFIGS / "spinodal.ini")]) == EXIT_OK
    out = capsys.readouterr().out
    assert "H5" in out and "config ok" in out
    bad = tmp_path / "bad.ini"
    bad.write_text("[initial]\nrho_value = 1.0\n")
    assert cli.main(["validate", str(bad)]) == EXIT_CONFIG
    assert "pure-state rule" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code == EXIT_CONFIG


def test_cli_run(tmp_path, capsys):
    cfgfile = tmp_path / "c.ini"
    cfgfile.write_text(serialize_config(small()))
    assert cli.main(["run", str(cfgfile), "-o", str(tmp_path / "out")]) == EXIT_OK
    assert (tmp_path / "out" / "trace.csv").exists()
    assert "completed after 20 steps" in capsys.readouterr().out


def test_cli_sweeps_and_perturb(tmp_path, capsys):
    cfgfile = tmp_path / "c.ini"
    cfgfile.write_text(serialize_config(small()))
    assert cli.main(["sweep-eps", str(cfgfile), "--eps", "0.1"]) == EXIT_OK
    assert cli.main(["sweep-eps", str(cfgfile), "--eps", "0.05", "0.1"]) == EXIT_CONFIG
    assert cli.main(["sweep-omega", str(cfgfile), "--omega", "0.2", "0.1"]) == EXIT_OK
    assert cli.main(["perturb", str(cfgfile), "--delta", "1e-4", "1e-6"]) == EXIT_OK
    assert "spread across delta levels" in capsys.readouterr().out
    assert cli.main(["converge", str(cfgfile)]) == EXIT_CONFIG
