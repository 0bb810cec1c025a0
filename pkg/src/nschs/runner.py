"""Drive one simulation from a RunConfig, with invariant monitors and file output."""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig, initial_state
from .diagnostics import DiagnosticsTrace, sample
from .io import TraceWriter, ensure_dir, write_pgm, write_snapshot
from .model import SimState, energy, energy_lower_bound
from .stepper import CFLError, StepConfig, default_stabilization, step

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_MONITOR = 2


@dataclass
class RunResult:
    exit_code: int
    message: str
    trace: DiagnosticsTrace
    state: SimState
    step_config: StepConfig
    steps: int
    max_excursion: float = 0.0
    lower_bound: float = -np.inf
    snapshots: list[tuple[float, SimState]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.exit_code == EXIT_OK


def _excursion(rho: np.ndarray) -> float:
    return float(np.max(np.abs(rho - np.clip(rho, 0.0, 1.0))))


def check_monitors(cfg: RunConfig, rec, first, prev_total: float | None, bound: float) -> str | None:
    """Name of the first tripped monitor, or None."""
    vals = [rec.mass_phi, rec.mass_rho, rec.energy.total, rec.dissipation, rec.max_velocity]
    if not all(np.isfinite(v) for v in vals):
        return f"nan: non-finite value at t = {rec.t:.6g}"
    m = cfg.monitors
    for name, now, start in (("phi", rec.mass_phi, first.mass_phi), ("rho", rec.mass_rho, first.mass_rho)):
        if abs(now - start) > m.mass_tol:
            return f"mass drift: mean {name} moved by {abs(now - start):.3e} > {m.mass_tol:g} at t = {rec.t:.6g}"
    if m.lower_bound and rec.energy.total < bound:
        return f"energy below bound: {rec.energy.total:.6g} < {bound:.6g} at t = {rec.t:.6g}"
    if prev_total is not None and rec.energy.total > prev_total + m.energy_rise_tol * abs(prev_total):
        return (
            f"energy rise: {prev_total:.12g} -> {rec.energy.total:.12g} at t = {rec.t:.6g}"
        )
    return None


def run_simulation(
    cfg: RunConfig,
    output_dir: str | None = None,
    *,
    write_files: bool = True,
    keep_states_every: int = 0,
    state: SimState | None = None,
) -> RunResult:
    """Integrate to ``t_end``, sampling every ``output_every`` steps.

    Exit code 0 on completion, 2 on the first tripped monitor (NaN, mass
    drift, energy below the certified bound, energy rise beyond tolerance,
    CFL violation). Files go to ``output_dir`` (default: the configured one).
    """
    st = state if state is not None else initial_state(cfg)
    params = cfg.params
    scfg = default_stabilization(st, params, cfg.stepper)
    dt = scfg.dt
    n_steps = int(round(cfg.run.t_end / dt))
    if n_steps < 1:
        raise ValueError("t_end shorter than one step")
    bound = energy_lower_bound(params, st.grid.area)
    emode, pmode = cfg.run.energy_mode, scfg.potential_mode

    out = None
    if write_files:
        out = ensure_dir(output_dir or cfg.run.output_dir)
    trace = DiagnosticsTrace()
    writer = TraceWriter(os.path.join(out, "trace.csv")) if out else None
    snaps: list = []

    def emit_files(s: SimState, k: int):
        if out is None or not cfg.run.snapshot_every or k % cfg.run.snapshot_every:
            return
        write_snapshot(s, os.path.join(out, f"snap_{k:07d}.bin"))
        if cfg.run.render:
            write_pgm(s.phi, os.path.join(out, f"phi_{k:07d}.pgm"))
            write_pgm(s.rho, os.path.join(out, f"rho_{k:07d}.pgm"))

    rec = sample(st, params, energy_mode=emode, potential_mode=pmode)
    first = rec
    trace.append(rec)
    if writer:
        writer.write(rec)
    emit_files(st, 0)
    if keep_states_every:
        snaps.append((st.t, st.copy()))
    prev_total = rec.energy.total
    prev_sample_total, prev_sample_t = rec.energy.total, st.t
    excursion = _excursion(st.rho)
    code, message = EXIT_OK, "completed"
    k = 0
    try:
        for k in range(1, n_steps + 1):
            try:
                with np.errstate(all="ignore"):
                    st = step(st, params, scfg)
            except CFLError as exc:
                code, message = EXIT_MONITOR, f"cfl: {exc}"
                break
            excursion = max(excursion, _excursion(st.rho))
            sampled = k % cfg.run.output_every == 0 or k == n_steps
            with np.errstate(all="ignore"):
                if sampled:
                    rec = sample(st, params, prev_sample_total, st.t - prev_sample_t,
                                 energy_mode=emode, potential_mode=pmode)
                    total = rec.energy.total
                else:
                    total = energy(st, params, emode).total
                    rec = None
            if rec is None:
                if not np.isfinite(total):
                    code, message = EXIT_MONITOR, f"nan: non-finite energy at t = {st.t:.6g}"
                    break
                if total > prev_total + cfg.monitors.energy_rise_tol * abs(prev_total):
                    code = EXIT_MONITOR
                    message = f"energy rise: {prev_total:.12g} -> {total:.12g} at t = {st.t:.6g}"
                    break
                prev_total = total
                continue
            trace.append(rec)
            if writer:
                writer.write(rec)
            tripped = check_monitors(cfg, rec, first, prev_total, bound)
            if tripped:
                code, message = EXIT_MONITOR, tripped
                break
            prev_total = total
            prev_sample_total, prev_sample_t = total, st.t
            emit_files(st, k)
            if keep_states_every and k % keep_states_every == 0:
                snaps.append((st.t, st.copy()))
    finally:
        if writer:
            writer.close()
    return RunResult(code, message, trace, st, scfg, k, excursion, bound, snaps)
