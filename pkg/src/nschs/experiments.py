"""Parameter sweeps, self-convergence and twin-run perturbation studies."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import ConfigError, RunConfig, initial_state
from .diagnostics import stability_metrics
from .grid import Grid2D
from .model import SimState
from .runner import EXIT_OK, RunResult, run_simulation


@dataclass
class SweepMember:
    value: float
    exit_code: int
    message: str
    max_excursion: float
    state: SimState


@dataclass
class SweepReport:
    name: str
    members: list[SweepMember]
    distances: list[tuple[float, float, float, float]]  # (a, b, l2 phi, l2 rho)

    @property
    def distances_decreasing(self) -> bool:
        d = [math.hypot(p, r) for _, _, p, r in self.distances]
        return all(b < a for a, b in zip(d, d[1:]))

    @property
    def excursion_nonincreasing(self) -> bool:
        e = [m.max_excursion for m in self.members]
        return all(b <= a for a, b in zip(e, e[1:]))

    @property
    def exit_code(self) -> int:
        return max((m.exit_code for m in self.members), default=EXIT_OK)

    def __str__(self) -> str:
        lines = [f"{self.name:>10s}  exit  max excursion outside [0,1]"]
        for m in self.members:
            lines.append(f"{m.value:10.4g}  {m.exit_code:4d}  {m.max_excursion:.6e}")
        if self.distances:
            lines.append(f"{'pair':>21s}  l2(phi)       l2(rho)")
            for a, b, p, r in self.distances:
                lines.append(f"{a:10.4g}-{b:<10.4g}  {p:.6e}  {r:.6e}")
            lines.append(f"distances decreasing: {self.distances_decreasing}")
        lines.append(f"excursion non-increasing: {self.excursion_nonincreasing}")
        return "\n".join(lines)


def _check_decreasing(values, name):
    vals = [float(v) for v in values]
    if not vals:
        raise ConfigError(f"{name} list is empty")
    if any(not v > 0 for v in vals):
        raise ConfigError(f"{name} values must be positive")
    if any(b >= a for a, b in zip(vals, vals[1:])):
        raise ConfigError(f"{name} list must be strictly decreasing")
    return vals


def _sweep(cfg: RunConfig, key: str, values, name: str, extra=None) -> SweepReport:
    members = []
    for v in values:
        changes = {key: v}
        if extra:
            changes.update(extra)
        c = cfg.with_changes(**changes)
        res = run_simulation(c, write_files=False)
        members.append(SweepMember(v, res.exit_code, res.message, res.max_excursion, res.state))
    g = cfg.grid.build()
    dist = []
    for a, b in zip(members, members[1:]):
        dp, dr = a.state.phi - b.state.phi, a.state.rho - b.state.rho
        dist.append((a.value, b.value, math.sqrt(g.inner(dp, dp)), math.sqrt(g.inner(dr, dr))))
    return SweepReport(name, members, dist)


def sweep_eps(cfg: RunConfig, eps_list) -> SweepReport:
    """Regularized-potential runs for each eps (strictly decreasing toward 0)."""
    vals = _check_decreasing(eps_list, "eps")
    return _sweep(cfg, "params.regularization_eps", vals, "eps", {"stepper.potential_mode": "regularized"})


def sweep_omega(cfg: RunConfig, omega_list) -> SweepReport:
    """Penalized runs for each omega (strictly decreasing toward 0)."""
    vals = _check_decreasing(omega_list, "omega")
    return _sweep(cfg, "params.penalty_omega", vals, "omega")


def restrict(f: np.ndarray, factor: int) -> np.ndarray:
    """Cell-average a fine field onto a grid coarser by ``factor`` per axis."""
    nx, ny = f.shape
    return f.reshape(nx // factor, factor, ny // factor, factor).mean(axis=(1, 3))


def observed_order(e_coarse: float, e_fine: float, ratio: float = 2.0) -> float:
    if e_fine <= 0 or e_coarse <= 0:
        return float("inf") if e_fine == 0 and e_coarse > 0 else float("nan")
    return math.log(e_coarse / e_fine) / math.log(ratio)


@dataclass
class ConvergenceReport:
    grids: list[int]
    spatial_errors: list[float]
    spatial_order: float
    dts: list[float]
    temporal_errors: list[float]
    temporal_order: float
    spatial_min: float = 1.8
    temporal_min: float = 0.9

    @property
    def passed(self) -> bool:
        return self.spatial_order >= self.spatial_min and self.temporal_order >= self.temporal_min

    def __str__(self) -> str:
        return "\n".join(
            [
                f"spatial grids {self.grids}: successive differences "
                + ", ".join(f"{e:.4e}" for e in self.spatial_errors)
                + f"; observed order {self.spatial_order:.3f} (need >= {self.spatial_min})",
                "temporal dts " + ", ".join(f"{d:g}" for d in self.dts) + ": successive differences "
                + ", ".join(f"{e:.4e}" for e in self.temporal_errors)
                + f"; observed order {self.temporal_order:.3f} (need >= {self.temporal_min})",
                f"converge: {'pass' if self.passed else 'FAIL'}",
            ]
        )


def _final(cfg: RunConfig, grid: Grid2D | None = None) -> SimState:
    st = initial_state(cfg, grid)
    res = run_simulation(cfg, write_files=False, state=st)
    if res.exit_code != EXIT_OK:
        raise RuntimeError(f"convergence run failed: {res.message}")
    return res.state


def _l2_all(g: Grid2D, a: SimState, b: SimState) -> float:
    dp, dr = a.phi - b.phi, a.rho - b.rho
    return math.sqrt(g.inner(dp, dp) + g.inner(dr, dr))


def converge(cfg: RunConfig) -> ConvergenceReport:
    """Self-convergence in space (n, 2n, 4n cells per axis) and time (dt, dt/2, dt/4).

    Spatial levels are compared after cell-averaging the finer solution onto
    the coarser grid, so the initial data must be resolution independent
    (constant, smooth or tanh_stripe presets).
    """
    if "spinodal" in (cfg.initial.phi, cfg.initial.rho) or "file" in (cfg.initial.phi, cfg.initial.rho):
        raise ConfigError("converge needs analytic initial presets (constant, smooth, tanh_stripe)")
    gs = cfg.grid
    if gs.nx < 4 or gs.ny < 4:
        raise ConfigError("coarsest grid needs at least 4 cells per axis")
    levels = [1, 2, 4]
    finals = []
    for m in levels:
        g = Grid2D(gs.nx * m, gs.ny * m, gs.Lx, gs.Ly)
        finals.append((g, _final(cfg, g)))
    errs = []
    for (gc, sc), (gf, sf) in zip(finals, finals[1:]):
        dp = restrict(sf.phi, 2) - sc.phi
        dr = restrict(sf.rho, 2) - sc.rho
        errs.append(math.sqrt(gc.inner(dp, dp) + gc.inner(dr, dr)))
    dt = cfg.stepper.dt
    dts = [dt, dt / 2, dt / 4]
    tfin = [_final(cfg.with_changes(**{"stepper.dt": d})) for d in dts]
    g0 = cfg.grid.build()
    terrs = [_l2_all(g0, a, b) for a, b in zip(tfin, tfin[1:])]
    return ConvergenceReport(
        grids=[gs.nx * m for m in levels],
        spatial_errors=errs,
        spatial_order=observed_order(*errs),
        dts=dts,
        temporal_errors=terrs,
        temporal_order=observed_order(*terrs),
    )


@dataclass
class PerturbReport:
    delta: float
    t: list[float]
    Y: list[float]
    Z: list[float]
    exit_code: int = EXIT_OK
    message: str = ""

    @staticmethod
    def _ratio(a, b):
        return a / b if b > 0 else float("nan")

    @property
    def Y_amplification(self) -> float:
        return self._ratio(self.Y[-1], self.Y[0])

    @property
    def Z_amplification(self) -> float:
        return self._ratio(self.Z[-1], self.Z[0])

    @property
    def Y_max_ratio(self) -> float:
        return self._ratio(max(self.Y), self.Y[0])

    def __str__(self) -> str:
        lines = [f"delta = {self.delta:g}", "t,Y,Z"]
        lines += [f"{t!r},{y!r},{z!r}" for t, y, z in zip(self.t, self.Y, self.Z)]
        lines.append(
            f"amplification Y(t_end)/Y(0) = {self.Y_amplification:.6g}, "
            f"Z(t_end)/Z(0) = {self.Z_amplification:.6g}, max Y(t)/Y(0) = {self.Y_max_ratio:.6g}"
        )
        return "\n".join(lines)


def unit_perturbation(g: Grid2D, seed: int, modes: int = 64) -> np.ndarray:
    """Smooth, mean-free field with unit discrete l2 norm."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 7]))
    f = g.galerkin_project(rng.standard_normal(g.shape), modes)
    f = f - g.mean(f)
    return f / math.sqrt(g.inner(f, f))


def perturb(cfg: RunConfig, delta: float) -> PerturbReport:
    """Twin runs from phi0 and phi0 + delta * (unit-norm perturbation); Y and Z at every sample."""
    if delta < 0:
        raise ConfigError("delta must be nonnegative")
    base = initial_state(cfg)
    twin = base.copy()
    twin.phi = twin.phi + delta * unit_perturbation(base.grid, cfg.run.seed)
    every = cfg.run.output_every
    ra = run_simulation(cfg, write_files=False, state=base, keep_states_every=every)
    rb = run_simulation(cfg, write_files=False, state=twin, keep_states_every=every)
    code = max(ra.exit_code, rb.exit_code)
    msg = ra.message if ra.exit_code else rb.message
    ts, Ys, Zs = [], [], []
    for (ta, sa), (tb, sb) in zip(ra.snapshots, rb.snapshots):
        m = stability_metrics(sa, sb, cfg.params)
        ts.append(ta)
        Ys.append(m.Y)
        Zs.append(m.Z)
    return PerturbReport(delta, ts, Ys, Zs, code, msg)
