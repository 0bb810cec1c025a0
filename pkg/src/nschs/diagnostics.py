"""Run-time measurements: masses, energy balance, surfactant bounds, twin-run metrics."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Grid2D, MACField
from .model import (
    EnergyReport,
    SimState,
    chemical_potential_phi,
    chemical_potential_rho,
    energy,
    korteweg_force,
    s_rho_prime,
)
from .params import ModelParams
from .stepper import StepConfig, cell_viscosity

TRACE_COLUMNS = (
    "t",
    "mass_phi",
    "mass_rho",
    "E_total",
    "E_kin",
    "E_coupling",
    "dissipation",
    "energy_residual",
    "rho_min",
    "rho_max",
    "eta",
    "clamp_events",
    "max_u",
)


@dataclass
class DiagnosticsRecord:
    """One trace row. Masses are domain averages."""

    t: float
    mass_phi: float
    mass_rho: float
    energy: EnergyReport
    dissipation: float
    energy_residual: float
    rho_min: float
    rho_max: float
    separation_eta: float
    clamp_events: int
    max_velocity: float

    def row(self) -> tuple:
        return (
            self.t,
            self.mass_phi,
            self.mass_rho,
            self.energy.total,
            self.energy.kinetic,
            self.energy.coupling,
            self.dissipation,
            self.energy_residual,
            self.rho_min,
            self.rho_max,
            self.separation_eta,
            self.clamp_events,
            self.max_velocity,
        )


@dataclass
class DiagnosticsTrace:
    records: list[DiagnosticsRecord] = field(default_factory=list)

    def append(self, rec: DiagnosticsRecord) -> None:
        if self.records and not rec.t > self.records[-1].t:
            raise ValueError("trace timestamps must be strictly increasing")
        self.records.append(rec)

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, i) -> DiagnosticsRecord:
        return self.records[i]

    def column(self, name: str) -> np.ndarray:
        idx = TRACE_COLUMNS.index(name)
        return np.array([r.row()[idx] for r in self.records], dtype=float)


def potentials_of(state: SimState, params: ModelParams, potential_mode: str = "regularized"):
    """Cached (mu, psi) of the state, assembled if absent."""
    mu, psi = state.mu, state.psi
    if mu is None:
        mu = chemical_potential_phi(state.grid, state.phi, state.rho, params)
    if psi is None:
        psi = chemical_potential_rho(state.grid, state.phi, state.rho, params, potential_mode)
    return mu, psi


def dissipation_rate(state: SimState, params: ModelParams, potential_mode: str = "regularized") -> float:
    """||sqrt(nu) Du||^2 + ||grad mu||^2 + ||grad psi||^2."""
    g = state.grid
    mu, psi = potentials_of(state, params, potential_mode)
    gm, gp = g.gradient(mu), g.gradient(psi)
    visc = g.viscous_dissipation(state.u, cell_viscosity(state, params))
    return visc + g.face_inner(gm, gm) + g.face_inner(gp, gp)


def sample(
    state: SimState,
    params: ModelParams,
    prev_energy: float | None = None,
    dt: float | None = None,
    *,
    energy_mode: str = "approx",
    potential_mode: str = "regularized",
) -> DiagnosticsRecord:
    """Measure one state.

    With ``prev_energy`` (the total at the previous sample, ``dt`` earlier) the
    record carries ``E - prev_energy + dt * dissipation``; otherwise 0.
    """
    g = state.grid
    rep = energy(state, params, energy_mode)
    diss = dissipation_rate(state, params, potential_mode)
    residual = 0.0
    if prev_energy is not None:
        if dt is None:
            raise ValueError("dt is required together with prev_energy")
        residual = rep.total - prev_energy + dt * diss
    rmin, rmax = float(state.rho.min()), float(state.rho.max())
    return DiagnosticsRecord(
        t=state.t,
        mass_phi=g.mean(state.phi),
        mass_rho=g.mean(state.rho),
        energy=rep,
        dissipation=diss,
        energy_residual=residual,
        rho_min=rmin,
        rho_max=rmax,
        separation_eta=min(rmin, 1.0 - rmax),
        clamp_events=state.clamp_events,
        max_velocity=state.u.max_abs(),
    )


@dataclass(frozen=True)
class StabilityMetrics:
    """Twin-run distances.

    ``Y`` uses a componentwise inverse-Neumann-Laplacian proxy for the dual
    norm of the velocity difference (see :func:`velocity_dual_proxy`).
    """

    Y: float
    Z: float
    W: float


def _dual_sq(g: Grid2D, f: np.ndarray) -> float:
    fm = f - g.mean(f)
    if not np.any(fm):
        return 0.0
    return max(g.inner(fm, g.inv_neumann_laplacian(fm)), 0.0)


def velocity_dual_proxy(g: Grid2D, v: MACField) -> float:
    """Squared proxy of the solenoidal dual norm: sum over components of ||c - mean c||_{V0*}^2 at cells."""
    cx, cy = g.to_cells(v)
    return _dual_sq(g, cx) + _dual_sq(g, cy)


def stability_metrics(a: SimState, b: SimState, params: ModelParams | None = None) -> StabilityMetrics:
    g = a.grid
    if b.grid != g:
        raise ValueError("states live on different grids")
    params = params or ModelParams()
    du = a.u - b.u
    dphi = a.phi - b.phi
    drho = a.rho - b.rho
    Y = velocity_dual_proxy(g, du) + g.inner(dphi, dphi) + _dual_sq(g, drho)

    lap = g.laplacian(dphi)
    gr = g.gradient(drho)
    Z = g.face_inner(du, du) + g.inner(lap, lap) + g.face_inner(gr, gr)

    grad_u_sq = max(-g.face_inner(du, g.vector_laplacian(du)), 0.0)
    bi = g.biharmonic(dphi)
    gbi = g.gradient(bi)
    glr = g.gradient(g.laplacian(drho))
    W = (
        0.5 * params.viscosity.nu_floor * grad_u_sq
        + params.alpha * g.face_inner(gbi, gbi)
        + g.inner(bi, bi)
        + params.beta * g.face_inner(glr, glr)
    )
    return StabilityMetrics(float(Y), float(Z), float(W))


def cosine_test_functions(g: Grid2D, n_test: int) -> np.ndarray:
    """First ``n_test`` Neumann eigenmodes as cos products with unit amplitude, shape (n_test, nx, ny)."""
    if not 1 <= n_test <= g.nx * g.ny:
        raise ValueError("n_test out of range")
    x, y = g.centers()
    out = np.empty((n_test,) + g.shape)
    for i, flat in enumerate(g.mode_order[:n_test]):
        kx, ky = divmod(int(flat), g.ny)
        out[i] = np.cos(kx * np.pi * x / g.Lx) * np.cos(ky * np.pi * y / g.Ly)
    return out


def solenoidal_test_fields(g: Grid2D, n_test: int) -> list[MACField]:
    """Discretely divergence-free fields vanishing on the walls: curls of node stream functions.

    The stream functions are sin(m pi x / Lx) sin(n pi y / Ly) sampled at the
    grid nodes, ordered by m^2/Lx^2 + n^2/Ly^2.
    """
    cand = [(m, n) for m in range(1, g.nx) for n in range(1, g.ny)]
    cand.sort(key=lambda mn: (mn[0] ** 2 / g.Lx**2 + mn[1] ** 2 / g.Ly**2, mn))
    xn = np.linspace(0.0, g.Lx, g.nx + 1)[:, None]
    yn = np.linspace(0.0, g.Ly, g.ny + 1)[None, :]
    out = []
    for m, n in cand[:n_test]:
        s = np.sin(m * np.pi * xn / g.Lx) * np.sin(n * np.pi * yn / g.Ly)
        ux = np.diff(s, axis=1) / g.hy
        uy = -np.diff(s, axis=0) / g.hx
        out.append(MACField(ux, uy))
    return out


def weak_form_residual(
    state_prev: SimState,
    state_next: SimState,
    params: ModelParams,
    cfg: StepConfig,
    n_test: int,
) -> dict:
    """Worst weak-form residual per equation, in rate form (per unit time).

    All spatial terms are evaluated at the new state, so the residual measures
    the scheme's departure from an implicit discretization and vanishes at
    first order in dt. Test functions are unit-amplitude cosine modes for the
    scalars (the constant mode gives the mass change rate) and wall-vanishing
    discrete solenoidal fields for the velocity; the pressure drops out.
    With the flow disabled ``res_u`` is reported as 0.
    """
    g = state_next.grid
    dt = state_next.t - state_prev.t
    if not dt > 0:
        raise ValueError("states must be ordered in time")
    mode = cfg.potential_mode
    phi, rho, u = state_next.phi, state_next.rho, state_next.u
    mu = chemical_potential_phi(g, phi, rho, params)
    rho_eval = rho
    if mode == "singular" and cfg.rho_clip is not None:
        rho_eval = np.clip(rho, cfg.rho_clip, 1.0 - cfg.rho_clip)
    psi = (
        -params.beta * g.laplacian(rho)
        + s_rho_prime(rho_eval, params, mode)
        - 0.5 * params.theta * g.grad_sq(phi)
    )
    strong_phi = (phi - state_prev.phi) / dt - g.laplacian(mu)
    strong_rho = (rho - state_prev.rho) / dt - g.laplacian(psi)
    if cfg.ns_enabled:
        strong_phi = strong_phi + g.advect(u, phi)
        strong_rho = strong_rho + g.advect(u, rho)
    tests = cosine_test_functions(g, n_test)
    cv = g.cell_volume
    res_phi = float(np.abs(np.tensordot(tests, strong_phi, axes=2)).max() * cv)
    res_rho = float(np.abs(np.tensordot(tests, strong_rho, axes=2)).max() * cv)
    res_u = 0.0
    if cfg.ns_enabled:
        nu = cell_viscosity(state_next, params)
        force = korteweg_force(g, mu, psi, phi, rho, subtract_mean=cfg.subtract_mean_force)
        strong_u = (u - state_prev.u) * (1.0 / dt) - g.viscous_operator(u, nu) + g.momentum_advection(u) - force
        res_u = max(abs(g.face_inner(strong_u, w)) for w in solenoidal_test_fields(g, n_test))
    return {"res_phi": res_phi, "res_rho": res_rho, "res_u": float(res_u)}


def adsorption_statistic(state: SimState) -> float:
    """Pearson correlation of rho with the cell-centred |grad phi|^2 (0 if either is constant)."""
    a = state.rho.ravel()
    b = state.grid.grad_sq(state.phi).ravel()
    a = a - a.mean()
    b = b - b.mean()
    na, nb = np.sqrt(a @ a), np.sqrt(b @ b)
    scale_a = np.abs(state.rho).max() * np.sqrt(a.size)
    scale_b = np.abs(b).max() * np.sqrt(b.size) if b.size else 0.0
    if na <= 1e-14 * max(scale_a, 1e-300) or nb == 0.0 or nb <= 1e-14 * scale_b:
        return 0.0
    return float(np.clip((a @ b) / (na * nb), -1.0, 1.0))
