"""Linearly implicit, stabilized splitting for the coupled system.

One step advances the phase field, then the surfactant (which sees the new
phase field), refreshes both chemical potentials, and finally performs a
projection step for the velocity driven by the refreshed capillary force.
Every implicit operator has constant coefficients and is inverted with a
cosine (scalars) or sine (velocity) transform.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .grid import Grid2D, MACField
from .model import (
    SimState,
    chemical_potential_phi,
    chemical_potential_rho,
    korteweg_force,
    regularized,
    s_rho_prime,
)
from .params import ModelParams, viscosity_eval
from .potentials import convexity_certificate, eval_s_phi


class CFLError(RuntimeError):
    pass


class StepError(FloatingPointError):
    pass


@dataclass(frozen=True)
class StepConfig:
    dt: float = 1e-3
    stab_s1: float | None = None
    stab_s2: float | None = None
    rho_clip: float | None = None
    ns_enabled: bool = True
    potential_mode: str = "regularized"
    cfl_limit: float = 0.5
    subtract_mean_force: bool = True
    clamp: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.potential_mode not in ("singular", "regularized"):
            raise ValueError(f"unknown potential mode {self.potential_mode!r}")
        for name in ("stab_s1", "stab_s2"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValueError(f"{name} must be nonnegative")


def default_stabilization(state: SimState, params: ModelParams, cfg: StepConfig) -> StepConfig:
    """Fill in unset stabilization constants and the evaluation clamp.

    s1 = 2 max(1, max |S_phi''| on [-1.2, 1.2]). s2 = gamma2 + theta max |grad phi|^2
    + kappa / 2, where kappa bounds the curvature of the explicitly treated
    surfactant potential (gamma3 when regularized; in singular mode the largest
    curvature over the initial range of rho widened halfway toward 0 and 1). Without the kappa / 2
    share the explicit convex part becomes unstable once eps is small.
    """
    s1 = cfg.stab_s1
    if s1 is None:
        s = np.linspace(-1.2, 1.2, 241)
        s1 = 2.0 * max(1.0, float(np.abs(eval_s_phi(s, 2)).max()))
    s2 = cfg.stab_s2
    if s2 is None:
        s2 = params.theta * float(state.grid.grad_sq(state.phi).max())
        gamma2, kappa = _rho_curvature_bounds(state.rho, params, cfg)
        s2 += gamma2 + 0.5 * kappa
    clip = cfg.rho_clip
    if clip is None:
        eps = params.regularization_eps
        clip = 0.5 * eps if eps is not None else 1e-6
    if params.regularization_eps is not None and clip >= params.regularization_eps:
        raise ValueError("rho_clip must be smaller than regularization_eps")
    return replace(cfg, stab_s1=s1, stab_s2=s2, rho_clip=clip)


def _rho_curvature_bounds(rho, params: ModelParams, cfg: StepConfig) -> tuple[float, float]:
    """(concavity bound gamma2, curvature bound kappa) of the surfactant potential in use."""
    fh = params.potential
    if cfg.potential_mode == "regularized":
        cert = convexity_certificate(regularized(params))
        return cert.gamma2, cert.gamma3
    lo = 0.5 * float(rho.min())
    hi = 1.0 - 0.5 * (1.0 - float(rho.max()))
    if cfg.rho_clip is not None:
        lo, hi = max(lo, cfg.rho_clip), min(hi, 1.0 - cfg.rho_clip)
    if not 0.0 < lo < hi < 1.0:
        raise ValueError("singular mode needs rho strictly inside (0, 1)")
    s = np.linspace(lo, hi, 2001)
    curv = np.asarray(fh.entropy(s, 2))
    gamma2 = abs(fh.theta2) + max(0.0, -float(curv.min()))
    return gamma2, abs(fh.theta2) + float(curv.max())


def _require_filled(cfg: StepConfig) -> None:
    if cfg.stab_s1 is None or cfg.stab_s2 is None or cfg.rho_clip is None:
        raise ValueError("StepConfig has unset stabilization; call default_stabilization first")


def step_phi(state: SimState, params: ModelParams, cfg: StepConfig) -> np.ndarray:
    """(I - dt(alpha L^3 - L^2 + s1 L)) phi_new = phi + dt L[explicit part] - dt div(u phi)."""
    _require_filled(cfg)
    g = state.grid
    dt, s1 = cfg.dt, cfg.stab_s1
    phi, rho = state.phi, state.rho
    explicit = (
        np.asarray(eval_s_phi(phi, 1))
        - s1 * phi
        + params.theta * g.flux_divergence(rho, phi)
    )
    if params.penalty_omega:
        explicit = explicit - params.penalty_omega * g.flux_divergence(g.grad_sq(phi), phi)
    rhs = phi + dt * g.laplacian(explicit)
    if cfg.ns_enabled:
        rhs = rhs - dt * g.advect(state.u, phi)
    return g.helmholtz_solve((1.0, -dt * s1, dt, -dt * params.alpha), rhs)


def clamp_rho(rho: np.ndarray, clip: float) -> tuple[np.ndarray, int]:
    out = np.clip(rho, clip, 1.0 - clip)
    return out, int(np.count_nonzero(out != rho))


def step_rho(state: SimState, params: ModelParams, cfg: StepConfig, phi_new: np.ndarray):
    """(I - dt(-beta L^2 + s2 L)) rho_new = rho + dt L[S'(rho) - s2 rho - theta/2 |grad phi_new|^2] - dt div(u rho).

    Returns ``(rho_new, clamp_events)``. In singular mode the derivative of the
    potential is evaluated on rho clamped to [clip, 1 - clip]; the clamp never
    touches the state itself.
    """
    _require_filled(cfg)
    g = state.grid
    dt, s2 = cfg.dt, cfg.stab_s2
    rho = state.rho
    events = 0
    if cfg.potential_mode == "singular":
        if cfg.clamp:
            arg, events = clamp_rho(rho, cfg.rho_clip)
        else:
            if np.any(rho <= 0) or np.any(rho >= 1) or not np.all(np.isfinite(rho)):
                raise StepError("rho left (0, 1) with the clamp disabled")
            arg = rho
        sp = s_rho_prime(arg, params, "singular")
    else:
        sp = s_rho_prime(rho, params, "regularized")
    explicit = sp - s2 * rho - 0.5 * params.theta * g.grad_sq(phi_new)
    rhs = rho + dt * g.laplacian(explicit)
    if cfg.ns_enabled:
        rhs = rhs - dt * g.advect(state.u, rho)
    return g.helmholtz_solve((1.0, -dt * s2, dt * params.beta, 0.0), rhs), events


def cell_viscosity(state: SimState, params: ModelParams, phi=None, rho=None) -> np.ndarray:
    phi = state.phi if phi is None else phi
    rho = state.rho if rho is None else rho
    return np.asarray(viscosity_eval(params.viscosity, phi, rho)) * np.ones(state.grid.shape)


def step_ns(state: SimState, params: ModelParams, cfg: StepConfig, force: MACField):
    """Semi-implicit viscous step plus projection. Returns (u_new, pressure).

    The floor viscosity part nu_*/2 L_vec is implicit; the variable excess,
    advection and the capillary force are explicit.
    """
    g = state.grid
    dt = cfg.dt
    u = state.u
    h = min(g.hx, g.hy)
    umax = u.max_abs()
    if umax * dt / h > cfg.cfl_limit:
        raise CFLError(f"CFL number {umax * dt / h:.3g} exceeds limit {cfg.cfl_limit}")
    nu = cell_viscosity(state, params)
    nubar = params.viscosity.nu_floor
    excess = g.viscous_operator(u, nu) - g.vector_laplacian(u) * (0.5 * nubar)
    rhs = u + (excess - g.momentum_advection(u) + force) * dt
    ustar = g.vector_helmholtz_solve(1.0, -0.5 * dt * nubar, rhs)
    unew, q = g.project(ustar)
    return unew, q / dt


def refresh_potentials(state: SimState, params: ModelParams, cfg: StepConfig) -> None:
    mode = cfg.potential_mode
    rho = state.rho
    if mode == "singular" and cfg.rho_clip is not None:
        rho = np.clip(rho, cfg.rho_clip, 1.0 - cfg.rho_clip)
    state.mu = chemical_potential_phi(state.grid, state.phi, state.rho, params)
    g = state.grid
    state.psi = (
        -params.beta * g.laplacian(state.rho)
        + s_rho_prime(rho, params, mode)
        - 0.5 * params.theta * g.grad_sq(state.phi)
    )


def step(state: SimState, params: ModelParams, cfg: StepConfig) -> SimState:
    """Advance by one time step; the input state is not modified."""
    _require_filled(cfg)
    phi_new = step_phi(state, params, cfg)
    rho_new, events = step_rho(state, params, cfg, phi_new)
    new = SimState(
        grid=state.grid,
        phi=phi_new,
        rho=rho_new,
        u=state.u,
        p=state.p,
        t=state.t + cfg.dt,
        clamp_events=state.clamp_events + events,
    )
    refresh_potentials(new, params, cfg)
    if cfg.ns_enabled:
        force = korteweg_force(
            new.grid, new.mu, new.psi, new.phi, new.rho, subtract_mean=cfg.subtract_mean_force
        )
        u_tmp = SimState(grid=state.grid, phi=state.phi, rho=state.rho, u=state.u, p=state.p)
        new.u, new.p = step_ns(u_tmp, params, cfg, force)
    else:
        new.u = state.u.copy()
        new.p = state.p.copy()
    return new


def suggest_dt(state: SimState, params: ModelParams, cfg: StepConfig) -> float:
    """Largest advisable step: advective CFL bound and a linear-stability bound for the explicit terms.

    For each scalar equation the implicit symbol i(lam) and the explicit
    symbol e(lam) (|lam| times the Lipschitz bound of the explicit chemical
    potential) are compared; dt <= 1 / max(e - i) keeps every mode's explicit
    increment below the implicit damping.
    """
    _require_filled(cfg)
    g = state.grid
    h = min(g.hx, g.hy)
    umax = state.u.max_abs() if cfg.ns_enabled else 0.0
    dt_adv = h / (4.0 * umax + np.finfo(float).eps)

    lam = -g.eigenvalues.ravel()
    s1, s2 = cfg.stab_s1, cfg.stab_s2
    phi, rho = state.phi, state.rho
    sphi2 = float(np.abs(eval_s_phi(phi, 2)).max())
    rho_abs = float(np.abs(rho).max())
    G = float(g.grad_sq(phi).max())
    e_phi = lam * (sphi2 + s1 + params.theta * rho_abs * lam + 3.0 * params.penalty_omega * G * lam)
    i_phi = lam * (params.alpha * lam**2 + lam + s1)
    if cfg.potential_mode == "regularized":
        srho2 = convexity_certificate(regularized(params)).gamma3
    else:
        r = np.clip(rho, cfg.rho_clip, 1 - cfg.rho_clip)
        srho2 = float(np.abs(params.potential.entropy(r, 2)).max()) + abs(params.potential.theta2)
    e_rho = lam * (srho2 + s2)
    i_rho = lam * (params.beta * lam + s2)
    worst = max(float((e_phi - i_phi).max()), float((e_rho - i_rho).max()), 0.0)
    dt_diff = np.inf if worst == 0.0 else 1.0 / worst
    return float(min(cfg.dt, dt_adv, dt_diff))
