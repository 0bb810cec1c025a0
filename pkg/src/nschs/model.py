"""Chemical potentials, capillary forcing, discrete energies and initial-data regularization.

The discrete energy is built so that the assembled chemical potentials are its
exact gradients in the cell inner product:

* ``|grad phi|^2`` at a cell is the per-direction mean of the two squared face
  differences, which makes ``sum_cells rho |grad phi|^2`` equal the face sum
  of ``rho_face |grad phi|^2`` with arithmetic face averages;
* the penalty integrates the square of that cell quantity, whose gradient is
  ``-omega div(G_face grad phi)`` with ``G`` averaged to faces the same way.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .grid import Grid2D, MACField
from .params import ModelParams
from .potentials import (
    RegularizedPotential,
    convexity_certificate,
    eval_s_phi,
    eval_s_rho_eps,
    eval_s_rho_singular,
)


class BackwardDiffusionWarning(UserWarning):
    pass


@dataclass
class SimState:
    grid: Grid2D
    phi: np.ndarray
    rho: np.ndarray
    u: MACField = None
    p: np.ndarray = None
    t: float = 0.0
    mu: np.ndarray = None
    psi: np.ndarray = None
    clamp_events: int = 0

    def __post_init__(self):
        if self.u is None:
            self.u = self.grid.zeros_mac()
        if self.p is None:
            self.p = self.grid.zeros()

    def copy(self) -> "SimState":
        return SimState(
            grid=self.grid,
            phi=self.phi.copy(),
            rho=self.rho.copy(),
            u=self.u.copy(),
            p=self.p.copy(),
            t=self.t,
            mu=None if self.mu is None else self.mu.copy(),
            psi=None if self.psi is None else self.psi.copy(),
            clamp_events=self.clamp_events,
        )


def regularized(params: ModelParams) -> RegularizedPotential:
    if params.regularization_eps is None:
        raise ValueError("regularized potential requested but regularization_eps is not set")
    return RegularizedPotential(params.potential, params.regularization_eps)


def s_rho_prime(rho: np.ndarray, params: ModelParams, mode: str) -> np.ndarray:
    if mode == "singular":
        return np.asarray(eval_s_rho_singular(params.potential, rho, 1))
    if mode == "regularized":
        return np.asarray(eval_s_rho_eps(regularized(params), rho, 1))
    raise ValueError(f"unknown potential mode {mode!r}")


def check_backward_diffusion(rho: np.ndarray, params: ModelParams) -> float:
    """Warn when theta * rho exceeds 1 somewhere (anti-diffusive second-order part)."""
    excess = float(np.max(params.theta * rho - 1.0))
    if excess > 0:
        warnings.warn(
            f"theta * rho - 1 reaches {excess:.3g} > 0: the second-order part of the phase "
            "equation is locally backward-diffusive; only the alpha term keeps it well posed",
            BackwardDiffusionWarning,
            stacklevel=2,
        )
    return excess


def chemical_potential_phi(grid: Grid2D, phi, rho, params: ModelParams) -> np.ndarray:
    mu = (
        params.alpha * grid.biharmonic(phi)
        - grid.laplacian(phi)
        + np.asarray(eval_s_phi(phi, 1))
        + params.theta * grid.flux_divergence(rho, phi)
    )
    if params.penalty_omega:
        mu = mu - params.penalty_omega * grid.flux_divergence(grid.grad_sq(phi), phi)
    return mu


def chemical_potential_rho(grid: Grid2D, phi, rho, params: ModelParams, potential_mode="regularized"):
    return (
        -params.beta * grid.laplacian(rho)
        + s_rho_prime(rho, params, potential_mode)
        - 0.5 * params.theta * grid.grad_sq(phi)
    )


def korteweg_force(grid: Grid2D, mu, psi, phi, rho, subtract_mean: bool = True) -> MACField:
    """Face forcing mu_face grad phi + psi_face grad rho.

    Subtracting the means changes the force by a discrete gradient only.
    """
    if subtract_mean:
        mu = mu - grid.mean(mu)
        psi = psi - grid.mean(psi)
    mf, pf = grid.to_faces(mu), grid.to_faces(psi)
    gp, gr = grid.gradient(phi), grid.gradient(rho)
    return MACField(mf.ux * gp.ux + pf.ux * gr.ux, mf.uy * gp.uy + pf.uy * gr.uy)


@dataclass
class EnergyReport:
    kinetic: float
    grad_phi: float
    laplace_phi: float
    s_phi_bulk: float
    grad_rho: float
    s_rho_bulk: float
    coupling: float
    penalty: float
    total: float = field(init=False)

    def __post_init__(self):
        self.total = (
            self.kinetic
            + self.grad_phi
            + self.laplace_phi
            + self.s_phi_bulk
            + self.grad_rho
            + self.s_rho_bulk
            + self.coupling
            + self.penalty
        )


def energy_density_rho(rho, params: ModelParams, mode: str) -> np.ndarray:
    if mode == "approx":
        return np.asarray(eval_s_rho_eps(regularized(params), rho, 0))
    return np.asarray(eval_s_rho_singular(params.potential, rho, 0))


def energy(state: SimState, params: ModelParams, mode: str = "penalized") -> EnergyReport:
    """Discrete energy.

    ``exact`` is the unpenalized energy with the singular potential,
    ``penalized`` adds the (omega/4)|grad phi|^4 term, and ``approx`` also
    swaps in the regularized surfactant potential.
    """
    if mode not in ("exact", "penalized", "approx"):
        raise ValueError(f"unknown energy mode {mode!r}")
    g = state.grid
    phi, rho = state.phi, state.rho
    gphi = g.gradient(phi)
    grho = g.gradient(rho)
    G = g.grad_sq(phi)
    lap = g.laplacian(phi)
    with np.errstate(invalid="ignore"):
        s_rho = g.integrate(energy_density_rho(rho, params, mode))
    penalty = 0.0
    if mode != "exact" and params.penalty_omega:
        penalty = 0.25 * params.penalty_omega * g.integrate(G * G)
    return EnergyReport(
        kinetic=0.5 * g.face_inner(state.u, state.u),
        grad_phi=0.5 * g.face_inner(gphi, gphi),
        laplace_phi=0.5 * params.alpha * g.inner(lap, lap),
        s_phi_bulk=g.integrate(np.asarray(eval_s_phi(phi, 0))),
        grad_rho=0.5 * params.beta * g.face_inner(grho, grho),
        s_rho_bulk=s_rho,
        coupling=-0.5 * params.theta * g.integrate(rho * G),
        penalty=penalty,
    )


def energy_lower_bound(params: ModelParams, area: float) -> float:
    """-(c4 + 17 C_R + 8 theta^4 / (c3 alpha^2) + gamma1) |Omega|.

    gamma1 comes from the regularized potential when one is configured; it is
    the same for every admissible eps, so the entropy minimum is used otherwise.
    """
    k = params.constants
    c_r = params.potential.enthalpy_bound
    eps = params.regularization_eps
    if eps is None:
        eps = 0.5 * params.potential.eps1
    gamma1 = convexity_certificate(RegularizedPotential(params.potential, eps)).gamma1
    return -(k.c4 + 17.0 * c_r + 8.0 * params.theta**4 / (k.c3 * params.alpha**2) + gamma1) * area


@dataclass
class InitialRegularization:
    rho: np.ndarray
    psi_hat: np.ndarray
    psi_hat_cut: np.ndarray
    iterations: int
    residual: float
    mean_shift: float


class NewtonError(RuntimeError):
    pass


def regularize_initial_rho(
    grid: Grid2D,
    rho0: np.ndarray,
    k: float,
    params: ModelParams,
    *,
    tol: float = 1e-10,
    max_iter: int = 50,
) -> InitialRegularization:
    """Cut off the initial entropy potential at level k and re-solve for rho.

    Solves ``-beta L r + S'(r) = clip(-beta L rho0 + S'(rho0), -k, k)`` with the
    entropy part S of the surfactant potential by damped Newton; each linear
    system is solved by CG preconditioned with a constant-coefficient DCT solve.
    The mean of rho is not constrained; its shift is returned.
    """
    if np.any(rho0 <= 0) or np.any(rho0 >= 1):
        raise ValueError("rho0 must lie strictly inside (0, 1)")
    m0 = grid.mean(rho0)
    if not 0 < m0 < 1:
        raise ValueError("mean of rho0 must lie in (0, 1)")
    ent = params.potential.entropy
    beta = params.beta
    psi_hat = -beta * grid.laplacian(rho0) + np.asarray(ent(rho0, 1))
    target = np.clip(psi_hat, -k, k)

    def residual(r):
        return -beta * grid.laplacian(r) + np.asarray(ent(r, 1)) - target

    rho = rho0.copy()
    res = residual(rho)
    rnorm = np.sqrt(grid.inner(res, res))
    it = 0
    n = grid.nx * grid.ny
    while rnorm > tol:
        if it >= max_iter:
            raise NewtonError(f"Newton did not converge in {max_iter} iterations (residual {rnorm:.3e})")
        it += 1
        curv = np.asarray(ent(rho, 2))
        cbar = float(curv.mean())

        def jac(x, curv=curv):
            x = x.reshape(grid.shape)
            return (-beta * grid.laplacian(x) + curv * x).ravel()

        def prec(x, cbar=cbar):
            return grid.helmholtz_solve((cbar, -beta, 0.0, 0.0), x.reshape(grid.shape)).ravel()

        A = LinearOperator((n, n), matvec=jac, dtype=float)
        M = LinearOperator((n, n), matvec=prec, dtype=float)
        delta, info = cg(A, -res.ravel(), M=M, rtol=1e-14, atol=0.0, maxiter=500)
        delta = delta.reshape(grid.shape)
        step = 1.0
        while True:
            trial = rho + step * delta
            if np.all(trial > 0) and np.all(trial < 1):
                tres = residual(trial)
                tnorm = np.sqrt(grid.inner(tres, tres))
                if tnorm < rnorm:
                    break
            step *= 0.5
            if step < 1e-12:
                raise NewtonError("damped Newton step failed to reduce the residual")
        rho, res, rnorm = trial, tres, tnorm
    return InitialRegularization(
        rho=rho,
        psi_hat=psi_hat,
        psi_hat_cut=target,
        iterations=it,
        residual=float(rnorm),
        mean_shift=grid.mean(rho) - m0,
    )


@dataclass(frozen=True)
class PenaltyAdvisory:
    k1: float
    required: float

    @property
    def satisfied(self) -> bool:
        return self.k1 >= self.required


def penalty_advisory(params: ModelParams) -> PenaltyAdvisory:
    """Advisory check k1 >= C_R + theta^2 / (2 omega) with k1 scanned from the quadratic tails.

    A numeric aid for choosing eps against omega; it proves nothing.
    """
    from .potentials import tail_coercivity

    if not params.penalty_omega:
        return PenaltyAdvisory(tail_coercivity(regularized(params)), float("inf"))
    req = params.potential.enthalpy_bound + params.theta**2 / (2.0 * params.penalty_omega)
    return PenaltyAdvisory(tail_coercivity(regularized(params)), req)
