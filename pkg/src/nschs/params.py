"""Model constants and sampled checks of the structural assumptions (H1)-(H5)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from .potentials import FloryHugginsPotential, eval_s_phi


class AssumptionError(ValueError):
    """A hard violation of one of the structural assumptions."""


@dataclass(frozen=True)
class ViscosityLaw:
    """Bounded viscosity nu(phi, rho).

    ``constant`` returns ``nu1``; ``smooth_blend`` interpolates between ``nu2``
    (phi -> -inf) and ``nu1`` (phi -> +inf) with a tanh profile.
    """

    kind: str = "constant"
    nu1: float = 1.0
    nu2: float = 1.0
    nu_floor: float = 1.0
    nu_ceil: float = 1.0

    def __call__(self, phi, rho=None):
        return viscosity_eval(self, phi, rho)


def viscosity_eval(law: ViscosityLaw, phi, rho=None):
    phi = np.asarray(phi, dtype=float)
    if law.kind == "constant":
        val = np.full_like(phi, law.nu1)
    elif law.kind == "smooth_blend":
        w = 0.5 * (1.0 + np.tanh(phi))
        val = law.nu2 + (law.nu1 - law.nu2) * w
        val = np.clip(val, min(law.nu1, law.nu2), max(law.nu1, law.nu2))
    else:
        raise ValueError(f"unknown viscosity law {law.kind!r}")
    return float(val) if val.ndim == 0 else val


@dataclass(frozen=True)
class AssumptionConstants:
    """Constants of (H2), (H3) and (H5).

    The defaults are one admissible choice for the quartic well and the
    Flory-Huggins potential with ``theta1 = 2``.
    """

    c0: float = 1.0
    c1: float = 4.0
    c2: float = 1.0
    c3: float = 0.125
    c4: float = 1.0
    L1: float = 1.0
    growth_C: float = 5.0


@dataclass(frozen=True)
class ModelParams:
    alpha: float = 0.1
    beta: float = 1.0
    theta: float = 1.0
    viscosity: ViscosityLaw = field(default_factory=ViscosityLaw)
    potential: FloryHugginsPotential = field(default_factory=FloryHugginsPotential)
    constants: AssumptionConstants = field(default_factory=AssumptionConstants)
    penalty_omega: float = 0.0
    regularization_eps: float | None = 0.1

    def __post_init__(self):
        for name in ("alpha", "beta", "theta", "penalty_omega"):
            if not math.isfinite(getattr(self, name)):
                raise AssumptionError(f"{name} must be finite")
        for name in ("alpha", "beta", "theta"):
            if getattr(self, name) <= 0:
                raise AssumptionError(f"H4 violated: {name} must be positive")
        if not 0.0 <= self.penalty_omega <= 1.0:
            raise ValueError("penalty_omega must lie in [0, 1]")
        eps = self.regularization_eps
        if eps is not None and not (0.0 < eps < self.potential.eps1):
            raise ValueError(
                f"regularization_eps must lie in (0, eps1={self.potential.eps1}), got {eps}"
            )

    def replace(self, **changes) -> "ModelParams":
        kw = {f.name: getattr(self, f.name) for f in fields(self)}
        kw.update(changes)
        return ModelParams(**kw)


@dataclass
class CheckResult:
    name: str
    passed: bool
    margin: float
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def __str__(self) -> str:
        lines = []
        for c in self.checks:
            flag = "pass" if c.passed else "FAIL"
            lines.append(f"{c.name:4s} {flag}  worst margin {c.margin:+.3e}  {c.detail}")
        return "\n".join(lines)


def _finite_or_raise(params: ModelParams) -> None:
    values = {
        "alpha": params.alpha,
        "beta": params.beta,
        "theta": params.theta,
        "penalty_omega": params.penalty_omega,
        "theta1": params.potential.theta1,
        "theta2": params.potential.theta2,
    }
    for obj in (params.viscosity, params.constants):
        for f in fields(obj):
            v = getattr(obj, f.name)
            if isinstance(v, (int, float)):
                values[f.name] = v
    for name, v in values.items():
        if not math.isfinite(v):
            raise AssumptionError(f"parameter {name} is not finite")


def validate_assumptions(
    params: ModelParams, sample_count: int = 1000, seed: int = 0
) -> ValidationReport:
    """Check (H1)-(H5) on sampled ranges and report the worst slack of each.

    Raises :class:`AssumptionError` for non-finite parameters and for a
    non-positive viscosity floor; everything else is reported, not raised.
    """
    if sample_count < 100:
        raise ValueError("sample_count must be at least 100")
    _finite_or_raise(params)
    law = params.viscosity
    if law.nu_floor <= 0:
        raise AssumptionError("H1 violated: nu_floor must be positive")
    if law.nu_ceil < law.nu_floor:
        raise AssumptionError("H1 violated: nu_ceil < nu_floor")

    rng = np.random.default_rng(seed)
    k = params.constants
    fh = params.potential
    checks = []

    # H1: bounds of nu on a tensor grid plus random points of [-3,3] x [-1,2]
    m = int(math.ceil(math.sqrt(sample_count)))
    P, R = np.meshgrid(np.linspace(-3, 3, m), np.linspace(-1, 2, m), indexing="ij")
    P = np.concatenate([P.ravel(), rng.uniform(-3, 3, sample_count)])
    R = np.concatenate([R.ravel(), rng.uniform(-1, 2, sample_count)])
    nu = np.asarray(viscosity_eval(law, P, R))
    margin = float(min((nu - law.nu_floor).min(), (law.nu_ceil - nu).min()))
    checks.append(CheckResult("H1", margin >= 0, margin, f"nu in [{nu.min():.4g}, {nu.max():.4g}]"))

    # H2 on s in [-5, 5]
    s = np.linspace(-5, 5, sample_count)
    S0, S1, S2 = (np.asarray(eval_s_phi(s, o)) for o in (0, 1, 2))
    slacks = [
        (S2 + k.c0).min(),
        (S1 * s - k.c1 * S0 + k.c2).min(),
        (S0 - k.c3 * s**4 + k.c4).min(),
    ]
    signs_ok = k.c0 >= 0 and k.c1 > 0 and k.c2 >= 0 and k.c3 > 0 and k.c4 >= 0
    # sub-linear growth of S' relative to S: sup(|S'| - eps S) stays finite and shrinks in eps
    c_eps = [float((np.abs(S1) - e * S0).max()) for e in (1.0, 0.1, 0.01)]
    growth_ok = all(np.isfinite(c_eps))
    margin = float(min(slacks))
    checks.append(
        CheckResult(
            "H2",
            margin >= 0 and signs_ok and growth_ok,
            margin,
            f"c_eps(1, .1, .01) = {c_eps[0]:.3g}, {c_eps[1]:.3g}, {c_eps[2]:.3g}",
        )
    )

    # H3: |R''| <= L1, blow-up of the entropy derivatives, monotone curvature near endpoints
    r2 = np.abs(np.asarray(fh.enthalpy(s, 2)))
    margin = float((k.L1 - r2).min())
    near = np.geomspace(1e-12, fh.eps1, sample_count)
    c_left = np.asarray(fh.entropy(near, 2))
    c_right = np.asarray(fh.entropy(1.0 - near, 2))
    mono = bool(np.all(np.diff(c_left) <= 0) and np.all(np.diff(c_right) <= 0))
    blowup = fh.entropy(1e-12, 1) < -10 and fh.entropy(1 - 1e-12, 1) > 10
    checks.append(
        CheckResult(
            "H3",
            margin >= 0 and k.L1 > 0 and mono and blowup,
            margin,
            f"monotone curvature near endpoints: {mono}",
        )
    )

    # H4
    margin = min(params.alpha, params.beta, params.theta)
    checks.append(CheckResult("H4", margin > 0, margin, "alpha, beta, theta > 0"))

    # H5 on (0, 1) away from a 1e-8 margin
    t = np.concatenate([np.geomspace(1e-8, 0.5, sample_count // 2), 1.0 - np.geomspace(1e-8, 0.5, sample_count // 2)])
    C = k.growth_C
    lhs = np.asarray(fh.entropy(t, 2))
    with np.errstate(over="ignore"):
        rhs = C * np.exp(C * np.abs(np.asarray(fh.entropy(t, 1))))
    margin = float(np.min(np.log(rhs) - np.log(lhs)))
    checks.append(CheckResult("H5", margin >= 0, margin, f"C = {C:g} (log-scale slack)"))

    return ValidationReport(checks)
