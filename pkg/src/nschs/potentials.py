"""Bulk free-energy densities.

The phase field uses the quartic double well ``S_phi(s) = (s^2 - 1)^2 / 4``.
The surfactant uses a Flory-Huggins potential split into a singular convex
entropy part and a smooth enthalpy part,

    S_rho(s) = (theta1 / 2) [s ln s + (1 - s) ln(1 - s)] + (theta2 / 2) s (1 - s),

together with a globally defined C^2 regularization that replaces the entropy
by its second-order Taylor polynomial outside ``(eps, 1 - eps)``.

All evaluators accept scalars or numpy arrays and return the same shape.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy


class PotentialDomainError(ValueError):
    """Singular potential evaluated outside its domain."""


def _check_order(order: int) -> None:
    if order not in (0, 1, 2):
        raise ValueError(f"order must be 0, 1 or 2, got {order!r}")


def _out(value, like):
    return float(value) if np.ndim(like) == 0 else value


def eval_s_phi(s, order: int = 0):
    """Quartic double well and its first two derivatives."""
    _check_order(order)
    s = np.asarray(s, dtype=float)
    if order == 0:
        val = 0.25 * (s * s - 1.0) ** 2
    elif order == 1:
        val = s**3 - s
    else:
        val = 3.0 * s * s - 1.0
    return _out(val, s)


@dataclass(frozen=True)
class FloryHugginsPotential:
    """Logarithmic surfactant potential.

    ``eps1`` is the width of the neighbourhoods of 0 and 1 on which the
    entropy's second derivative is monotone; any value below 1/2 is admissible.
    """

    theta1: float = 2.0
    theta2: float = 0.0
    eps1: float = 0.25

    def __post_init__(self):
        if not (np.isfinite(self.theta1) and self.theta1 > 0):
            raise ValueError("theta1 must be positive and finite")
        if not np.isfinite(self.theta2):
            raise ValueError("theta2 must be finite")
        if not (0.0 < self.eps1 < 0.5):
            raise ValueError("eps1 must lie in (0, 1/2)")

    def entropy(self, s, order: int = 0):
        """Convex singular part. Order 0 is +inf outside [0, 1]."""
        _check_order(order)
        s = np.asarray(s, dtype=float)
        c = 0.5 * self.theta1
        if order == 0:
            inside = (s >= 0.0) & (s <= 1.0)
            sc = np.where(inside, s, 0.5)
            val = c * (xlogy(sc, sc) + xlogy(1.0 - sc, 1.0 - sc))
            val = np.where(inside, val, np.inf)
        else:
            if np.any((s <= 0.0) | (s >= 1.0)) or np.any(~np.isfinite(s)):
                raise PotentialDomainError(
                    f"derivative of order {order} of the singular potential needs s in (0, 1)"
                )
            if order == 1:
                val = c * (np.log(s) - np.log1p(-s))
            else:
                val = c * (1.0 / s + 1.0 / (1.0 - s))
        return _out(val, s)

    def entropy_third(self, s):
        s = np.asarray(s, dtype=float)
        return 0.5 * self.theta1 * (-1.0 / s**2 + 1.0 / (1.0 - s) ** 2)

    def enthalpy(self, s, order: int = 0):
        """Smooth quadratic part R(s) = (theta2/2) s (1 - s)."""
        _check_order(order)
        s = np.asarray(s, dtype=float)
        c = 0.5 * self.theta2
        if order == 0:
            val = c * s * (1.0 - s)
        elif order == 1:
            val = c * (1.0 - 2.0 * s)
        else:
            val = np.full_like(s, -2.0 * c)
        return _out(val, s)

    @property
    def enthalpy_bound(self) -> float:
        """C_R with |R(s)| <= C_R (1 + s^2), built from R(0), R'(0) and sup|R''|."""
        r0 = abs(float(self.enthalpy(0.0)))
        r1 = abs(float(self.enthalpy(0.0, 1)))
        r2 = abs(self.theta2)
        return r0 + 0.5 * r1 + 0.5 * r2


@dataclass(frozen=True)
class RegularizedPotential:
    base: FloryHugginsPotential
    eps: float

    def __post_init__(self):
        if not (0.0 < self.eps < self.base.eps1):
            raise ValueError(f"eps must lie in (0, eps1={self.base.eps1}), got {self.eps}")

    def entropy(self, s, order: int = 0):
        """C^2 quadratic extension of the entropy outside (eps, 1 - eps)."""
        _check_order(order)
        s = np.asarray(s, dtype=float)
        e = self.eps
        b = self.base
        lo = s <= e
        hi = s >= 1.0 - e
        mid = ~(lo | hi)
        val = np.empty_like(s)
        for anchor, mask in ((e, lo), (1.0 - e, hi)):
            if not np.any(mask):
                continue
            d = s[mask] - anchor
            f0 = b.entropy(anchor, 0)
            f1 = b.entropy(anchor, 1)
            f2 = b.entropy(anchor, 2)
            if order == 0:
                val[mask] = f0 + f1 * d + 0.5 * f2 * d * d
            elif order == 1:
                val[mask] = f1 + f2 * d
            else:
                val[mask] = f2
        if np.any(mid):
            val[mid] = b.entropy(s[mid], order)
        return _out(val, s)


def eval_s_rho_singular(p: FloryHugginsPotential, s, order: int = 0):
    """Full singular surfactant potential (entropy + enthalpy) or a derivative.

    Order 0 returns +inf outside [0, 1]; orders 1 and 2 raise
    :class:`PotentialDomainError` outside (0, 1).
    """
    return _out(np.asarray(p.entropy(s, order)) + np.asarray(p.enthalpy(s, order)), np.asarray(s))


def eval_s_rho_eps(p: RegularizedPotential, s, order: int = 0):
    """Regularized surfactant potential, defined on the whole real line."""
    return _out(
        np.asarray(p.entropy(s, order)) + np.asarray(p.base.enthalpy(s, order)), np.asarray(s)
    )


@dataclass(frozen=True)
class ConvexityCertificate:
    gamma1: float
    gamma2: float
    gamma3: float


def _quadratic_piece_min(f0, f1, f2, anchor, side):
    # q(s) = f0 + f1 (s - anchor) + f2 (s - anchor)^2 / 2 on s <= anchor (side=-1) or s >= anchor
    shift = -f1 / f2
    if side * shift >= 0.0:
        return f0 - 0.5 * f1 * f1 / f2
    return f0


def convexity_certificate(p: RegularizedPotential, n_scan: int = 10_001) -> ConvexityCertificate:
    """Constants with S_eps >= -gamma1 and -gamma2 <= S_eps'' <= gamma3 on the real line.

    gamma1 and gamma2 refer to the regularized entropy; the enthalpy's constant
    curvature |theta2| is folded into gamma2 and gamma3.
    """
    b = p.base
    e = p.eps
    lo = _quadratic_piece_min(b.entropy(e), b.entropy(e, 1), b.entropy(e, 2), e, -1)
    hi = _quadratic_piece_min(
        b.entropy(1 - e), b.entropy(1 - e, 1), b.entropy(1 - e, 2), 1 - e, +1
    )
    # the entropy is convex and symmetric, so the interior minimum sits at 1/2
    mid = b.entropy(0.5)
    gamma1 = -min(lo, hi, mid)

    s = np.linspace(e, 1 - e, n_scan)
    curv = b.entropy(s, 2)
    gamma2 = abs(b.theta2) + max(0.0, -float(curv.min()))
    gamma3 = abs(b.theta2) + max(float(b.entropy(e, 2)), float(b.entropy(1 - e, 2)), float(curv.max()))
    return ConvexityCertificate(float(gamma1), float(gamma2), float(gamma3))


def tail_coercivity(p: RegularizedPotential, n_scan: int = 20_001) -> float:
    """Largest k1 with S_eps(s) >= -gamma1 + k1 s^2 for s <= 0 and s >= 4, by scan."""
    g1 = convexity_certificate(p).gamma1
    s = np.concatenate([-np.geomspace(1e-3, 1e3, n_scan // 2), np.geomspace(4.0, 4e3, n_scan // 2)])
    return float(np.min((p.entropy(s) + g1) / s**2))
