import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nschs.potentials import (
    FloryHugginsPotential,
    PotentialDomainError,
    RegularizedPotential,
    convexity_certificate,
    eval_s_phi,
    eval_s_rho_eps,
    eval_s_rho_singular,
    tail_coercivity,
)

FH = FloryHugginsPotential()


def test_quartic_values():
    assert eval_s_phi(1.0, 0) == 0.0
    assert eval_s_phi(0.0, 0) == 0.25
    assert eval_s_phi(2.0, 1) == 6.0
    assert eval_s_phi(0.0, 2) == -1.0


def test_order_validation():
    with pytest.raises(ValueError):
        eval_s_phi(0.0, 3)
    with pytest.raises(ValueError):
        FH.entropy(0.5, -1)


def test_singular_midpoint():
    assert eval_s_rho_singular(FH, 0.5, 0) == pytest.approx(-math.log(2), abs=1e-15)
    assert eval_s_rho_singular(FH, 0.5, 1) == 0.0
    assert eval_s_rho_singular(FH, 0.5, 2) == pytest.approx(4.0, rel=1e-15)


def test_singular_endpoints_and_outside():
    p = FloryHugginsPotential(theta1=2.0, theta2=0.7)
    assert eval_s_rho_singular(p, 0.0, 0) == 0.0
    assert eval_s_rho_singular(p, 1.0, 0) == 0.0
    assert eval_s_rho_singular(p, -0.1, 0) == math.inf
    assert eval_s_rho_singular(p, 1.2, 0) == math.inf
    for s in (0.0, 1.0, -0.5, 1.5, math.nan):
        with pytest.raises(PotentialDomainError):
            eval_s_rho_singular(p, s, 1)
        with pytest.raises(PotentialDomainError):
            eval_s_rho_singular(p, s, 2)


def test_entropy_blowup_and_monotone_curvature():
    assert FH.entropy(1e-14, 1) < -25
    assert FH.entropy(1 - 1e-14, 1) > 25
    s = np.linspace(1e-6, FH.eps1, 1000)
    assert np.all(np.diff(FH.entropy(s, 2)) <= 0)
    assert np.all(np.diff(FH.entropy(1 - s, 2)) <= 0)


def test_invalid_potential_parameters():
    with pytest.raises(ValueError):
        FloryHugginsPotential(theta1=0.0)
    with pytest.raises(ValueError):
        FloryHugginsPotential(eps1=0.5)
    with pytest.raises(ValueError):
        RegularizedPotential(FH, 0.3)
    with pytest.raises(ValueError):
        RegularizedPotential(FH, 0.0)


@pytest.mark.parametrize("eps", [0.1, 0.05, 0.01])
@pytest.mark.parametrize("theta2", [0.0, 0.8])
def test_c2_matching(eps, theta2):
    p = FloryHugginsPotential(theta2=theta2)
    r = RegularizedPotential(p, eps)
    tiny = np.finfo(float).eps
    for s in (eps, 1 - eps):
        for order in (0, 1, 2):
            a = eval_s_rho_eps(r, s, order)
            b = eval_s_rho_singular(p, s, order)
            assert abs(a - b) <= 8 * tiny * max(abs(b), 1.0)
    # one-sided limits of the second derivative agree as well
    for s in (eps, 1 - eps):
        h = 1e-7
        left = eval_s_rho_eps(r, s - h, 2)
        right = eval_s_rho_eps(r, s + h, 2)
        assert abs(left - right) < 1e-4 * abs(left)


def test_constant_curvature_outside():
    r = RegularizedPotential(FH, 0.1)
    assert eval_s_rho_eps(r, -1.0, 2) == pytest.approx(1 / 0.1 + 1 / 0.9, rel=1e-14)
    assert eval_s_rho_eps(r, 3.0, 2) == pytest.approx(1 / 0.1 + 1 / 0.9, rel=1e-14)


@given(st.floats(0.1, 0.9, exclude_min=True, exclude_max=True))
def test_regularized_equals_singular_inside(s):
    r = RegularizedPotential(FH, 0.1)
    for order in (0, 1, 2):
        assert eval_s_rho_eps(r, s, order) == eval_s_rho_singular(FH, s, order)


@pytest.mark.parametrize("eps", [0.1, 0.01])
def test_regularized_below_singular_below_constant(eps):
    r = RegularizedPotential(FH, eps)
    s = np.linspace(0.0, 1.0, 10_000)
    reg = eval_s_rho_eps(r, s, 0)
    sing = eval_s_rho_singular(FH, s, 0)
    assert np.all(reg <= sing + 1e-15)
    # the entropy is nonpositive on [0, 1]
    assert np.all(sing <= 0.0)


@pytest.mark.parametrize("theta2", [0.0, -0.5, 1.0])
def test_derivative_consistency(theta2):
    p = FloryHugginsPotential(theta2=theta2)
    r = RegularizedPotential(p, 0.1)
    pts = np.array([-0.4, 0.05, 0.3, 0.62, 0.97, 1.3])
    for f in (lambda s, o: eval_s_rho_eps(r, s, o), lambda s, o: eval_s_phi(s, o)):
        errs = []
        for h in (1e-3, 1e-4):
            for order in (1, 2):
                fd = (f(pts + h, order - 1) - f(pts - h, order - 1)) / (2 * h)
                errs.append(np.abs(fd - f(pts, order)).max())
        # quadratic pieces are exact; otherwise second order
        for e1, e2 in ((errs[0], errs[2]), (errs[1], errs[3])):
            if e1 > 1e-9:
                assert math.log10(e1 / e2) >= 1.9


def test_certificate_values():
    # oracle: brute-force scan of the regularized potential on [-2, 3] at step 1e-4
    s = np.arange(-2.0, 3.0 + 1e-12, 1e-4)
    for eps in (0.1, 0.01):
        r = RegularizedPotential(FH, eps)
        cert = convexity_certificate(r)
        curv = eval_s_rho_eps(r, s, 2)
        assert cert.gamma3 == pytest.approx(curv.max(), rel=1e-12)
        assert cert.gamma2 == 0.0
        assert curv.min() >= 4.0 - 1e-12
        assert cert.gamma1 == pytest.approx(-eval_s_rho_eps(r, s, 0).min(), abs=1e-7)
    assert convexity_certificate(RegularizedPotential(FH, 0.1)).gamma3 == pytest.approx(100 / 9, rel=1e-12)


def test_certificate_lower_constants_eps_independent():
    a = convexity_certificate(RegularizedPotential(FH, 0.1))
    b = convexity_certificate(RegularizedPotential(FH, 0.01))
    assert a.gamma1 == pytest.approx(math.log(2), rel=1e-14)
    assert a.gamma1 == b.gamma1
    assert a.gamma2 == b.gamma2


def test_certificate_with_enthalpy():
    p = FloryHugginsPotential(theta2=3.0)
    cert = convexity_certificate(RegularizedPotential(p, 0.05))
    assert cert.gamma2 == 3.0
    assert cert.gamma3 == pytest.approx(3.0 + 1 / 0.05 + 1 / 0.95, rel=1e-12)


@given(st.floats(0.002, 0.2), st.floats(0.3, 1.0))
@settings(max_examples=50)
def test_curvature_grows_as_eps_shrinks(e_small, frac):
    e_big = min(0.24, e_small / frac + 1e-3)
    if not e_small < e_big:
        return
    s = np.linspace(-1.0, e_small, 50)
    small = eval_s_rho_eps(RegularizedPotential(FH, e_small), s, 2)
    big = eval_s_rho_eps(RegularizedPotential(FH, e_big), s, 2)
    assert np.all(small >= big)


def test_tail_coercivity_positive():
    k1 = tail_coercivity(RegularizedPotential(FH, 0.1))
    assert k1 > 0
    # the quadratic tail has curvature S''(eps) / 2 at infinity
    assert k1 <= 0.5 * (1 / 0.1 + 1 / 0.9)
