import math

import numpy as np
import pytest

from nschs.config import ConfigError, RunConfig
from nschs.experiments import (
    converge,
    observed_order,
    perturb,
    restrict,
    sweep_eps,
    sweep_omega,
    unit_perturbation,
)
from nschs.grid import Grid2D


def small(**changes) -> RunConfig:
    base = {"grid.nx": 16, "grid.ny": 16, "run.t_end": 2e-3, "stepper.dt": 1e-4}
    base.update(changes)
    return RunConfig().with_changes(**base)


def test_restrict_averages():
    f = np.arange(16.0).reshape(4, 4)
    r = restrict(f, 2)
    assert r.shape == (2, 2)
    assert r[0, 0] == np.mean([0, 1, 4, 5])
    assert restrict(np.ones((8, 6)), 2).sum() == 12


def test_restrict_of_cell_means_is_exact_on_grid_means():
    rng = np.random.default_rng(0)
    fine = Grid2D(16, 8, 2.0, 1.0)
    f = rng.standard_normal(fine.shape)
    coarse = Grid2D(8, 4, 2.0, 1.0)
    assert coarse.mean(restrict(f, 2)) == pytest.approx(fine.mean(f), abs=1e-15)


def test_observed_order():
    assert observed_order(4.0, 1.0) == 2.0
    assert observed_order(1.0, 0.0) == math.inf
    assert math.isnan(observed_order(0.0, 0.0))


def test_sweep_list_validation():
    cfg = small()
    for bad in ([], [0.05, 0.1], [0.1, 0.1], [0.1, -0.05]):
        with pytest.raises(ConfigError):
            sweep_eps(cfg, bad)


def test_single_member_sweep():
    rep = sweep_eps(small(), [0.1])
    assert rep.exit_code == 0 and rep.distances == []
    assert rep.excursion_nonincreasing
    assert "excursion" in str(rep)


def test_omega_sweep_distances():
    rep = sweep_omega(small(**{"initial.phi_amplitude": 0.5, "initial.phi_modes": 20}), [0.4, 0.2, 0.1])
    assert rep.exit_code == 0
    assert len(rep.distances) == 2
    assert rep.distances_decreasing


def test_unit_perturbation():
    g = Grid2D(16, 12)
    v = unit_perturbation(g, 3)
    assert g.inner(v, v) == pytest.approx(1.0, rel=1e-14)
    assert abs(g.mean(v)) <= 1e-15
    assert np.array_equal(v, unit_perturbation(g, 3))


def test_perturb_zero_delta():
    rep = perturb(small(**{"run.output_every": 5}), 0.0)
    assert rep.exit_code == 0
    assert len(rep.t) == 5
    assert all(y == 0.0 for y in rep.Y) and all(z == 0.0 for z in rep.Z)


def test_perturb_linear_regime():
    cfg = small(**{"run.output_every": 10})
    a, b = perturb(cfg, 1e-5), perturb(cfg, 1e-7)
    assert a.Y[0] == pytest.approx(1e4 * b.Y[0], rel=1e-6)
    assert a.Y_amplification == pytest.approx(b.Y_amplification, rel=1e-3)
    with pytest.raises(ConfigError):
        perturb(cfg, -1.0)


def test_converge_preconditions():
    with pytest.raises(ConfigError, match="analytic"):
        converge(small())
    with pytest.raises(ConfigError):
        converge(small(**{"grid.nx": 2, "initial.phi": "smooth"}))


def test_converge_diffusion_only():
    # the coupling strength must stay positive, so a tiny theta stands in for theta = 0
    cfg = small(**{
        "grid.nx": 8, "grid.ny": 8, "grid.Lx": 4.0, "grid.Ly": 4.0,
        "params.theta": 1e-8, "stepper.ns_enabled": False, "stepper.dt": 1e-3, "run.t_end": 0.05,
        "initial.phi": "smooth", "initial.phi_amplitude": 0.5,
        "initial.rho": "smooth", "initial.rho_value": 0.4, "initial.rho_amplitude": 0.1,
    })
    rep = converge(cfg)
    assert abs(rep.spatial_order - 2.0) < 0.2
    assert rep.temporal_order >= 0.9
    assert rep.passed and "converge: pass" in str(rep)
