import numpy as np
import pytest

from conftest import random_field
from nehari_linking.energy import (
    energy, g_omega, gradient, raw_residual, residual_norm, total_energy,
)
from nehari_linking.linking import bump
from nehari_linking.nehari import nehari_time


def test_breakdown_is_consistent(small_grid, model, rng):
    u = random_field(small_grid, rng)
    e = energy(u, model)
    assert e.total == pytest.approx(total_energy(u, model), rel=1e-13)
    assert e.total == pytest.approx(e.kinetic + e.mass - e.potential, rel=1e-14)
    assert e.g_omega == pytest.approx(g_omega(u, model), rel=1e-13)
    assert set(e.to_dict()) == {"kinetic", "mass", "potential", "total", "nehari_residual", "g_omega"}


@pytest.mark.parametrize("trial", range(3))
def test_gradient_matches_directional_differences(small_grid, model, trial):
    rng = np.random.default_rng(100 + trial)
    g = small_grid
    u = random_field(g, rng, spread=4.0)
    phi = random_field(g, rng, spread=4.0)
    grad = gradient(u, model)
    pairing = g.inner_product_h1(grad, phi, model.lam)
    eps = 1e-5
    fd = (total_energy(u + eps * phi, model) - total_energy(u - eps * phi, model)) / (2 * eps)
    assert abs(fd - pairing) <= 1e-4 * max(abs(pairing), 1.0)


def test_projected_far_bump_has_limit_energy(small_grid, model, profile):
    proj = nehari_time(bump(profile, small_grid, (6.0, 0.0), model), model)
    e = total_energy(proj.projected, model)
    assert e == pytest.approx(profile.m, rel=2e-3)
    # a translated ground state nearly solves the equation
    rel = residual_norm(proj.projected, model) / np.sqrt(small_grid.norm2(proj.projected, model.lam))
    assert rel < 0.05


def test_strong_residual_vanishes_for_zero(small_grid, model):
    z = small_grid.zeros()
    assert np.all(raw_residual(z, model).values == 0)
    assert residual_norm(z, model) == 0.0


def test_grid_quadrature_matches_radial(profile, model):
    from nehari_linking.grid import ExteriorGrid
    from nehari_linking.limit_problem import radial_integrals

    g = ExteriorGrid(h=0.1, R_out=20.0, rho=0.05)
    w2 = g.from_function(lambda x, y: profile(np.hypot(x - 6.0, y)) ** 2)
    assert g.integrate(w2) == pytest.approx(radial_integrals(profile, model)["mass2"], rel=1e-3)


def test_pairings_and_homogeneity(small_grid, model, profile):
    u = bump(profile, small_grid, (5.0, 2.0), model)
    e = energy(u, model)
    pairing = small_grid.inner_product_h1(gradient(u, model), u, model.lam)
    assert e.nehari_residual == pytest.approx(pairing, rel=1e-8)
    for c in (0.3, 2.5):
        assert g_omega(c * u, model) == pytest.approx(c * c * g_omega(u, model), rel=1e-13)
    assert g_omega(u, model) < 0
    assert g_omega(-1.0 * u, model) > 0


def test_linear_case_gradient_is_identity(small_grid, rng):
    from nehari_linking.nonlinearity import NonlinearityModel

    # with f tiny, the gradient of I is the Riesz map of u itself
    weak = NonlinearityModel(s=0.5, lam=1.0)
    u = 1e-6 * random_field(small_grid, rng)
    g = gradient(u, weak)
    diff = g - u
    assert small_grid.norm2(diff, 1.0) <= 1e-20 * small_grid.norm2(u, 1.0)
