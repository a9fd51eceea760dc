import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_field
from nehari_linking.energy import total_energy
from nehari_linking.errors import NotProjectable
from nehari_linking.linking import bump
from nehari_linking.nehari import (
    natural_constraint_derivative, nehari_residual, nehari_time, project, radial_nehari_time,
)


@pytest.fixture(scope="module")
def far_bump(small_grid, model, profile):
    return bump(profile, small_grid, (6.0, 0.0), model)


def test_ground_state_is_on_its_own_nehari_set(profile, model):
    assert radial_nehari_time(profile, model) == pytest.approx(1.0, abs=1e-3)


def test_projection_lands_on_manifold(far_bump, model):
    res = nehari_time(far_bump, model)
    u = res.projected
    assert abs(nehari_residual(u, model)) <= 1e-9 * u.grid.norm2(u, model.lam)
    lo, hi = res.bracket
    assert lo <= res.tau <= hi


@given(c=st.floats(min_value=0.05, max_value=50.0))
@settings(max_examples=20, deadline=None)
def test_projection_is_scale_invariant(far_bump, model, c):
    a = project(far_bump, model, tol=1e-13).values
    b = project(c * far_bump, model, tol=1e-13).values
    assert np.max(np.abs(a - b)) <= 1e-8 * np.max(np.abs(a))


def test_projection_maximises_along_ray(far_bump, model):
    res = nehari_time(far_bump, model)
    e = total_energy(res.projected, model)
    for k in (0.9, 0.99, 1.01, 1.1):
        assert total_energy(k * res.projected, model) < e


def test_bump_times_approach_one(model, profile):
    from nehari_linking.grid import ExteriorGrid

    # the times settle monotonically on the grid's own value for a free
    # ground state, which sits O(h^2) away from 1
    g = ExteriorGrid(h=0.1, R_out=30.0)
    taus = [nehari_time(bump(profile, g, (R, 0.0), model), model, tol=1e-15).tau for R in (8, 12, 16)]
    assert taus[0] > taus[1] > taus[2]
    assert abs(taus[2] - 1.0) <= 1e-3


def test_not_projectable(small_grid, model, rng):
    with pytest.raises(NotProjectable):
        nehari_time(-1.0 * random_field(small_grid, rng), model)
    # a narrow bump pays more gradient than the asymptotic slope can return
    narrow = small_grid.from_function(lambda x, y: np.exp(-((x - 5) ** 2 + y ** 2) / 0.02))
    with pytest.raises(NotProjectable):
        nehari_time(narrow, model)


def test_natural_constraint(far_bump, model, rng, small_grid):
    u = project(far_bump, model)
    d = natural_constraint_derivative(u, model)
    assert not d.degenerate and d.value < 0
    assert natural_constraint_derivative(-1.0 * u, model).degenerate
    with pytest.raises(ValueError):
        natural_constraint_derivative(2.0 * u, model)
