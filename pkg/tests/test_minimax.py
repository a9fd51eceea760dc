import numpy as np
import pytest

from nehari_linking.errors import NotProjectable
from nehari_linking.grid import ExteriorGrid
from nehari_linking.linking import bump
from nehari_linking.minimax import (
    is_symmetric, log_cutoff, nehari_descent, positive_fill, refine_solution,
    splitting_monitor, strictly_increasing, symmetrize,
)
from nehari_linking.nehari import nehari_residual


@pytest.fixture(scope="module")
def ring_state(profile, model):
    """Symmetric descent around a small hole (rho = 0.2) on a 281^2 box."""
    g = ExteriorGrid(h=0.1, R_out=14.0, rho=0.2)
    u0 = g.from_function(lambda x, y: log_cutoff(np.hypot(x, y), 0.2, 2.0) * profile(np.hypot(x, y)))
    return nehari_descent(u0, model, budget=200, m=profile.m, symmetric=True)


def test_symmetrize(small_grid, rng):
    u = small_grid.field(rng.standard_normal(small_grid.shape))
    assert not is_symmetric(u)
    s = symmetrize(u)
    assert is_symmetric(s, rtol=0.0)
    assert np.array_equal(symmetrize(s).values, s.values)


def test_symmetric_descent_converges_inside_window(ring_state, profile):
    state, diag = ring_state
    assert state.status == "Converged"
    assert state.residual <= 1e-6
    assert profile.m * 1.01 < state.energy < 2 * profile.m * 0.99
    assert diag.window_ok and not diag.splitting_suspected
    assert all(b <= a for a, b in zip(state.energy_trace, state.energy_trace[1:]))
    assert is_symmetric(state.u, rtol=0.0)


def test_descent_log_rows(ring_state):
    state, _ = ring_state
    row = state.log[-1]
    assert set(row) == {"iter", "energy", "residual", "tau", "beta", "step"}
    assert len(state.log) == state.iter + 1


def test_refinement_is_h_stable(ring_state, profile, model):
    state, _ = ring_state
    fine, _ = refine_solution(state.u, profile, model, half_width=10.0)
    assert fine.u.grid.h == pytest.approx(0.05)
    assert fine.status == "Converged"
    assert abs(fine.energy - state.energy) <= 1e-2 * state.energy


def test_single_bump_escapes(profile, model):
    g = ExteriorGrid(h=0.1, R_out=16.0, rho=1.0)
    state, diag = nehari_descent(bump(profile, g, (4.0, 0.0), model), model, budget=300, m=profile.m)
    assert state.status == "Escaped"
    assert diag.splitting_suspected
    drift = diag.drift
    assert strictly_increasing(drift[-20:])
    assert abs(state.energy - profile.m) <= 1e-2 * profile.m
    assert nehari_residual(state.u, model) == pytest.approx(0.0, abs=1e-8 * g.norm2(state.u, model.lam))


def test_descent_without_m_runs_to_budget(profile, model, small_grid):
    u0 = bump(profile, small_grid, (5.0, 0.0), model)
    state, diag = nehari_descent(u0, model, budget=3)
    assert state.status == "Exhausted" and state.iter == 3
    assert not diag.window_ok


def test_inadmissible_start(small_grid, model):
    narrow = small_grid.from_function(lambda x, y: np.exp(-((x - 5) ** 2 + y ** 2) / 0.02))
    with pytest.raises(NotProjectable):
        nehari_descent(narrow, model)


def test_splitting_monitor(profile, small_grid):
    trace = [small_grid.from_function(lambda x, y, k=k: profile(np.hypot(x - 3 - 0.2 * k, y)))
             for k in range(22)]
    diag = splitting_monitor(trace, profile)
    assert diag.splitting_suspected
    assert max(diag.fit_residuals) <= 0.05
    still = splitting_monitor([trace[0]] * 20, profile)
    assert not still.splitting_suspected
    with pytest.raises(ValueError):
        splitting_monitor(trace[:5], profile)


def test_positive_fill(small_grid, model, profile):
    u = bump(profile, small_grid, (5.0, 0.0), model)
    v = u.values.copy()
    far = small_grid.radius > 10.5
    v[far & small_grid.interior] = -1e-20
    filled, count = positive_fill(small_grid.field(v), model)
    inner = filled.values[small_grid.interior]
    assert count > 0 and inner.min() > 0
    bulk = (u.values > 1e-6) & ~far
    np.testing.assert_array_equal(filled.values[bulk], u.values[bulk])
    # maximum principle: the repair never exceeds the values it replaced
    assert np.max(filled.values[far]) <= np.max(u.values[far])
    untouched, n = positive_fill(u, model)
    assert n == 0 and untouched is u
