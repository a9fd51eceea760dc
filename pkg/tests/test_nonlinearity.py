import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nehari_linking.errors import NoCrossing
from nehari_linking.nonlinearity import (
    NonlinearityModel, TabulatedNonlinearity, audit_hypotheses, crossing_b,
)

positive = st.floats(min_value=1e-3, max_value=1e3, allow_nan=False)
saturations = st.floats(min_value=0.05, max_value=0.95)


def test_closed_forms(model):
    t = np.array([0.1, 1.0, 2.0, 10.0])
    np.testing.assert_allclose(model.f(t), t ** 3 / (1 + 0.5 * t ** 2), rtol=1e-14)
    F_exact = t ** 2 / (2 * 0.5) - np.log1p(0.5 * t ** 2) / (2 * 0.5 ** 2)
    np.testing.assert_allclose(model.F(t), F_exact, rtol=1e-12)
    assert model.l_inf == 2.0
    assert model.f(-3.0) == 0.0 and model.F(-3.0) == 0.0 and model.fprime(-1.0) == 0.0


def test_small_t_branch_of_F_is_continuous(model):
    # the primitive switches to a series for small s t^2
    t = np.sqrt(np.array([0.999e-3, 1.001e-3]) / model.s)
    F = model.F(t)
    np.testing.assert_allclose(F, t ** 4 / 4 - model.s * t ** 6 / 6 + model.s ** 2 * t ** 8 / 8, rtol=1e-9)


@given(t=positive, s=saturations)
@settings(max_examples=60, deadline=None)
def test_primitive_and_derivative_agree_with_differences(t, s):
    m = NonlinearityModel(s=s)
    d = 1e-5 * t
    dF = (m.F(t + d) - m.F(t - d)) / (2 * d)
    df = (m.f(t + d) - m.f(t - d)) / (2 * d)
    assert dF == pytest.approx(m.f(t), rel=1e-6)
    assert df == pytest.approx(m.fprime(t), rel=1e-6)


@given(a=positive, b=positive, s=saturations)
@settings(max_examples=60, deadline=None)
def test_structural_inequalities(a, b, s):
    m = NonlinearityModel(s=s)
    lo, hi = sorted((a, b))
    if hi > lo * (1 + 1e-9):
        assert m.f(hi) / hi > m.f(lo) / lo
    # f(t) t - 2 F(t) >= 0 and f'(t) > f(t)/t
    assert m.f(a) * a - 2 * m.F(a) >= -1e-12 * m.f(a) * a
    assert m.fprime(a) > m.f(a) / a


def test_crossing(model):
    b = crossing_b(model)
    assert b == pytest.approx(math.sqrt(2.0), rel=1e-15)
    assert model.f(b) == pytest.approx(model.lam * b, rel=1e-14)
    with pytest.raises(NoCrossing):
        crossing_b(NonlinearityModel(s=2.0, lam=1.0))


def test_audit_default_passes(model):
    rep = audit_hypotheses(model)
    assert rep.passed, rep.entries
    assert [e["name"] for e in rep.entries] == [
        "smoothness", "growth", "fmono", "finfty", "NQ", "iponh", "serrin_tang"]


@pytest.mark.parametrize("s,lam", [(2.0, 1.0), (0.5, 3.0)])
def test_audit_flags_lambda_above_asymptote(s, lam):
    rep = audit_hypotheses(NonlinearityModel(s=s, lam=lam))
    assert rep.failed() == ["finfty"]
    assert rep.entry("finfty")["witness_t"] is not None


def test_pure_power_fails_only_the_asymptote():
    t = np.logspace(-3, 3, 300)
    tab = TabulatedNonlinearity(t, t ** 3)
    rep = audit_hypotheses(tab, t_grid=np.logspace(-2, 2.9, 200))
    assert rep.failed() == ["finfty"]


def test_tabulated_model_matches_closed_form(model):
    t = np.logspace(-3, 4, 2000)
    tab = TabulatedNonlinearity(t, model.f(t))
    probe = np.array([0.05, 0.7, 3.0, 40.0])
    np.testing.assert_allclose(tab.f(probe), model.f(probe), rtol=1e-5)
    assert tab.l_inf == pytest.approx(2.0, rel=1e-6)
    assert tab.admissible
    assert crossing_b(tab) == pytest.approx(math.sqrt(2), rel=1e-6)


@pytest.mark.parametrize("bad", [[], [0.0, 1.0], [2.0, 1.0]])
def test_audit_rejects_bad_t_grid(model, bad):
    with pytest.raises(ValueError):
        audit_hypotheses(model, t_grid=bad)


def test_model_validation():
    with pytest.raises(ValueError):
        NonlinearityModel(s=0.0)
    with pytest.raises(ValueError):
        NonlinearityModel(lam=-1.0)
