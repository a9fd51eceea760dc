"""Projection onto the Nehari manifold along rays t -> t u."""
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import brentq

from .energy import g_omega
from .errors import NotProjectable
from .grid import Field
from .limit_problem import radial_integrals, sphere_area

TAU_LO = 1e-6
TAU_CAP = 1e6


@dataclass
class ProjectionResult:
    tau: float
    projected: Field
    residual_at_tau: float
    bracket: tuple
    g_omega: float
    norm2: float


def nehari_time(u, model, tol=1e-10):
    """The unique tau > 0 with <I'(tau u), tau u> = 0.

    The scalar function phi(tau) = ||u||^2 - int f(tau u) u / tau is
    decreasing for admissible u, positive near 0 and negative for large tau;
    its root is found by Brent's method on a doubling bracket.
    """
    grid = u.grid
    v = u.values
    if not np.any(v > 0):
        raise NotProjectable("u+ vanishes identically")
    norm2 = grid.norm2(u, model.lam)
    g = g_omega(u, model)
    if g >= -1e-12 * norm2:
        raise NotProjectable(f"G_Omega(u) = {g:.6g} is not negative (||u||^2 = {norm2:.6g})")
    cell = grid.cell

    def phi(tau):
        return norm2 - cell * model.nehari_sum(v, tau)

    if not phi(TAU_LO) > 0:
        raise NotProjectable("ray energy is not increasing near tau = 0")
    lo, hi = TAU_LO, 1.0
    while phi(hi) >= 0:
        lo = hi
        hi *= 2.0
        if hi > TAU_CAP:
            raise NotProjectable(f"no sign change of <I'(tu), tu> below tau = {TAU_CAP:g}")
    if lo == TAU_LO:
        # tighten from above so Brent starts on a short interval
        while hi / 2.0 > TAU_LO and phi(hi / 2.0) < 0:
            hi /= 2.0
        lo = max(TAU_LO, hi / 2.0)
    tau = brentq(phi, lo, hi, xtol=1e-300, rtol=max(0.1 * tol, 1e-15), maxiter=200)
    res = phi(tau)
    return ProjectionResult(tau=float(tau), projected=Field(grid, tau * v, _trusted=True),
                            residual_at_tau=float(res * tau * tau), bracket=(lo, hi),
                            g_omega=float(g), norm2=float(norm2))


def radial_nehari_time(profile, model, tol=1e-12):
    """Nehari time of the radial profile itself, by radial quadrature on R^N."""
    q = radial_integrals(profile, model)
    norm2 = q["grad2"] + profile.lam * q["mass2"]
    r, w = profile.r, profile.w
    weight = sphere_area(profile.N) * r ** (profile.N - 1)

    def phi(tau):
        return norm2 - simpson(np.asarray(model.f(tau * w)) * w * weight, x=r) / tau

    lo, hi = 0.5, 2.0
    while phi(hi) > 0:
        hi *= 2.0
    while phi(lo) < 0:
        lo /= 2.0
    return float(brentq(phi, lo, hi, xtol=1e-300, rtol=max(tol, 1e-15)))


def project(u, model, tol=1e-10):
    return nehari_time(u, model, tol).projected


def nehari_residual(u, model):
    """<I'(u), u>."""
    grid = u.grid
    return grid.norm2(u, model.lam) - grid.cell * model.nehari_sum(u.values, 1.0)


class ConstraintDerivative(NamedTuple):
    value: float
    degenerate: bool


def natural_constraint_derivative(u, model, tol=1e-6):
    """Second derivative of t -> I(t u) at t = 1 for u on the Nehari set.

    It equals int_{u>0} u^2 (f(u)/u - f'(u)); negative on the manifold, which
    is what makes the constraint natural.  A nonpositive u is flagged as
    degenerate and reported as 0.
    """
    v = u.values
    pos = v[v > 0]
    if pos.size == 0:
        return ConstraintDerivative(0.0, True)
    norm2 = u.grid.norm2(u, model.lam)
    if abs(nehari_residual(u, model)) > tol * norm2:
        raise ValueError("u is not on the Nehari manifold; project it first")
    val = float(np.sum(model.f(pos) * pos - model.fprime(pos) * pos * pos)) * u.grid.cell
    return ConstraintDerivative(val, False)
