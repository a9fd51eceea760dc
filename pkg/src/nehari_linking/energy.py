"""Energy functional, its H^1 gradient and the admissibility functional."""
from dataclasses import asdict, dataclass

import numpy as np

from .grid import Field


@dataclass
class EnergyBreakdown:
    kinetic: float
    mass: float
    potential: float
    total: float
    nehari_residual: float
    g_omega: float

    def to_dict(self):
        return asdict(self)


def energy(u, model):
    """All parts of I(u) with one quadrature; nehari_residual = <I'(u), u>."""
    grid = u.grid
    lam = model.lam
    grad2 = grid.dirichlet_form(u, u)
    v = u.values
    mass2 = float(np.vdot(v, v)) * grid.cell
    pot = float(np.sum(model.F(v))) * grid.cell
    fu = model.nehari_sum(v, 1.0) * grid.cell
    pos = np.maximum(v, 0.0)
    pos2 = float(np.vdot(pos, pos)) * grid.cell
    kinetic = 0.5 * grad2
    mass = 0.5 * lam * mass2
    return EnergyBreakdown(kinetic=kinetic, mass=mass, potential=pot,
                           total=kinetic + mass - pot,
                           nehari_residual=grad2 + lam * mass2 - fu,
                           g_omega=grad2 + lam * mass2 - model.l_inf * pos2)


def total_energy(u, model):
    grid = u.grid
    v = u.values
    return (0.5 * grid.dirichlet_form(u, u) + 0.5 * model.lam * float(np.vdot(v, v)) * grid.cell
            - float(np.sum(model.F(v))) * grid.cell)


def gradient(u, model):
    """Riesz representative g of I'(u) in the (.,.)_Omega inner product.

    (g, phi)_Omega = <I'(u), phi> for every grid function phi.  Since
    (-Delta + lam)^-1 (-Delta u + lam u) = u on the grid, this is
    g = u - (-Delta + lam)^-1 f(u), which is how it is evaluated.
    """
    solver = u.grid.solver(model.lam)
    kf = solver.solve(model.f(u.values))
    return Field(u.grid, u.values - kf, _trusted=True)


def raw_residual(u, model):
    """-Delta u + lam u - f(u) at interior nodes (the strong-form residual)."""
    grid = u.grid
    out = -grid.laplacian_apply(u).values + model.lam * u.values - model.f(u.values)
    out[~grid.interior] = 0.0
    return Field(grid, out, _trusted=True)


def g_omega(u, model):
    grid = u.grid
    v = u.values
    pos = np.maximum(v, 0.0)
    return (grid.dirichlet_form(u, u) + model.lam * float(np.vdot(v, v)) * grid.cell
            - model.l_inf * float(np.vdot(pos, pos)) * grid.cell)


def residual_norm(u, model):
    """||gradient(u)||_Omega."""
    g = gradient(u, model)
    return float(np.sqrt(max(u.grid.norm2(g, model.lam), 0.0)))
