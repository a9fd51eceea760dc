"""Barycenter of a field and the two-bump witnesses with barycenter zero.

beta(u) is the centre of mass of the half-max truncation of the unit-ball
average of |u|.  It is invariant under u -> c u and moves with lattice
translations of u.
"""
from dataclasses import dataclass
import math

import numpy as np

from . import _accel
from .errors import BumpTruncated, UndefinedBarycenter
from .grid import Field
from .nehari import nehari_time

_OFFSETS = {}


def ball_offsets(h, N=2):
    """Lattice offsets k with |k| h <= 1 (the closed unit ball)."""
    if h > 0.25:
        raise ValueError(f"h = {h} too coarse for the unit-ball average (need h <= 0.25)")
    key = (round(h, 14), N)
    if key not in _OFFSETS:
        k = int(math.floor(1.0 / h + 1e-9))
        rng = np.arange(-k, k + 1)
        mesh = np.meshgrid(*([rng] * N), indexing="ij")
        pts = np.stack([x.ravel() for x in mesh], axis=1)
        keep = np.sum(pts * pts, axis=1) * h * h <= 1.0 + 1e-12
        _OFFSETS[key] = np.ascontiguousarray(pts[keep], dtype=np.int64)
    return _OFFSETS[key]


def ball_average(u):
    """mu(u) at every box node; values outside the domain count as zero."""
    offs = ball_offsets(u.grid.h, u.grid.N)
    return _accel.ball_sum(np.abs(u.values), offs) / len(offs)


@dataclass
class BarycenterReport:
    beta: np.ndarray
    mu_max: float
    support_nodes: int
    support_box: tuple
    weight: float


def _barycenter(u):
    grid = u.grid
    if grid.N != 2:
        raise NotImplementedError("barycenters are implemented for N = 2 grids")
    a = np.abs(u.values)
    peak = float(a.max())
    if peak == 0.0:
        raise UndefinedBarycenter("field vanishes identically")
    offs = ball_offsets(grid.h, 2)
    count = len(offs)
    r = int(np.max(np.abs(offs)))
    i, j = np.unravel_index(int(np.argmax(a)), a.shape)
    # mu at the peak of |u| bounds max mu from below; only nodes within one
    # ball radius of {|u| > lower/2} can exceed half of max mu.
    lower = float(_accel.ball_sum_box(a, offs, (i, i + 1, j, j + 1))[0, 0]) / count
    ii, jj = np.nonzero(a > 0.5 * lower)
    box = (max(ii.min() - r, 0), min(ii.max() + r + 1, a.shape[0]),
           max(jj.min() - r, 0), min(jj.max() + r + 1, a.shape[1]))
    mu = _accel.ball_sum_box(a, offs, box) / count
    mu_max = float(mu.max())
    hat = np.maximum(mu - 0.5 * mu_max, 0.0)
    weight = float(hat.sum())
    if not weight > 0:
        raise UndefinedBarycenter("half-max truncation is empty")
    ci = float(np.sum(hat.sum(axis=1) * np.arange(box[0], box[1]))) / weight
    cj = float(np.sum(hat.sum(axis=0) * np.arange(box[2], box[3]))) / weight
    beta = np.array([(ci - grid.n_half[0]) * grid.h, (cj - grid.n_half[1]) * grid.h])
    return BarycenterReport(beta=beta, mu_max=mu_max, support_nodes=int(np.count_nonzero(hat)),
                            support_box=tuple(int(b) for b in box), weight=weight * grid.cell)


def barycenter(u):
    return _barycenter(u).beta


def barycenter_report(u):
    return _barycenter(u)


def smoothstep_cutoff(t):
    """0 for t <= 1, 1 for t >= 2, cubic 3v^2 - 2v^3 in between (slope <= 1.5)."""
    v = np.clip(np.asarray(t, dtype=float) - 1.0, 0.0, 1.0)
    return v * v * (3.0 - 2.0 * v)


def half_max_radius(profile, h):
    """Radius r0 of the set {mu(w) > max mu(w) / 2} for the centred ground state."""
    offs = ball_offsets(h, 2)
    L = 8.0
    n = int(round(L / h))
    ax = np.arange(-n, n + 1) * h
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    w = profile(np.hypot(X, Y))
    mu = _accel.ball_sum(w, offs) / len(offs)
    inside = mu > 0.5 * mu.max()
    return float(np.hypot(X, Y)[inside].max())


@dataclass
class SWitness:
    field: Field
    tau: float
    beta: np.ndarray
    theta: np.ndarray
    R: float


def s_witness(profile, grid, R, theta, model):
    """Two cut-off bumps at +-R theta, projected onto the Nehari set.

    Each bump is multiplied by 1 - xi~(4|x -+ R theta| / R), so the two pieces
    have disjoint supports and, being mirror images, barycenter zero.
    """
    theta = np.asarray(theta, dtype=float)
    theta = theta / np.linalg.norm(theta)
    r0 = half_max_radius(profile, grid.h)
    if not R > 4.0 * grid.rho * r0:
        raise ValueError(f"R = {R} must exceed 4 rho r0 = {4 * grid.rho * r0:.4g}")
    margin = min(R / 2.0, 5.0 / math.sqrt(model.lam))
    for c in (R * theta, -R * theta):
        if not grid.contains(c, margin):
            raise BumpTruncated(f"witness bump at {c} is within {margin:.3g} of the box boundary")
    X, Y = grid.coords()
    d1 = np.hypot(X - R * theta[0], Y - R * theta[1])
    d2 = np.hypot(X + R * theta[0], Y + R * theta[1])
    z = profile(d1) * (1.0 - smoothstep_cutoff(4.0 * d1 / R)) \
        + profile(d2) * (1.0 - smoothstep_cutoff(4.0 * d2 / R))
    proj = nehari_time(grid.field(z), model)
    return SWitness(field=proj.projected, tau=proj.tau, beta=barycenter(proj.projected),
                    theta=theta, R=float(R))
