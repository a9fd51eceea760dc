"""Saturable nonlinearity f(t) = t^3 / (1 + s t^2) and the hypothesis audit.

The solver only ever touches a nonlinearity through ``f``, ``F``, ``fprime``,
``lam`` and ``l_inf``, so a tabulated user nonlinearity can stand in for the
model wherever the audit or the radial solver is concerned.
"""
from dataclasses import dataclass, field
import json
import math

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from . import _accel
from .errors import NoCrossing

SLACK = 1e-12


@dataclass(frozen=True)
class NonlinearityModel:
    """f(t) = t^3/(1 + s t^2) for t > 0, zero otherwise.

    ``growth`` holds (p1, p2, D) for the derivative growth bound
    |f^(k)(t)| <= D (t^(p1-k) + t^(p2-k)).
    """

    s: float = 0.5
    lam: float = 1.0
    growth: tuple = (2.0, 3.0, 6.0)

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError("saturation s must be positive")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")

    @property
    def l_inf(self):
        return 1.0 / self.s

    @property
    def admissible(self):
        return self.s * self.lam < 1.0

    def f(self, t):
        if np.ndim(t) == 0:
            t = float(t)
            if t <= 0.0:
                return 0.0
            return t ** 3 / (1.0 + self.s * t * t)
        return _accel.sat_f(t, self.s)

    def F(self, t):
        if np.ndim(t) == 0:
            return float(_accel.sat_F(np.array([float(t)]), self.s)[0])
        return _accel.sat_F(t, self.s)

    def fprime(self, t):
        if np.ndim(t) == 0:
            return float(_accel.sat_fprime(np.array([float(t)]), self.s)[0])
        return _accel.sat_fprime(t, self.s)

    def nehari_sum(self, u, tau):
        """Sum over nodes of f(tau u) u / tau."""
        return _accel.sat_nehari_sum(u, tau, self.s)

    def describe(self):
        return {"kind": "saturable", "s": self.s, "lambda": self.lam, "l_inf": self.l_inf}


class TabulatedNonlinearity:
    """User nonlinearity given by samples of f on a positive grid.

    A cubic spline through (0, 0) and the samples supplies f, its primitive and
    its derivative; l_inf is extrapolated from the top decade of the table.
    """

    def __init__(self, t_values, f_values, lam=1.0, growth=(2.0, 3.0, 6.0)):
        t = np.asarray(t_values, dtype=float)
        y = np.asarray(f_values, dtype=float)
        if t.ndim != 1 or t.size < 4 or np.any(np.diff(t) <= 0) or t[0] <= 0:
            raise ValueError("t_values must be positive and strictly increasing (>= 4 points)")
        self.lam = float(lam)
        self.growth = tuple(growth)
        self._t = np.concatenate([[0.0], t])
        self._spline = CubicSpline(self._t, np.concatenate([[0.0], y]), bc_type="not-a-knot")
        self._prim = self._spline.antiderivative()
        self._deriv = self._spline.derivative()
        self.t_max = float(t[-1])
        self.l_inf, self.l_inf_converged = _richardson_limit(t, y)

    def _clip(self, t):
        return np.minimum(np.maximum(np.asarray(t, dtype=float), 0.0), self.t_max)

    def f(self, t):
        out = np.where(np.asarray(t) > 0, self._spline(self._clip(t)), 0.0)
        return float(out) if np.ndim(t) == 0 else out

    def F(self, t):
        out = np.where(np.asarray(t) > 0, self._prim(self._clip(t)), 0.0)
        return float(out) if np.ndim(t) == 0 else out

    def fprime(self, t):
        out = np.where(np.asarray(t) > 0, self._deriv(self._clip(t)), 0.0)
        return float(out) if np.ndim(t) == 0 else out

    def nehari_sum(self, u, tau):
        pos = u[u > 0]
        return float(np.sum(self.f(tau * pos) * pos)) / tau

    @property
    def admissible(self):
        return bool(self.l_inf_converged and self.lam < self.l_inf)

    def describe(self):
        return {"kind": "tabulated", "lambda": self.lam, "l_inf": self.l_inf,
                "l_inf_converged": self.l_inf_converged, "points": int(self._t.size - 1)}


def _richardson_limit(t, y):
    """Estimate lim f(t)/t from the top decade, assuming a 1/t^2 correction."""
    q = y / t
    top = t[-1]
    k = int(np.searchsorted(t, top / 10.0))
    k = min(max(k, 0), t.size - 2)
    q_hi, q_lo = q[-1], q[k]
    ratio = (top / t[k]) ** 2
    estimate = q_hi + (q_hi - q_lo) / (ratio - 1.0) if ratio > 1 else q_hi
    converged = bool(abs(q_hi - q_lo) <= 1e-2 * max(abs(q_hi), 1e-300))
    return float(estimate), converged


def f_eval(model, t):
    return model.f(t)


def F_eval(model, t):
    return model.F(t)


def fprime_eval(model, t):
    return model.fprime(t)


def crossing_b(model):
    """The positive root of f(b) = lambda b."""
    if isinstance(model, NonlinearityModel):
        if not model.admissible:
            raise NoCrossing(f"s*lambda = {model.s * model.lam:g} >= 1: f(t) < lambda t for all t > 0")
        return math.sqrt(model.lam / (1.0 - model.s * model.lam))
    if not model.admissible:
        raise NoCrossing("tabulated f stays below lambda t on its table")
    ts = model._t[1:]
    gs = model.f(ts) - model.lam * ts
    idx = np.flatnonzero((gs[:-1] <= 0) & (gs[1:] > 0))
    if idx.size == 0:
        raise NoCrossing("no sign change of f(t) - lambda t on the table")
    i = idx[0]
    return brentq(lambda x: model.f(x) - model.lam * x, ts[i], ts[i + 1], xtol=1e-14, rtol=1e-14)


def default_t_grid(lo=1e-4, hi=1e4, n=400):
    return np.logspace(np.log10(lo), np.log10(hi), n)


@dataclass
class AuditReport:
    entries: list = field(default_factory=list)

    @property
    def passed(self):
        return all(e["pass"] for e in self.entries)

    def failed(self):
        return [e["name"] for e in self.entries if not e["pass"]]

    def entry(self, name):
        for e in self.entries:
            if e["name"] == name:
                return e
        raise KeyError(name)

    def add(self, name, ok, witness_t=None, detail=""):
        self.entries.append({"name": name, "pass": bool(ok),
                             "witness_t": None if witness_t is None else float(witness_t),
                             "detail": detail})

    def to_json(self):
        return json.dumps({"pass": self.passed, "hypotheses": self.entries}, indent=2)


def _first_violation(t, bad):
    idx = np.flatnonzero(bad)
    return None if idx.size == 0 else t[idx[0]]


def audit_hypotheses(model, t_grid=None, N=2):
    """Sampled check of the structural hypotheses on f.

    Failures are report entries, each with the grid value t where the sampled
    inequality breaks.
    """
    t = default_t_grid() if t_grid is None else np.asarray(t_grid, dtype=float)
    if t.size == 0 or np.any(t <= 0) or np.any(np.diff(t) <= 0):
        raise ValueError("t_grid must be nonempty, positive and strictly increasing")
    lam = model.lam
    report = AuditReport()
    f = np.asarray(model.f(t), dtype=float)
    F = np.asarray(model.F(t), dtype=float)
    fp = np.asarray(model.fprime(t), dtype=float)
    q = f / t

    # smoothness: zero extension, C^1 matching at 0, finite f'' by differences
    neg = -t[::-1]
    fneg = np.asarray(model.f(neg))
    d = 1e-6 * t
    fpp = (np.asarray(model.fprime(t + d)) - np.asarray(model.fprime(t - d))) / (2 * d)
    scale = max(1.0, float(np.max(np.abs(fp))))
    if np.any(fneg != 0.0):
        report.add("smoothness", False, _first_violation(neg, fneg != 0.0), "f nonzero on negatives")
    elif abs(fp[0]) > 1e-3 * scale or abs(f[0]) > 1e-3 * scale * t[0] + 1e-300:
        report.add("smoothness", False, t[0], "f or f' does not vanish at 0+ (C^1 gluing)")
    elif not np.all(np.isfinite(fpp)):
        report.add("smoothness", False, _first_violation(t, ~np.isfinite(fpp)), "f'' not finite")
    else:
        report.add("smoothness", True, None, "f = 0 on t <= 0, f(0+) = f'(0+) = 0, f'' finite; f''' unchecked")

    # growth bound for k = 0, 1, 2
    p1, p2, D = model.growth
    pbar = math.inf if N == 2 else (N + 2) / (N - 2)
    if not (1 < p1 <= p2 < pbar):
        report.add("growth", False, t[0], f"exponents p1={p1}, p2={p2} outside (1, {pbar})")
    else:
        worst = None
        for k, vals in enumerate((f, fp, fpp)):
            bound = D * (t ** (p1 - k) + t ** (p2 - k))
            bad = np.abs(vals) > bound * (1 + 1e-9)
            if np.any(bad):
                worst = (k, _first_violation(t, bad))
                break
        if worst:
            report.add("growth", False, worst[1], f"|f^({worst[0]})| exceeds D(t^(p1-k)+t^(p2-k)), D={D}")
        else:
            report.add("growth", True, None, f"p1={p1}, p2={p2}, D={D}, k=0..2")

    # f(t)/t strictly increasing
    bad = np.diff(q) <= -SLACK * np.maximum(np.abs(q[1:]), 1.0)
    report.add("fmono", not np.any(bad), _first_violation(t[1:], bad),
               "f(t)/t increasing on the grid")

    # asymptote l_inf with lambda < l_inf
    if isinstance(model, NonlinearityModel):
        l_inf, converged = model.l_inf, True
    else:
        l_inf, converged = _richardson_limit(t, f)
    if not converged:
        report.add("finfty", False, t[-1], f"f(t)/t not converged over top decade: {q[-1]:.6g}")
    elif not lam - l_inf < 0:
        report.add("finfty", False, t[-1], f"lambda - l_inf = {lam - l_inf:.6g} >= 0 (l_inf = {l_inf:.6g})")
    else:
        report.add("finfty", True, None, f"l_inf = {l_inf:.12g}")

    # non-quadraticity
    nq = f * t - 2 * F
    bad = nq < -SLACK * np.maximum(np.abs(f * t), 1.0)
    top = t >= t[-1] / 10.0
    growing = np.all(np.diff(nq[top]) > 0) if np.count_nonzero(top) > 1 else True
    if np.any(bad):
        report.add("NQ", False, _first_violation(t, bad), "f(t)t - 2F(t) < 0")
    elif not growing:
        report.add("NQ", False, t[-1], "f(t)t - 2F(t) not increasing over the top decade")
    else:
        report.add("NQ", True, None, f"min {nq.min():.3g}, top value {nq[-1]:.6g}")

    # natural constraint
    nc = fp - q
    bad = nc <= -SLACK
    report.add("iponh", not np.any(bad), _first_violation(t, bad), "f'(t) - f(t)/t > 0")

    # uniqueness criterion: g decreasing on [b, inf)
    try:
        b = crossing_b(model)
    except NoCrossing:
        report.add("serrin_tang", True, None, "no crossing b: criterion vacuous")
    else:
        sel = t > b * (1 + 1e-9)
        ts = t[sel]
        if ts.size < 2:
            report.add("serrin_tang", True, None, "grid has fewer than two points beyond b")
        else:
            g = (-lam * ts + ts * fp[sel]) / (-lam * ts + f[sel])
            bad = np.diff(g) > SLACK * np.maximum(np.abs(g[:-1]), 1.0)
            report.add("serrin_tang", not np.any(bad), _first_violation(ts[1:], bad),
                       f"g decreasing on [b, inf), b = {b:.12g}")
    return report
