"""Projected gradient descent on the Nehari set, the linking minimax and
escape diagnostics for minimizing sequences.
"""
from dataclasses import dataclass, field
import math

import numpy as np
from scipy.ndimage import map_coordinates

from . import _accel
from .barycenter import barycenter
from .energy import gradient, total_energy
from .errors import ConstraintLost, GeometryBreach, NotProjectable, UndefinedBarycenter
from .grid import ExteriorGrid, Field
from .linking import SurfaceBumps, geometry_scan
from .barycenter import smoothstep_cutoff
from .nehari import nehari_residual, nehari_time

ARMIJO_C = 1e-4
BACKTRACK = 0.5
MIN_STEP = 2.0 ** -30


def symmetrize(u):
    """Average of u over the reflections x_i -> -x_i (the grid is centred)."""
    a = u.values
    out = a
    for ax in range(a.ndim):
        out = 0.5 * (out + np.flip(out, axis=ax))
    return Field(u.grid, out, _trusted=True)


def is_symmetric(u, rtol=1e-10):
    a = u.values
    scale = float(np.max(np.abs(a))) or 1.0
    return all(float(np.max(np.abs(a - np.flip(a, axis=ax)))) <= rtol * scale for ax in range(a.ndim))


@dataclass
class DescentState:
    u: Field
    energy: float
    residual: float = float("inf")
    iter: int = 0
    status: str = "Running"
    tau: float = 1.0
    step: float = 0.0
    beta_trace: list = field(default_factory=list)
    energy_trace: list = field(default_factory=list)
    residual_trace: list = field(default_factory=list)
    norm_trace: list = field(default_factory=list)
    log: list = field(default_factory=list)


@dataclass
class PSDiagnostics:
    norms: list
    bound: float
    drift: list
    splitting_suspected: bool
    window_ok: bool
    fit_residuals: list = field(default_factory=list)

    def to_dict(self):
        return {"bound": self.bound, "splitting_suspected": self.splitting_suspected,
                "window_ok": self.window_ok, "final_drift": self.drift[-1] if self.drift else None,
                "n": len(self.norms),
                "final_fit_residual": self.fit_residuals[-1] if self.fit_residuals else None}


def strictly_increasing(seq):
    return all(b > a for a, b in zip(seq[:-1], seq[1:]))


def in_window(energy, m, delta):
    return m + delta < energy < 2.0 * m - delta


def descent_step(u, energy, model, symmetric=False, proj_tol=1e-10):
    """One Armijo step of u <- Pi(u - alpha g) with the H^1 gradient g.

    Returns (u_new, energy_new, residual_at_u, alpha, tau).  The residual is
    ||g||, which bounds the norm of the tangential gradient from above.
    """
    g = gradient(u, model)
    if symmetric:
        g = symmetrize(g)
    gn2 = u.grid.norm2(g, model.lam)
    residual = math.sqrt(max(gn2, 0.0))
    alpha = 1.0
    last_trial = None
    while alpha >= MIN_STEP:
        trial = u - alpha * g
        if symmetric:
            # keep rounding noise from seeding symmetry-breaking modes
            trial = symmetrize(trial)
        last_trial = trial
        try:
            proj = nehari_time(trial, model, proj_tol)
        except NotProjectable:
            alpha *= BACKTRACK
            continue
        e_new = total_energy(proj.projected, model)
        if e_new <= energy - ARMIJO_C * alpha * gn2:
            return proj.projected, e_new, residual, alpha, proj.tau
        alpha *= BACKTRACK
    if last_trial is not None and residual > 0:
        try:
            nehari_time(last_trial, model, proj_tol)
        except NotProjectable as exc:
            raise ConstraintLost(f"iterate left the admissible set: {exc}", iterate=last_trial) from exc
    return u, energy, residual, 0.0, 1.0


def nehari_descent(u0, model, budget=500, tol=1e-6, m=None, symmetric=False,
                   window=20, plateau=1e-2, delta=None, proj_tol=1e-10,
                   log=None, snapshot_every=0):
    """Constrained steepest descent for I on the Nehari set.

    Stops with Converged (residual <= tol, energy inside the window),
    Rejected (residual <= tol outside it), Escaped (the barycenter drifts
    outward for ``window`` consecutive steps while the energy sits within
    ``plateau * m`` of m) or Exhausted.  ``m`` is the limit energy; without
    it neither the window nor the escape test is applied.
    """
    proj = nehari_time(u0, model, proj_tol)
    u = proj.projected
    if symmetric:
        u = symmetrize(u)
    state = DescentState(u=u, energy=total_energy(u, model), tau=proj.tau)
    delta = (1e-2 * m if m is not None else 0.0) if delta is None else delta
    snapshots = []
    while True:
        try:
            b = barycenter(state.u)
            state.beta_trace.append([float(b[0]), float(b[1])])
        except UndefinedBarycenter:
            state.beta_trace.append([float("nan"), float("nan")])
        state.energy_trace.append(state.energy)
        state.norm_trace.append(math.sqrt(state.u.grid.norm2(state.u, model.lam)))
        if snapshot_every and state.iter % snapshot_every == 0:
            snapshots.append(state.u.copy())
        if state.iter >= budget:
            state.status = "Exhausted"
            break
        u_new, e_new, res, alpha, tau = descent_step(state.u, state.energy, model, symmetric, proj_tol)
        state.residual = res
        state.residual_trace.append(res)
        row = {"iter": state.iter, "energy": state.energy, "residual": res, "tau": tau,
               "beta": state.beta_trace[-1], "step": alpha}
        state.log.append(row)
        if log:
            log(row)
        if res <= tol:
            ok = m is None or in_window(state.energy, m, delta)
            state.status = "Converged" if ok else "Rejected"
            break
        if alpha == 0.0:
            state.status = "Stalled"
            break
        feas = nehari_residual(u_new, model)
        scale = u_new.grid.norm2(u_new, model.lam)
        assert abs(feas) <= max(10 * proj_tol, 1e-9) * scale, "accepted iterate is off the Nehari set"
        assert e_new <= state.energy, "energy increased on an accepted step"
        state.u, state.energy, state.tau, state.step = u_new, e_new, tau, alpha
        state.iter += 1
        if m is not None and _escaping(state, m, window, plateau):
            state.status = "Escaped"
            break
    diag = _diagnostics(state, m, delta, window, plateau)
    state.snapshots = snapshots
    return state, diag


def _escaping(state, m, window, plateau):
    if len(state.beta_trace) < window + 1:
        return False
    drift = [math.hypot(*b) for b in state.beta_trace[-window:]]
    if not strictly_increasing(drift):
        return False
    return abs(state.energy - m) <= plateau * m


def _diagnostics(state, m, delta, window, plateau):
    drift = [math.hypot(*b) for b in state.beta_trace]
    return PSDiagnostics(norms=list(state.norm_trace), bound=max(state.norm_trace),
                         drift=drift, splitting_suspected=state.status == "Escaped",
                         window_ok=bool(m is not None and in_window(state.energy, m, delta)))


def splitting_monitor(trace, profile, window=20, fit_tol=0.05):
    """Look for a single translated copy of w running away in a sequence of fields.

    Each snapshot is compared with a w-bump centred at its barycenter, with the
    amplitude fitted by least squares; the relative L^2 misfit is recorded.
    Escape is flagged when the barycenter moves strictly outward over the last
    ``window`` snapshots and the final misfit is below ``fit_tol``.
    """
    if len(trace) < window:
        raise ValueError(f"need at least {window} snapshots")
    norms, drift, fits = [], [], []
    for u in trace:
        grid = u.grid
        b = barycenter(u)
        X, Y = grid.coords()
        w = profile(np.hypot(X - b[0], Y - b[1]))
        w[~grid.interior] = 0.0
        v = u.values
        amp = float(np.vdot(v, w)) / float(np.vdot(w, w))
        misfit = math.sqrt(float(np.vdot(v - amp * w, v - amp * w)) / float(np.vdot(v, v)))
        norms.append(math.sqrt(float(np.vdot(v, v)) * grid.cell))
        drift.append(float(np.hypot(*b)))
        fits.append(misfit)
    tail = drift[-window:]
    flag = strictly_increasing(tail) and fits[-1] <= fit_tol
    return PSDiagnostics(norms=norms, bound=max(norms), drift=drift, splitting_suspected=bool(flag),
                         window_ok=False, fit_residuals=fits)


# ---------------------------------------------------------------------------
# linking minimax
# ---------------------------------------------------------------------------

def log_cutoff(r, rho, outer):
    """Capacity-type hole profile: log(r/rho)/log(outer/rho) clipped to [0, 1]."""
    return np.clip(np.log(np.maximum(r, 1e-300) / rho) / math.log(outer / rho), 0.0, 1.0)


class ContractedSurface:
    """Boundary-fixing deformation of the sampled surface.

    The sample (y, t) becomes the projection of chi * w(. - R z) with
    z = t y + (1 - t) x0, so every bump slides along a straight line towards
    the centre of the disk.  The hole profile chi blends the smoothstep cutoff
    (used on the boundary t in {0, 1}) with a logarithmic one, weighted by
    sin(pi t); only the latter lets a bump sitting on the obstacle stay in the
    admissible cone.
    """

    def __init__(self, config, profile, grid, model, outer_factor=10.0):
        self.config = config
        self.profile = profile
        self.grid = grid
        self.model = model
        X, Y = grid.coords()
        self._X, self._Y = X, Y
        r = np.hypot(X, Y)
        self._smooth = smoothstep_cutoff(r / grid.rho)
        self._log = log_cutoff(r, grid.rho, outer_factor * grid.rho)

    def raw(self, y, t):
        x0 = np.asarray(self.config.x0, dtype=float)
        z = self.config.R * (t * np.asarray(y, dtype=float) + (1.0 - t) * x0)
        s = math.sin(math.pi * t) if 0.0 < t < 1.0 else 0.0
        chi = (1.0 - s) * self._smooth + s * self._log
        w = self.profile(np.hypot(self._X - z[0], self._Y - z[1]))
        return self.grid.field(chi * w)


class _Sample:
    __slots__ = ("key", "u", "energy", "residual", "symmetric", "beta", "steps")

    def __init__(self, key, u, energy):
        self.key = key
        self.symmetric = is_symmetric(u)
        self.u = symmetrize(u) if self.symmetric else u
        self.energy = energy
        self.residual = float("inf")
        self.beta = None
        self.steps = 0


def _positivity(u):
    grid = u.grid
    vals = u.values[grid.interior]
    support = vals > 1e-8 * float(vals.max())
    return float(vals.min()), float(vals[support].min())


def positive_fill(u, model, floor=1e-10, sweeps=200):
    """Replace the far-field values below floor * max(u) by a decaying solution
    of the linearised equation -Delta v + lam v = 0 seeded with u+.

    Rounding noise leaves ~1e-20 values of either sign where the true
    solution is exponentially small; this repairs the sign without touching
    the bulk of the field.
    """
    grid = u.grid
    v = np.maximum(u.values, 0.0).copy()
    active = grid.interior & (v < floor * float(v.max()))
    if not np.any(active):
        return u, 0
    coef = 1.0 / (2.0 * grid.N + model.lam * grid.h * grid.h)
    v = _accel.positive_fill(v, active, coef, sweeps)
    v[~grid.interior] = 0.0
    return Field(grid, v, _trusted=True), int(np.count_nonzero(active))


def linking_minimax(config, profile, grid, model, budget=400, tol=1e-6, band=0.05,
                    scan=None, deform=True, delta=None, breach_tol=None, log=None, progress=None):
    """Evolve the sampled linking surface by boundary-fixed descent.

    Interior samples whose energy is within ``band * m`` of the current
    maximum take one descent step per sweep; reflection-symmetric samples
    descend inside the symmetric subspace (their barycenter stays at the
    origin, so they remain in S).  The sweep ends when the argmax sample has
    residual <= tol.  Returns (solution, report).

    With ``deform`` the straight-line surface is first replaced by the
    contracted one (see ContractedSurface) whenever all of its samples are
    admissible; both are legitimate boundary-fixing deformations.  Falling
    more than ``breach_tol`` below the sampled inf_S raises GeometryBreach.
    """
    m = profile.m
    delta = 1e-2 * m if delta is None else delta
    breach_tol = delta if breach_tol is None else breach_tol
    scan = scan or geometry_scan(config, profile, grid, model)
    verdict = scan.verdict()
    if not scan.passed():
        raise GeometryBreach(f"linking geometry fails at R = {config.R}: {verdict['inequalities']}", run=scan)
    ys = config.y_samples
    ts = config.t_samples
    interior = [(j, k) for j in range(config.n_y) for k in range(config.n_t - 1) if k > 0 or j == 0]

    bumps = SurfaceBumps(config, profile, grid, model)
    surface = {"kind": "linear", "note": ""}
    energies = {}
    for r in scan.records:
        k = int(round(r["t"] * (config.n_t - 1)))
        if (r["y_index"], k) in interior:
            energies[(r["y_index"], k)] = r["I_omega"]

    def original(key):
        j, k = key
        return nehari_time(bumps.surface(ys[j], float(ts[k])), model)

    make = original
    if deform:
        contracted = ContractedSurface(config, profile, grid, model)
        trial = {}
        try:
            for key in interior:
                j, k = key
                proj = nehari_time(contracted.raw(ys[j], float(ts[k])), model)
                trial[key] = total_energy(proj.projected, model)
        except NotProjectable as exc:
            surface["note"] = f"contraction leaves the admissible cone at sample {key}: {exc}"
        else:
            surface["kind"] = "contracted"
            surface["linear_max"] = max(energies.values())
            energies = trial
            make = lambda key: nehari_time(contracted.raw(ys[key[0]], float(ts[key[1]])), model)  # noqa: E731
    surface["initial_max"] = max(energies.values())
    if progress:
        progress(f"surface {surface['kind']}, max {surface['initial_max']:.10g}")

    live = {}
    s_members = []
    inf_s = scan.inf_S_sampled
    history = []
    status = "Exhausted"
    argmax = None
    sweep = 0
    for sweep in range(budget):
        top = max(energies.values())
        active = [key for key, e in energies.items() if e >= top - band * m]
        for key in active:
            smp = live.get(key)
            if smp is None:
                proj = make(key)
                smp = live[key] = _Sample(key, proj.projected, total_energy(proj.projected, model))
            u_new, e_new, res, alpha, tau = descent_step(smp.u, smp.energy, model, smp.symmetric)
            smp.residual = res
            if res > tol and alpha > 0.0:
                smp.u, smp.energy = u_new, e_new
                smp.steps += 1
            energies[key] = smp.energy
        argmax = max(energies, key=energies.get)
        if argmax not in live:
            continue
        smp = live[argmax]
        smp.beta = barycenter(smp.u)
        if float(np.hypot(*smp.beta)) <= 2 * grid.h:
            s_members.append({"key": list(argmax), "energy": smp.energy})
            inf_s = min(inf_s, smp.energy)
        top = energies[argmax]
        row = {"iter": sweep, "energy": top, "residual": smp.residual, "tau": None,
               "beta": [float(smp.beta[0]), float(smp.beta[1])], "step": None,
               "sample": list(argmax), "active": len(active)}
        history.append(row)
        if log:
            log(row)
        if history and len(history) > 1 and top > history[-2]["energy"] + 1e-12 * m:
            raise AssertionError("surface maximum increased during a sweep")
        if top < inf_s - breach_tol:
            raise GeometryBreach(f"surface maximum {top:.10g} fell below sampled inf_S {inf_s:.10g}",
                                 run={"history": history, "energies": energies})
        if smp.residual <= tol:
            status = "Converged" if in_window(top, m, delta) else "Rejected"
            break
        if len(history) > 25 and _pair_escaping(history, m):
            status = "Escaped"
            break
    solution = live[argmax].u
    min_all, min_support = _positivity(solution)
    filled = 0
    if min_all <= 0.0:
        solution, filled = positive_fill(solution, model)
        min_all, min_support = _positivity(solution)
    g = gradient(solution, model)
    free_res = math.sqrt(max(grid.norm2(g, model.lam), 0.0))
    norm = math.sqrt(grid.norm2(solution, model.lam))
    energy = total_energy(solution, model)
    if status == "Converged" and not (min_all > 0 and in_window(energy, m, delta)):
        status = "Rejected"
    report = {
        "status": status,
        "energy": energy,
        "d_upper": max(energies.values()),
        "window": [m, 2.0 * m],
        "delta": delta,
        "margins": {"above_m": energy - m, "below_2m": 2.0 * m - energy},
        "positivity_min": min_all,
        "positivity_min_support": min_support,
        "positive_fill_nodes": filled,
        "residual": free_res,
        "residual_relative": free_res / norm,
        "norm": norm,
        "sweeps": sweep + 1,
        "argmax_sample": list(argmax),
        "argmax_symmetric": live[argmax].symmetric,
        "surface": surface,
        "inf_S_sampled": inf_s,
        "s_members": s_members[-1:] if s_members else [],
        "scan": verdict,
    }
    return solution, report


def _pair_escaping(history, m, window=20):
    drift = [math.hypot(*r["beta"]) for r in history[-window:]]
    return strictly_increasing(drift) and abs(history[-1]["energy"] - m) <= 1e-2 * m


def refine_solution(u, profile, model, factor=0.5, half_width=None, tol=1e-6, budget=300, log=None):
    """Re-solve on a grid with spacing factor * h, starting from u interpolated.

    The finer box is centred like the original and, by default, clipped to
    half-width 20/sqrt(lam) (the solution is negligible beyond).
    """
    grid = u.grid
    hw = 20.0 / math.sqrt(model.lam) if half_width is None else half_width
    widths = tuple(min(hw, L) for L in grid.half_widths)
    fine = ExteriorGrid(N=grid.N, h=grid.h * factor, rho=grid.rho, half_widths=widths,
                        obstacle_axes=grid.obstacle_axes)
    idx = [x / grid.h + k for x, k in zip(fine.coords(), grid.n_half)]
    vals = map_coordinates(u.values, idx, order=3, mode="constant", cval=0.0)
    v = fine.field(np.maximum(vals, 0.0))
    sym = is_symmetric(u)
    return nehari_descent(v, model, budget=budget, tol=tol, m=profile.m, symmetric=sym,
                          delta=1e-2 * profile.m, log=log)
