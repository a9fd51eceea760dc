"""Cut-off bumps, their interaction integrals and the linking surface scan."""
from dataclasses import dataclass, field
import csv
import json
import math

import numpy as np

from .barycenter import barycenter, s_witness, smoothstep_cutoff
from .energy import total_energy
from .errors import BumpTruncated, NotProjectable
from .nehari import nehari_time


def cutoff_xi(x, rho):
    """xi(x) = xi~(|x| / rho): 0 on the obstacle ball, 1 beyond radius 2 rho."""
    x = np.asarray(x, dtype=float)
    r = np.sqrt(np.sum(x * x, axis=-1)) if x.ndim else abs(float(x))
    return smoothstep_cutoff(r / rho)


def bump(profile, grid, center, model=None):
    """Phi^c = xi * w(. - c) on the grid."""
    lam = 1.0 if model is None else model.lam
    margin = 5.0 / math.sqrt(lam)
    if not grid.contains(center, margin):
        raise BumpTruncated(f"bump centre {tuple(center)} closer than {margin:.3g} to the box boundary")
    X, Y = grid.coords()
    r = np.hypot(X, Y)
    d = np.hypot(X - center[0], Y - center[1])
    return grid.field(smoothstep_cutoff(r / grid.rho) * profile(d))


def _quadrature_box(centers, cut, h_q):
    lo = np.min(centers, axis=0) - cut
    hi = np.max(centers, axis=0) + cut
    lo = np.floor(lo / h_q) * h_q
    hi = np.ceil(hi / h_q) * h_q
    axes = [np.arange(int(round((b - a) / h_q)) + 1) * h_q + a for a, b in zip(lo, hi)]
    return np.meshgrid(*axes, indexing="ij")


@dataclass
class EpsilonEstimate:
    R: float
    value: float
    xy: float
    yx: float
    mismatch: float

    def scaled(self, lam=1.0):
        """eps_R (2R)^{1/2} e^{2 sqrt(lam) R}, the quantity that should level off."""
        return self.value * math.sqrt(2.0 * self.R) * math.exp(2.0 * math.sqrt(lam) * self.R)


def epsilon_R(profile, R, model, x0=(1.0, 0.0), y=None, h_q=0.05, cut=None, box=None):
    """Interaction integral int f(w(. - R x0)) w(. - R y) on an absolute lattice.

    Both orderings are integrated on the same lattice and averaged; their
    relative mismatch is reported.  ``box`` (half-widths) guards against
    centres that a truncated computational box could not hold.
    """
    if R < 4:
        raise ValueError("epsilon_R needs R >= 4")
    x0 = np.asarray(x0, dtype=float)
    y = -x0 if y is None else np.asarray(y, dtype=float)
    a, b = R * x0, R * y
    if box is not None:
        margin = 5.0 / math.sqrt(model.lam)
        for c in (a, b):
            if np.any(np.abs(c) + margin > np.asarray(box)):
                raise BumpTruncated(f"centre {c} does not fit the box {tuple(box)}")
    cut = 10.0 / math.sqrt(model.lam) if cut is None else cut

    def ordered(p, q):
        X, Y = _quadrature_box([p], cut, h_q)
        wp = profile(np.hypot(X - p[0], Y - p[1]))
        wq = profile(np.hypot(X - q[0], Y - q[1]))
        return float(np.sum(model.f(wp) * wq)) * h_q * h_q

    xy = ordered(a, b)
    yx = ordered(b, a)
    value = 0.5 * (xy + yx)
    return EpsilonEstimate(R=float(R), value=value, xy=xy, yx=yx,
                           mismatch=abs(xy - yx) / abs(value))


def interaction_integrals(profile, model, R, x0=(1.0, 0.0), y=None, tau1=1.0, tau2=1.0,
                          grid=None, h_q=0.05, cut=None):
    """Measured cross terms between the bumps at R x0 and R y.

    Returns f-weighted cross integrals, the F-splitting defect
    int [F(a + b) - F(a) - F(b) - f(a) b - f(b) a] for the two bumps, and,
    when a grid is given, the H^1 inner product of the two cut-off bumps.
    """
    x0 = np.asarray(x0, dtype=float)
    y = -x0 if y is None else np.asarray(y, dtype=float)
    a, b = R * x0, R * y
    cut = 10.0 / math.sqrt(model.lam) if cut is None else cut
    X, Y = _quadrature_box([a, b], cut, h_q)
    wa = profile(np.hypot(X - a[0], Y - a[1]))
    wb = profile(np.hypot(X - b[0], Y - b[1]))
    dA = h_q * h_q
    ta, tb = tau1 * wa, tau2 * wb
    out = {
        "R": float(R),
        "f_xy": float(np.sum(model.f(ta) * tb)) * dA,
        "f_yx": float(np.sum(model.f(tb) * ta)) * dA,
        "F_split_defect": float(np.sum(model.F(ta + tb) - model.F(ta) - model.F(tb)
                                       - model.f(ta) * tb - model.f(tb) * ta)) * dA,
    }
    eps = epsilon_R(profile, R, model, x0=x0, y=y, h_q=h_q, cut=cut)
    out["eps"] = eps.value
    p1 = model.growth[0]
    alpha = min((p1 + 1.0) / 4.0, 1.0)
    out["alpha"] = alpha
    out["F_split_over_eps"] = abs(out["F_split_defect"]) / eps.value
    if grid is not None:
        pa = bump(profile, grid, a, model)
        pb = bump(profile, grid, b, model)
        out["cross_h1"] = grid.inner_product_h1(pa, pb, model.lam)
    return out


@dataclass
class LinkingConfig:
    R: float
    x0: tuple = (1.0, 0.0)
    separation: float = 2.0
    n_y: int = 16
    n_t: int = 21
    witness_radii: tuple = None
    n_theta: int = 8

    def __post_init__(self):
        x0 = np.asarray(self.x0, dtype=float)
        if abs(np.linalg.norm(x0) - 1.0) > 1e-12:
            raise ValueError("x0 must be a unit vector")
        if x0.size != 2:
            raise NotImplementedError("the linking surface is implemented for N = 2")
        if self.n_y < 4 or self.n_t < 3:
            raise ValueError("need at least 4 directions and 3 t-samples")
        if self.witness_radii is None:
            self.witness_radii = (0.75 * self.R, float(self.R))

    @property
    def y_samples(self):
        x0 = np.asarray(self.x0, dtype=float)
        phi = 2.0 * np.pi * np.arange(self.n_y) / self.n_y + math.atan2(-x0[1], -x0[0])
        # phi_0 points from x0 towards -x0, so y_0 = x0 + separation * (-x0)
        ys = x0 + self.separation * np.stack([np.cos(phi), np.sin(phi)], axis=1)
        # clean rounding residue so that mirror-image samples are exact mirror images
        ys[np.abs(ys) < 1e-12] = 0.0
        return ys

    @property
    def t_samples(self):
        return np.linspace(0.0, 1.0, self.n_t)

    def validate(self, grid, model):
        margin = 5.0 / math.sqrt(model.lam)
        ys = self.y_samples
        for c in np.vstack([ys, [self.x0]]) * self.R:
            if not grid.contains(c, margin):
                raise BumpTruncated(f"bump centre {tuple(c)} does not fit the box")
        if not self.R * np.min(np.linalg.norm(ys, axis=1)) > 2.0 * grid.rho:
            raise ValueError("every bump centre must lie beyond 2 rho")

    def to_dict(self):
        return {"R": self.R, "x0": list(self.x0), "separation": self.separation,
                "n_y": self.n_y, "n_t": self.n_t, "witness_radii": list(self.witness_radii),
                "n_theta": self.n_theta}


class SurfaceBumps:
    """Caches Phi^{R x0} and builds the pre-projection surface U_t^R(y)."""

    def __init__(self, config, profile, grid, model):
        self.config = config
        self.grid = grid
        self.profile = profile
        self.model = model
        self.base = bump(profile, grid, config.R * np.asarray(config.x0), model)
        self._cache = {}

    def phi(self, y):
        key = tuple(np.round(np.asarray(y, dtype=float), 12))
        if key not in self._cache:
            if len(self._cache) > 2:
                self._cache.clear()
            self._cache[key] = bump(self.profile, self.grid, self.config.R * np.asarray(y), self.model)
        return self._cache[key]

    def surface(self, y, t):
        if t == 0.0:
            return self.base
        return t * self.phi(y) + (1.0 - t) * self.base


def psi(config, y, t, profile, grid, model, bumps=None):
    """Psi_R[y, t]: the Nehari projection of t Phi^{Ry} + (1 - t) Phi^{R x0}."""
    bumps = bumps or SurfaceBumps(config, profile, grid, model)
    try:
        return nehari_time(bumps.surface(y, t), model)
    except NotProjectable as exc:
        raise NotProjectable(f"R = {config.R} too small: {exc}") from exc


@dataclass
class LinkingScan:
    config: LinkingConfig
    h: float
    m: float
    records: list
    witnesses: list
    s_members: list = field(default_factory=list)
    two_m_grid: float = float("nan")

    @property
    def boundary(self):
        return [r for r in self.records if r["t"] == 1.0]

    @property
    def sup_dQ(self):
        return max(r["I_omega"] for r in self.boundary)

    @property
    def max_Q(self):
        return max(r["I_omega"] for r in self.records)

    @property
    def argmax(self):
        return max(self.records, key=lambda r: r["I_omega"])

    @property
    def inf_S_sampled(self):
        vals = [w["energy"] for w in self.witnesses] + [s["energy"] for s in self.s_members]
        vals += [r["I_omega"] for r in self.records if math.hypot(r["beta_x"], r["beta_y"]) <= 2 * self.h]
        return min(vals) if vals else float("inf")

    @property
    def two_m(self):
        return 2.0 * self.m

    @property
    def L(self):
        return max(r["tau"] for r in self.records)

    def cap_ok(self):
        ys = self.config.y_samples * self.config.R
        for r in self.boundary:
            target = ys[r["y_index"]]
            b = np.array([r["beta_x"], r["beta_y"]])
            if np.linalg.norm(b - target) > 2 * self.h or np.linalg.norm(b) <= 2 * self.h:
                return False
        return True

    def interior_max_ok(self):
        """For every direction the energy along t peaks strictly inside (0, 1)."""
        for j in range(self.config.n_y):
            row = sorted((r for r in self.records if r["y_index"] == j), key=lambda r: r["t"])
            k = int(np.argmax([r["I_omega"] for r in row]))
            if k == 0 or k == len(row) - 1:
                return False
        return True

    def verdict(self):
        sup_dq, inf_s, max_q = self.sup_dQ, self.inf_S_sampled, self.max_Q
        return {
            "R": self.config.R,
            "sup_dQ": sup_dq,
            "inf_S_sampled": inf_s,
            "max_Q": max_q,
            "two_m": self.two_m,
            "two_m_grid": self.two_m_grid,
            "L": self.L,
            "margins": {"supinf": inf_s - sup_dq, "window": self.two_m - max_q,
                        "window_grid": self.two_m_grid - max_q},
            "inequalities": {"cap": self.cap_ok(), "supinf": bool(sup_dq < inf_s),
                             "window": bool(max_q < self.two_m)},
        }

    def passed(self):
        return all(self.verdict()["inequalities"].values())

    def write_csv(self, path):
        cols = ["y_index", "t", "tau", "I_omega", "beta_x", "beta_y"]
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(cols)
            for r in self.records:
                wr.writerow([r["y_index"]] + [repr(float(r[c])) for c in cols[1:]])

    @staticmethod
    def read_csv(path):
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return [{k: (int(v) if k == "y_index" else float(v)) for k, v in r.items()} for r in rows]

    def verdict_json(self):
        return json.dumps(self.verdict(), indent=2)


def geometry_scan(config, profile, grid, model, with_witnesses=True, log=None):
    """Tabulate I over the sampled surface and record the linking inequalities."""
    config.validate(grid, model)
    bumps = SurfaceBumps(config, profile, grid, model)
    ys = config.y_samples
    ts = config.t_samples
    records = []
    base = nehari_time(bumps.base, model)
    base_energy = total_energy(base.projected, model)
    base_beta = barycenter(base.projected)
    for j, y in enumerate(ys):
        for t in ts:
            if t == 0.0:
                tau, energy, beta = base.tau, base_energy, base_beta
            else:
                proj = psi(config, y, float(t), profile, grid, model, bumps)
                tau = proj.tau
                energy = total_energy(proj.projected, model)
                beta = barycenter(proj.projected)
            records.append({"y_index": j, "t": float(t), "tau": float(tau), "I_omega": float(energy),
                            "beta_x": float(beta[0]), "beta_y": float(beta[1])})
        if log:
            log(f"direction {j + 1}/{len(ys)} done")
    witnesses = []
    if with_witnesses:
        for Rw in config.witness_radii:
            for k in range(config.n_theta):
                ang = 2.0 * np.pi * k / config.n_theta
                theta = np.array([math.cos(ang), math.sin(ang)])
                try:
                    wit = s_witness(profile, grid, Rw, theta, model)
                except (BumpTruncated, NotProjectable, ValueError):
                    continue
                witnesses.append({"R": float(Rw), "theta": [float(theta[0]), float(theta[1])],
                                  "tau": wit.tau, "energy": total_energy(wit.field, model),
                                  "beta": [float(wit.beta[0]), float(wit.beta[1])]})
    return LinkingScan(config=config, h=grid.h, m=profile.m, records=records,
                       witnesses=witnesses, two_m_grid=2.0 * base_energy)
