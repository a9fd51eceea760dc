"""Radial ground state of  -w'' - (N-1)/r w' + lam w = f(w)  on R^N.

The profile comes from shooting on w(0) with bisection between undershooting
trajectories (w' turns positive while w > 0) and overshooting ones (w crosses
zero).  Beyond the radius where w < 1e-6 w(0) the trajectory is no longer
trustworthy and is replaced by the decaying solution of the linearised
equation, r^(-nu) K_nu(sqrt(lam) r) with nu = (N-2)/2, matched in value.
"""
from dataclasses import dataclass, field
import csv
import json
import math

import numpy as np
from scipy.integrate import simpson, solve_ivp
from scipy.interpolate import PchipInterpolator
from scipy.linalg import solve_banded
from scipy.special import gammaln, kve

from .errors import FitWindowError, IntegrationFailure, NoCrossing, ShootingBracketFailure
from .nonlinearity import NonlinearityModel, crossing_b

R_SERIES = 1e-3


def sphere_area(N):
    """Surface measure of the unit sphere in R^N."""
    return math.exp(math.log(2.0) + 0.5 * N * math.log(math.pi) - gammaln(0.5 * N))


@dataclass
class RadialProfile:
    N: int
    r: np.ndarray
    w: np.ndarray
    w_prime: np.ndarray
    sigma: float
    lam: float
    m: float
    b: float
    s: float = float("nan")
    r_match: float = float("nan")
    bracket: tuple = ()
    trace: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self._interp = PchipInterpolator(self.r, self.w, extrapolate=False)

    @property
    def r_max(self):
        return float(self.r[-1])

    @property
    def w0(self):
        return float(self.w[0])

    def tail(self, r):
        r = np.asarray(r, dtype=float)
        return self.sigma * r ** (-(self.N - 1) / 2.0) * np.exp(-math.sqrt(self.lam) * r)

    def __call__(self, r):
        """w(r): monotone cubic interpolation up to r_max, asymptotic law beyond."""
        r = np.abs(np.asarray(r, dtype=float))
        inside = r <= self.r_max
        out = np.empty_like(r)
        out[inside] = self._interp(r[inside])
        far = ~inside
        if np.any(far):
            out[far] = self.tail(r[far])
        return float(out) if out.ndim == 0 else out

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["r", "w", "w_prime"])
            for row in zip(self.r, self.w, self.w_prime):
                wr.writerow([repr(float(v)) for v in row])

    def sidecar(self):
        return {"N": self.N, "lambda": self.lam, "s": self.s, "sigma": self.sigma,
                "m": self.m, "b": self.b, "r_max": self.r_max, "r_match": self.r_match,
                "w0": self.w0}

    def save(self, csv_path, json_path, extra=None):
        self.to_csv(csv_path)
        meta = self.sidecar()
        if extra:
            meta.update(extra)
        with open(json_path, "w") as fh:
            json.dump(meta, fh, indent=2)

    @classmethod
    def load(cls, csv_path, json_path):
        with open(csv_path) as fh:
            rows = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
        data = np.loadtxt(rows[1:], delimiter=",", ndmin=2)
        with open(json_path) as fh:
            meta = json.load(fh)
        return cls(N=int(meta["N"]), r=data[:, 0], w=data[:, 1], w_prime=data[:, 2],
                   sigma=float(meta["sigma"]), lam=float(meta["lambda"]), m=float(meta["m"]),
                   b=float(meta["b"]), s=float(meta.get("s", float("nan"))),
                   r_match=float(meta.get("r_match", float("nan"))))


def _rhs(model, N):
    lam = model.lam

    def rhs(r, y):
        w, wp = y
        return [wp, lam * w - model.f(w) - (N - 1) / r * wp]

    return rhs


def _series_start(model, N, w0):
    c = (model.lam * w0 - model.f(w0)) / (2.0 * N)
    return [w0 + c * R_SERIES ** 2, 2.0 * c * R_SERIES]


def _shoot(model, N, w0, r_end, dense=False):
    """Integrate from the series start; returns (kind, solution)."""

    def crossed(r, y):
        return y[0]

    crossed.terminal = True
    crossed.direction = -1

    def turned(r, y):
        return y[1]

    turned.terminal = True
    turned.direction = 1

    sol = solve_ivp(_rhs(model, N), (R_SERIES, r_end), _series_start(model, N, w0),
                    method="RK45", rtol=1e-12, atol=1e-15, events=(crossed, turned),
                    dense_output=dense)
    if sol.status == -1:
        raise IntegrationFailure(f"integrator failed at w(0) = {w0!r}: {sol.message}")
    if sol.t_events[0].size:
        return "over", sol
    if sol.t_events[1].size:
        return "under", sol
    return ("under" if sol.y[1, -1] > 0 or sol.y[0, -1] > 0 else "over"), sol


def shoot_ground_state(model, N=2, r_max=None, tol=1e-13, dr=0.005, w_cap_factor=1e4):
    """Ground state by bisection shooting on w(0) in (b, w_cap]."""
    if N < 2:
        raise ValueError("N must be at least 2")
    try:
        b = crossing_b(model)
    except NoCrossing as exc:
        raise ShootingBracketFailure(f"no admissible shooting interval: {exc}") from exc
    sq = math.sqrt(model.lam)
    r_max = 20.0 / sq if r_max is None else float(r_max)
    r_end = 3.0 * r_max
    trace = []

    lo = b * (1.0 + 1e-8)
    kind, _ = _shoot(model, N, lo, r_end)
    trace.append((lo, kind))
    if kind != "under":
        raise ShootingBracketFailure("trajectory from just above b does not undershoot", trace)
    hi = 2.0 * b
    while True:
        kind, _ = _shoot(model, N, hi, r_end)
        trace.append((hi, kind))
        if kind == "over":
            break
        lo = hi
        hi *= 2.0
        if hi > w_cap_factor * b:
            raise ShootingBracketFailure(f"no overshooting trajectory below w_cap = {hi:g}", trace)

    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        kind, _ = _shoot(model, N, mid, r_end)
        if kind == "under":
            lo = mid
        else:
            hi = mid
    trace.append((lo, "under"))
    trace.append((hi, "over"))

    w0 = 0.5 * (lo + hi)
    _, sol = _shoot(model, N, lo, r_end, dense=True)
    r_stop = float(sol.t[-1])
    rr = np.arange(R_SERIES, r_stop, dr / 4)
    ww = sol.sol(rr)[0]
    below = np.flatnonzero(ww < 1e-6 * w0)
    if below.size == 0:
        raise IntegrationFailure("trajectory never decays to 1e-6 w(0); increase r_max")
    r_match = float(rr[below[0]])
    if r_match > r_max:
        raise IntegrationFailure(f"matching radius {r_match:.3g} beyond r_max {r_max:.3g}")

    w_match, wp_match = sol.sol(r_match)
    nu = 0.5 * (N - 2)
    amp = w_match / _bessel_tail(r_match, nu, sq)

    r = np.linspace(0.0, r_max, int(round(r_max / dr)) + 1)
    w = np.empty_like(r)
    wp = np.empty_like(r)
    head = r <= r_match
    c0 = (model.lam * w0 - model.f(w0)) / (2.0 * N)
    tiny = r < R_SERIES
    w[tiny] = w0 + c0 * r[tiny] ** 2
    wp[tiny] = 2.0 * c0 * r[tiny]
    mid_sel = head & ~tiny
    y = sol.sol(r[mid_sel])
    w[mid_sel] = y[0]
    wp[mid_sel] = y[1]
    tail_sel = ~head
    w[tail_sel] = amp * _bessel_tail(r[tail_sel], nu, sq)
    wp[tail_sel] = amp * _bessel_tail_prime(r[tail_sel], nu, sq)
    sigma = amp * math.sqrt(math.pi / (2.0 * sq))

    trace.append(("derivative_mismatch_at_match",
                  float(abs(wp_match - amp * _bessel_tail_prime(r_match, nu, sq)) / abs(wp_match))))
    profile = RadialProfile(N=N, r=r, w=w, w_prime=wp, sigma=float(sigma), lam=model.lam,
                            m=float("nan"), b=b, s=getattr(model, "s", float("nan")),
                            r_match=r_match, bracket=(lo, hi), trace=trace)
    profile.m = limit_energy(profile, model)
    return profile


def _bessel_tail(r, nu, sq):
    # r^-nu K_nu(sq r), computed with the scaled Bessel function to avoid underflow
    r = np.asarray(r, dtype=float)
    return r ** (-nu) * kve(nu, sq * r) * np.exp(-sq * r)


def _bessel_tail_prime(r, nu, sq):
    # d/dr [r^-nu K_nu(sq r)] = -sq r^-nu K_{nu+1}(sq r)
    r = np.asarray(r, dtype=float)
    return -sq * r ** (-nu) * kve(nu + 1, sq * r) * np.exp(-sq * r)


def radial_integrals(profile, model):
    """Kinetic, mass and potential integrals over R^N (radial quadrature)."""
    r, w, wp = profile.r, profile.w, profile.w_prime
    weight = sphere_area(profile.N) * r ** (profile.N - 1)
    grad2 = simpson(wp * wp * weight, x=r)
    mass2 = simpson(w * w * weight, x=r)
    pot = simpson(np.asarray(model.F(w)) * weight, x=r)
    fw = simpson(np.asarray(model.f(w)) * w * weight, x=r)
    return {"grad2": grad2, "mass2": mass2, "F": pot, "fw": fw}


def limit_energy(profile, model=None):
    """m = I(w) by radial quadrature with weight |S^(N-1)| r^(N-1)."""
    model = model or NonlinearityModel(s=profile.s, lam=profile.lam)
    q = radial_integrals(profile, model)
    return float(0.5 * (q["grad2"] + profile.lam * q["mass2"]) - q["F"])


def identity_residuals(profile, model):
    """Relative Nehari and Pohozaev defects of the computed profile."""
    q = radial_integrals(profile, model)
    lam, N = profile.lam, profile.N
    norm2 = q["grad2"] + lam * q["mass2"]
    nehari = (norm2 - q["fw"]) / norm2
    # Pohozaev: (N-2)/2 |grad w|^2 = N int (F(w) - lam w^2 / 2); equivalently m = |grad w|^2 / N
    m = 0.5 * norm2 - q["F"]
    pohozaev = (m - q["grad2"] / N) / m
    return {"nehari": float(nehari), "pohozaev": float(pohozaev)}


def fit_decay_constants(profile, window=(10.0, 15.0)):
    """Least-squares fit of w(r) r^((N-1)/2) e^(sqrt(lam) r) to a constant.

    Returns (sigma, quality) where quality is the worst relative deviation
    from the fitted constant on the window.
    """
    a, b = window
    sq = math.sqrt(profile.lam)
    if a < 5.0 / sq or b > profile.r_max or b <= a:
        raise FitWindowError(f"window {window} must lie in [{5.0 / sq:.3g}, {profile.r_max:.3g}]")
    sel = (profile.r >= a) & (profile.r <= b)
    if np.count_nonzero(sel) < 10:
        raise FitWindowError(f"window {window} holds fewer than 10 samples")
    r = profile.r[sel]
    w = profile.w[sel]
    y = np.log(w) + sq * r + 0.5 * (profile.N - 1) * np.log(r)
    c = float(np.mean(y))
    sigma = math.exp(c)
    quality = float(np.max(np.abs(w * r ** (0.5 * (profile.N - 1)) * np.exp(sq * r) / sigma - 1.0)))
    return sigma, quality


def log_derivative_defect(profile, r):
    """|w'(r)/w(r) + sqrt(lam) + (N-1)/(2r)| at radius r.

    The algebraic term is the r-derivative of the r^(-(N-1)/2) prefactor; the
    remainder is O(r^-2).
    """
    i = int(np.argmin(np.abs(profile.r - r)))
    ri = profile.r[i]
    return float(abs(profile.w_prime[i] / profile.w[i] + math.sqrt(profile.lam)
                     + 0.5 * (profile.N - 1) / ri))


def evaluate_profile_at(profile, x, center):
    x = np.asarray(x, dtype=float)
    c = np.asarray(center, dtype=float)
    return profile(np.linalg.norm(x - c, axis=-1))


def relax_ground_state(model, N=2, r_max=None, dr=0.0025, w_guess=None, max_iter=100, tol=1e-12):
    """Independent check: damped Newton on the finite-difference radial BVP.

    Unknowns w(r_i) on r_i = i dr, w'(0) = 0 by symmetry, w(r_max) = 0.
    Returns (r, w).
    """
    sq = math.sqrt(model.lam)
    r_max = 20.0 / sq if r_max is None else float(r_max)
    n = int(round(r_max / dr))
    r = np.arange(n) * dr
    b = crossing_b(model)
    amplitudes = [w_guess] if w_guess is not None else [2.0 * b, 4.0 * b, 8.0 * b]
    last = None
    for amp in amplitudes:
        try:
            return _relax(model, N, r, dr, amp / np.cosh(sq * r), max_iter, tol)
        except IntegrationFailure as exc:
            last = exc
    raise last


def _relax(model, N, r, dr, w, max_iter, tol):
    n = r.size
    lam = model.lam
    h2 = dr * dr
    lower = np.zeros(n)
    upper = np.zeros(n)
    lower[1:] = -1.0 / h2 + (N - 1) / (r[1:] * 2 * dr)
    upper[1:] = -1.0 / h2 - (N - 1) / (r[1:] * 2 * dr)
    upper[0] = -2.0 * N / h2

    def residual(w):
        res = np.empty(n)
        wr = np.append(w[1:], 0.0)
        res[0] = -2.0 * N * (w[1] - w[0]) / h2 + lam * w[0] - model.f(w[0])
        res[1:] = lower[1:] * w[:-1] + (2.0 / h2 + lam) * w[1:] + upper[1:] * wr[1:] - model.f(w[1:])
        return res

    res = residual(w)
    for _ in range(max_iter):
        diag = np.full(n, 2.0 / h2 + lam) - model.fprime(w)
        diag[0] = 2.0 * N / h2 + lam - model.fprime(w[0])
        ab = np.zeros((3, n))
        ab[0, 1:] = upper[:-1]
        ab[1] = diag
        ab[2, :-1] = lower[1:]
        step = solve_banded((1, 1), ab, -res)
        norm0 = np.linalg.norm(res)
        alpha = 1.0
        while alpha > 1e-6:
            trial = w + alpha * step
            res_t = residual(trial)
            if np.linalg.norm(res_t) < (1 - 1e-4 * alpha) * norm0:
                break
            alpha *= 0.5
        w, res = trial, res_t
        if np.max(np.abs(alpha * step)) < tol * max(1.0, np.max(np.abs(w))):
            break
    else:
        raise IntegrationFailure("relaxation Newton did not converge")
    if w[0] < 1e-3:
        raise IntegrationFailure("relaxation collapsed to the trivial solution")
    return r, w
