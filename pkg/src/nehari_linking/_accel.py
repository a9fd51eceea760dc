"""Hot grid kernels with a numba path and a pure-numpy fallback.

The numba kernels cover two-dimensional grids and the saturable model; every
other case goes through the numpy versions.  Set ``NEHARI_LINKING_NUMBA=0``
to force numpy everywhere (useful for debugging and for the benchmark).
"""
import os

import numpy as np

try:
    import numba
    from numba import njit

    HAVE_NUMBA = True
    if "NUMBA_THREADING_LAYER" not in os.environ:
        # skip the TBB probe, which warns on older TBB installs
        numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

_enabled = HAVE_NUMBA and os.environ.get("NEHARI_LINKING_NUMBA", "1") not in ("0", "false", "no")


fft_workers = -1


def set_threads(k):
    """Thread count for FFT solves and (if present) numba kernels."""
    global fft_workers
    fft_workers = int(k)
    if HAVE_NUMBA:
        numba.set_num_threads(max(1, min(int(k), numba.config.NUMBA_NUM_THREADS)))


def use_numba():
    return _enabled


def set_backend(name):
    """Switch between ``"numba"`` and ``"numpy"`` at runtime; returns the previous name."""
    global _enabled
    previous = "numba" if _enabled else "numpy"
    if name == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba is not importable")
        _enabled = True
    elif name == "numpy":
        _enabled = False
    else:
        raise ValueError(f"unknown backend {name!r}")
    return previous


# ---------------------------------------------------------------------------
# numpy reference kernels (any dimension)
# ---------------------------------------------------------------------------

def _np_laplacian(u, h):
    out = np.zeros_like(u)
    core = tuple(slice(1, -1) for _ in range(u.ndim))
    acc = -2.0 * u.ndim * u[core]
    for ax in range(u.ndim):
        plus = list(core)
        minus = list(core)
        plus[ax] = slice(2, None)
        minus[ax] = slice(None, -2)
        acc = acc + u[tuple(plus)] + u[tuple(minus)]
    out[core] = acc / (h * h)
    return out


def _np_diff_dot(u, v):
    total = 0.0
    for ax in range(u.ndim):
        total += float(np.sum(np.diff(u, axis=ax) * np.diff(v, axis=ax)))
    return total


def _np_sat_f(u, s):
    t = np.maximum(u, 0.0)
    t2 = t * t
    return t2 * t / (1.0 + s * t2)


def _np_sat_fprime(u, s):
    t = np.maximum(u, 0.0)
    t2 = t * t
    d = 1.0 + s * t2
    return (3.0 * t2 + s * t2 * t2) / (d * d)


def _np_sat_F(u, s):
    t = np.maximum(u, 0.0)
    t2 = t * t
    x = s * t2
    out = np.empty_like(t)
    small = x < 1e-3
    xs = x[small]
    # x - log1p(x) by its series where the closed form cancels
    out[small] = xs * xs * (0.5 - xs * (1.0 / 3.0 - xs * (0.25 - xs * (0.2 - xs / 6.0))))
    xl = x[~small]
    out[~small] = xl - np.log1p(xl)
    return out / (2.0 * s * s)


def _np_sat_nehari_sum(u, tau, s):
    t = np.maximum(u, 0.0)
    t2 = t * t
    return float(np.sum(tau * tau * t2 * t2 / (1.0 + s * tau * tau * t2)))


def _np_ball_sum(a, offsets):
    out = np.zeros_like(a)
    n0, n1 = a.shape
    for di, dj in offsets:
        di = int(di)
        dj = int(dj)
        src = a[max(di, 0):n0 + min(di, 0), max(dj, 0):n1 + min(dj, 0)]
        out[max(-di, 0):n0 + min(-di, 0), max(-dj, 0):n1 + min(-dj, 0)] += src
    return out


# ---------------------------------------------------------------------------
# numba kernels (2-D)
# ---------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def _nb_laplacian(u, h):
        n0, n1 = u.shape
        out = np.zeros_like(u)
        ih2 = 1.0 / (h * h)
        for i in range(1, n0 - 1):
            for j in range(1, n1 - 1):
                out[i, j] = (u[i + 1, j] + u[i - 1, j] + u[i, j + 1] + u[i, j - 1] - 4.0 * u[i, j]) * ih2
        return out

    @njit(cache=True)
    def _nb_diff_dot(u, v):
        n0, n1 = u.shape
        total = 0.0
        for i in range(n0):
            for j in range(n1):
                if i + 1 < n0:
                    total += (u[i + 1, j] - u[i, j]) * (v[i + 1, j] - v[i, j])
                if j + 1 < n1:
                    total += (u[i, j + 1] - u[i, j]) * (v[i, j + 1] - v[i, j])
        return total

    @njit(cache=True)
    def _nb_sat_f(u, s):
        out = np.empty_like(u)
        flat = u.ravel()
        res = out.ravel()
        for k in range(flat.size):
            t = flat[k]
            if t > 0.0:
                t2 = t * t
                res[k] = t2 * t / (1.0 + s * t2)
            else:
                res[k] = 0.0
        return out

    @njit(cache=True)
    def _nb_sat_fprime(u, s):
        out = np.empty_like(u)
        flat = u.ravel()
        res = out.ravel()
        for k in range(flat.size):
            t = flat[k]
            if t > 0.0:
                t2 = t * t
                d = 1.0 + s * t2
                res[k] = (3.0 * t2 + s * t2 * t2) / (d * d)
            else:
                res[k] = 0.0
        return out

    @njit(cache=True)
    def _nb_sat_F(u, s):
        out = np.empty_like(u)
        flat = u.ravel()
        res = out.ravel()
        c = 1.0 / (2.0 * s * s)
        for k in range(flat.size):
            t = flat[k]
            if t > 0.0:
                x = s * t * t
                if x < 1e-3:
                    v = x * x * (0.5 - x * (1.0 / 3.0 - x * (0.25 - x * (0.2 - x / 6.0))))
                else:
                    v = x - np.log1p(x)
                res[k] = c * v
            else:
                res[k] = 0.0
        return out

    @njit(cache=True)
    def _nb_sat_nehari_sum(u, tau, s):
        flat = u.ravel()
        total = 0.0
        tt = tau * tau
        for k in range(flat.size):
            t = flat[k]
            if t > 0.0:
                t2 = t * t
                total += tt * t2 * t2 / (1.0 + s * tt * t2)
        return total

    @njit(cache=True)
    def _nb_ball_sum(a, offsets):
        n0, n1 = a.shape
        out = np.zeros_like(a)
        m = offsets.shape[0]
        for i in range(n0):
            for j in range(n1):
                acc = 0.0
                for k in range(m):
                    ii = i + offsets[k, 0]
                    jj = j + offsets[k, 1]
                    if ii >= 0 and ii < n0 and jj >= 0 and jj < n1:
                        acc += a[ii, jj]
                out[i, j] = acc
        return out

    @njit(cache=True)
    def _nb_ball_sum_box(a, offsets, i0, i1, j0, j1):
        n0, n1 = a.shape
        out = np.zeros((i1 - i0, j1 - j0))
        m = offsets.shape[0]
        for i in range(i0, i1):
            for j in range(j0, j1):
                acc = 0.0
                for k in range(m):
                    ii = i + offsets[k, 0]
                    jj = j + offsets[k, 1]
                    if ii >= 0 and ii < n0 and jj >= 0 and jj < n1:
                        acc += a[ii, jj]
                out[i - i0, j - j0] = acc
        return out

    @njit(cache=True)
    def _nb_positive_fill(u, active, coef, sweeps):
        # Gauss-Seidel sweeps of  (2N + lam h^2) u_i = sum of neighbours
        # restricted to the active nodes; inactive nodes act as boundary data.
        n0, n1 = u.shape
        for sweep in range(sweeps):
            order = sweep % 4
            for a in range(1, n0 - 1):
                i = a if order < 2 else n0 - 1 - a
                for b in range(1, n1 - 1):
                    j = b if order % 2 == 0 else n1 - 1 - b
                    if active[i, j]:
                        u[i, j] = (u[i + 1, j] + u[i - 1, j] + u[i, j + 1] + u[i, j - 1]) * coef
        return u


def _np_positive_fill(u, active, coef, sweeps):
    # Jacobi sweeps; positivity spreads one node per sweep, so keep going
    # until every active node is reached, then do ``sweeps`` more.
    core = tuple(slice(1, -1) for _ in range(u.ndim))
    act = active[core]
    inner = u[core]
    limit = sweeps + sum(u.shape)
    done = 0
    for k in range(limit):
        acc = np.zeros_like(inner)
        for ax in range(u.ndim):
            plus = list(core)
            minus = list(core)
            plus[ax] = slice(2, None)
            minus[ax] = slice(None, -2)
            acc += u[tuple(plus)] + u[tuple(minus)]
        inner[act] = acc[act] * coef
        if done or np.all(inner[act] > 0):
            done += 1
            if done >= sweeps:
                break
    return u


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def laplacian(u, h):
    if _enabled and u.ndim == 2:
        return _nb_laplacian(u, h)
    return _np_laplacian(u, h)


def diff_dot(u, v):
    """Sum over lattice edges of the products of forward differences."""
    if _enabled and u.ndim == 2:
        return float(_nb_diff_dot(u, v))
    return _np_diff_dot(u, v)


def sat_f(u, s):
    if _enabled:
        return _nb_sat_f(np.ascontiguousarray(u, dtype=np.float64), float(s))
    return _np_sat_f(np.asarray(u, dtype=np.float64), s)


def sat_fprime(u, s):
    if _enabled:
        return _nb_sat_fprime(np.ascontiguousarray(u, dtype=np.float64), float(s))
    return _np_sat_fprime(np.asarray(u, dtype=np.float64), s)


def sat_F(u, s):
    if _enabled:
        return _nb_sat_F(np.ascontiguousarray(u, dtype=np.float64), float(s))
    return _np_sat_F(np.asarray(u, dtype=np.float64), s)


def sat_nehari_sum(u, tau, s):
    """Sum of f(tau u) u / tau for the saturable model."""
    if _enabled:
        return float(_nb_sat_nehari_sum(np.ascontiguousarray(u), float(tau), float(s)))
    return _np_sat_nehari_sum(u, tau, s)


def ball_sum(a, offsets):
    if _enabled and a.ndim == 2:
        return _nb_ball_sum(np.ascontiguousarray(a), np.ascontiguousarray(offsets, dtype=np.int64))
    if a.ndim != 2:
        raise NotImplementedError("ball averages are implemented for N = 2 grids")
    return _np_ball_sum(a, offsets)


def ball_sum_box(a, offsets, box):
    """ball_sum restricted to the index box (i0, i1, j0, j1); same summation order."""
    i0, i1, j0, j1 = (int(k) for k in box)
    if _enabled and a.ndim == 2:
        return _nb_ball_sum_box(np.ascontiguousarray(a), np.ascontiguousarray(offsets, dtype=np.int64),
                                i0, i1, j0, j1)
    r = int(np.max(np.abs(offsets))) if len(offsets) else 0
    lo0, lo1 = max(i0 - r, 0), max(j0 - r, 0)
    sub = a[lo0:min(i1 + r, a.shape[0]), lo1:min(j1 + r, a.shape[1])]
    full = _np_ball_sum(sub, offsets)
    return full[i0 - lo0:i1 - lo0, j0 - lo1:j1 - lo1].copy()


def positive_fill(u, active, coef, sweeps):
    if _enabled and u.ndim == 2:
        return _nb_positive_fill(u, active, float(coef), int(sweeps))
    return _np_positive_fill(u, active, coef, int(sweeps))
