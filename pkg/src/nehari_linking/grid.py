"""Uniform grid on a box with a ball (or ellipse) obstacle removed.

Fields are stored on every node of the box with the convention that obstacle
and outer-boundary nodes hold exactly zero (homogeneous Dirichlet data, i.e.
extension by zero outside the domain).
"""
import hashlib
import json
import math

import numpy as np
import scipy.fft
from scipy.linalg import cho_factor, cho_solve

from . import _accel
from .errors import GridMismatch, SolverStall


class ExteriorGrid:
    """Box [-L_1, L_1] x ... x [-L_N, L_N] with nodes at integer multiples of h.

    ``R_out`` is the default half-width; ``half_widths`` overrides it per
    axis.  ``obstacle_axes`` turns the ball of radius ``rho`` into an
    axis-aligned ellipse with those semi-axes (each at most ``rho``).
    """

    def __init__(self, N=2, h=0.1, rho=1.0, R_out=40.0, half_widths=None, obstacle_axes=None):
        if N < 1:
            raise ValueError("N must be positive")
        self.N = int(N)
        self.h = float(h)
        self.rho = float(rho)
        if half_widths is None:
            half_widths = (float(R_out),) * self.N
        if len(half_widths) != self.N:
            raise ValueError("half_widths needs one entry per axis")
        self.n_half = tuple(int(round(L / self.h)) for L in half_widths)
        self.half_widths = tuple(k * self.h for k in self.n_half)
        self.R_out = min(self.half_widths)
        if not self.rho < self.R_out / 4.0:
            raise ValueError(f"obstacle radius {self.rho} must be below R_out/4 = {self.R_out / 4}")
        self.shape = tuple(2 * k + 1 for k in self.n_half)
        self.axes = tuple((np.arange(n) - k) * self.h for n, k in zip(self.shape, self.n_half))
        self.obstacle_axes = None if obstacle_axes is None else tuple(float(a) for a in obstacle_axes)
        if self.obstacle_axes is not None and (len(self.obstacle_axes) != self.N
                                               or max(self.obstacle_axes) > self.rho):
            raise ValueError("obstacle semi-axes must fit inside the ball of radius rho")

        mesh = np.meshgrid(*self.axes, indexing="ij")
        self.radius = np.sqrt(sum(x * x for x in mesh))
        if self.obstacle_axes is None:
            self.obstacle = self.radius <= self.rho * (1 + 1e-12)
        else:
            q = sum((x / a) ** 2 for x, a in zip(mesh, self.obstacle_axes))
            self.obstacle = q <= 1 + 1e-12
        self.outer = np.zeros(self.shape, dtype=bool)
        for ax in range(self.N):
            idx = [slice(None)] * self.N
            idx[ax] = 0
            self.outer[tuple(idx)] = True
            idx[ax] = -1
            self.outer[tuple(idx)] = True
        self.interior = ~(self.obstacle | self.outer)
        self.cell = self.h ** self.N
        self._solvers = {}
        self._mask_hash = None

    # -- bookkeeping --------------------------------------------------------
    @property
    def origin_index(self):
        return self.n_half

    def coords(self):
        return np.meshgrid(*self.axes, indexing="ij")

    def mask_hash(self):
        if self._mask_hash is None:
            self._mask_hash = hashlib.sha1(np.packbits(self.interior).tobytes()).hexdigest()[:16]
        return self._mask_hash

    def header(self):
        return {"N": self.N, "h": self.h, "rho": self.rho, "R_out": self.R_out,
                "half_widths": list(self.half_widths), "shape": list(self.shape),
                "mask_hash": self.mask_hash()}

    def same_as(self, other):
        return other is self or (isinstance(other, ExteriorGrid) and self.header() == other.header())

    def node_of(self, point):
        """Index of the node nearest to ``point``."""
        return tuple(int(round(p / self.h)) + k for p, k in zip(point, self.n_half))

    def contains(self, point, margin=0.0):
        return all(abs(p) + margin <= L for p, L in zip(point, self.half_widths))

    def restrict(self, values):
        out = np.array(values, dtype=float, copy=True)
        if out.shape != self.shape:
            raise GridMismatch(f"array of shape {out.shape} on a grid of shape {self.shape}")
        out[~self.interior] = 0.0
        return out

    def field(self, values):
        return Field(self, self.restrict(values), _trusted=True)

    def zeros(self):
        return Field(self, np.zeros(self.shape), _trusted=True)

    def from_function(self, fn):
        return self.field(fn(*self.coords()))

    # -- discrete calculus --------------------------------------------------
    def integrate(self, g):
        vals = g.values if isinstance(g, Field) else g
        return float(np.sum(vals[self.interior])) * self.cell

    def laplacian_apply(self, u):
        self._check(u)
        out = _accel.laplacian(u.values, self.h)
        out[~self.interior] = 0.0
        return Field(self, out, _trusted=True)

    def dirichlet_form(self, u, v):
        """Sum over edges of forward-difference products, times h^(N-2)."""
        self._check(u, v)
        return _accel.diff_dot(u.values, v.values) * self.h ** (self.N - 2)

    def inner_product_h1(self, u, v, lam):
        self._check(u, v)
        return self.dirichlet_form(u, v) + lam * float(np.vdot(u.values, v.values)) * self.cell

    def norm2(self, u, lam):
        return self.inner_product_h1(u, u, lam)

    def shift_field(self, u, offset):
        """Relocate samples by an integer lattice offset, zero-filling."""
        self._check(u)
        offset = tuple(int(k) for k in offset)
        src = u.values
        out = np.zeros_like(src)
        dst_idx = []
        src_idx = []
        for k, n in zip(offset, self.shape):
            if abs(k) >= n:
                return Field(self, out, _trusted=True)
            dst_idx.append(slice(max(k, 0), n + min(k, 0)))
            src_idx.append(slice(max(-k, 0), n + min(-k, 0)))
        out[tuple(dst_idx)] = src[tuple(src_idx)]
        out[~self.interior] = 0.0
        return Field(self, out, _trusted=True)

    def solver(self, lam):
        key = float(lam)
        if key not in self._solvers:
            self._solvers[key] = HelmholtzSolver(self, key)
        return self._solvers[key]

    def _check(self, *fields):
        for f in fields:
            if not isinstance(f, Field):
                raise TypeError("expected a Field")
            if not self.same_as(f.grid):
                raise GridMismatch("field lives on a different grid")

    # -- snapshots ----------------------------------------------------------
    def save_field(self, u, path, meta=None):
        """Binary snapshot: JSON header line, then row-major float64 data."""
        header = dict(self.header())
        header["dtype"] = "<f8"
        header["order"] = "C"
        if meta:
            header["meta"] = meta
        with open(path, "wb") as fh:
            fh.write((json.dumps(header) + "\n").encode())
            fh.write(np.ascontiguousarray(u.values, dtype="<f8").tobytes())

    @staticmethod
    def load_field(path, grid=None):
        with open(path, "rb") as fh:
            header = json.loads(fh.readline().decode())
            data = np.frombuffer(fh.read(), dtype="<f8").reshape(header["shape"]).copy()
        if grid is None:
            grid = ExteriorGrid(N=header["N"], h=header["h"], rho=header["rho"],
                                half_widths=header["half_widths"])
        if grid.mask_hash() != header["mask_hash"]:
            raise GridMismatch("snapshot mask hash does not match the grid")
        return Field(grid, data, _trusted=True), header

    def field_to_csv(self, u, path, stride=1):
        xs = np.meshgrid(*[a[::stride] for a in self.axes], indexing="ij")
        vals = u.values[tuple(slice(None, None, stride) for _ in range(self.N))]
        names = ["x", "y", "z"][: self.N] if self.N <= 3 else [f"x{k}" for k in range(self.N)]
        table = np.column_stack([x.ravel() for x in xs] + [vals.ravel()])
        np.savetxt(path, table, delimiter=",", header=",".join(names + ["u"]), comments="")


class Field:
    """Grid function; values on masked nodes are zero."""

    __slots__ = ("grid", "values")

    def __init__(self, grid, values, _trusted=False):
        self.grid = grid
        self.values = values if _trusted else grid.restrict(values)

    def copy(self):
        return Field(self.grid, self.values.copy(), _trusted=True)

    def _other(self, other):
        if isinstance(other, Field):
            if not self.grid.same_as(other.grid):
                raise GridMismatch("fields live on different grids")
            return other.values
        return None

    def __add__(self, other):
        ov = self._other(other)
        if ov is None:
            return NotImplemented
        return Field(self.grid, self.values + ov, _trusted=True)

    def __sub__(self, other):
        ov = self._other(other)
        if ov is None:
            return NotImplemented
        return Field(self.grid, self.values - ov, _trusted=True)

    def __mul__(self, c):
        if isinstance(c, Field):
            return NotImplemented
        return Field(self.grid, self.values * float(c), _trusted=True)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return Field(self.grid, self.values / float(c), _trusted=True)

    def __neg__(self):
        return Field(self.grid, -self.values, _trusted=True)

    def positive_part(self):
        return Field(self.grid, np.maximum(self.values, 0.0), _trusted=True)

    def max(self):
        return float(self.values.max())

    def __repr__(self):
        return f"Field(shape={self.values.shape}, max={self.values.max():.4g}, min={self.values.min():.4g})"


def box_eigenvalues(n_inner, h):
    j = np.arange(1, n_inner + 1)
    return (4.0 / (h * h)) * np.sin(np.pi * j / (2.0 * (n_inner + 1))) ** 2


class HelmholtzSolver:
    """Solves (-Delta_h + lam) x = b on the interior nodes.

    Conjugate gradients on the masked operator, preconditioned by a fast
    sine-transform solve on the full box plus a capacitance correction that
    pins the obstacle nodes to zero.  The capacitance matrix is assembled from
    a single point-source solve, translated; the small boundary error this
    leaves is removed by the outer CG iterations.
    """

    def __init__(self, grid, lam, rtol=1e-12, max_iter=60):
        self.grid = grid
        self.lam = float(lam)
        self.rtol = rtol
        self.max_iter = max_iter
        inner = tuple(n - 2 for n in grid.shape)
        self._core = tuple(slice(1, -1) for _ in range(grid.N))
        eig = self.lam
        for ax, n in enumerate(inner):
            shape = [1] * grid.N
            shape[ax] = n
            eig = eig + box_eigenvalues(n, grid.h).reshape(shape)
        self._inv_eig = 1.0 / eig
        self._obs = np.nonzero(grid.obstacle)
        self.iterations = []
        if self._obs[0].size:
            delta = np.zeros(grid.shape)
            delta[grid.origin_index] = 1.0
            g0 = self.box_solve(delta)
            idx = np.array(self._obs).T
            diff = idx[:, None, :] - idx[None, :, :] + np.array(grid.origin_index)
            cap = g0[tuple(diff[..., ax] for ax in range(grid.N))]
            self._cap = cho_factor(0.5 * (cap + cap.T))
        else:
            self._cap = None

    def box_solve(self, b):
        out = np.zeros(self.grid.shape)
        rhs = b[self._core]
        coef = scipy.fft.dstn(rhs, type=1, norm="ortho", workers=_accel.fft_workers)
        coef *= self._inv_eig
        out[self._core] = scipy.fft.idstn(coef, type=1, norm="ortho", workers=_accel.fft_workers)
        return out

    def precondition(self, b):
        y = self.box_solve(b)
        if self._cap is not None:
            c = cho_solve(self._cap, -y[self._obs])
            src = np.zeros(self.grid.shape)
            src[self._obs] = c
            y = y + self.box_solve(src)
        y[~self.grid.interior] = 0.0
        return y

    def apply(self, x):
        out = -_accel.laplacian(x, self.grid.h) + self.lam * x
        out[~self.grid.interior] = 0.0
        return out

    def solve(self, b):
        """Array in, array out; ``b`` is restricted to the interior first."""
        b = np.where(self.grid.interior, b, 0.0)
        bnorm = math.sqrt(float(np.vdot(b, b)))
        if bnorm == 0.0:
            self.iterations.append(0)
            return np.zeros_like(b)
        x = self.precondition(b)
        r = b - self.apply(x)
        if math.sqrt(float(np.vdot(r, r))) <= self.rtol * bnorm:
            self.iterations.append(0)
            return x
        z = self.precondition(r)
        p = z.copy()
        rz = float(np.vdot(r, z))
        for it in range(1, self.max_iter + 1):
            ap = self.apply(p)
            alpha = rz / float(np.vdot(p, ap))
            x += alpha * p
            r -= alpha * ap
            if math.sqrt(float(np.vdot(r, r))) <= self.rtol * bnorm:
                self.iterations.append(it)
                return x
            z = self.precondition(r)
            rz_new = float(np.vdot(r, z))
            p = z + (rz_new / rz) * p
            rz = rz_new
        raise SolverStall(f"CG stalled: relative residual {math.sqrt(float(np.vdot(r, r))) / bnorm:.3e}")


def linking_grid(R, separation=2.0, h=0.1, rho=1.0, lam=1.0, margin=None, x0=(1.0, 0.0)):
    """Box large enough to hold every bump centre R*y, |y - x0| = separation, with margin."""
    margin = 6.0 / math.sqrt(lam) if margin is None else margin
    x0 = np.asarray(x0, dtype=float)
    ext = np.abs(R * x0) + R * separation + margin
    return ExteriorGrid(N=x0.size, h=h, rho=rho, half_widths=tuple(float(e) for e in ext))
