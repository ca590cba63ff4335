"""Symmetric nonnegative kernels on the unit square.

A kernel sets the law of an inhomogeneous random graph through its cell
averages ``K~_N(i, j) = N^2 * int_{cell(i, j)} K``.  Three variants are
supported: block-constant, rank one ``psi(x) psi(y)``, and the Dubins kernel
``1 / max(x, y)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import BadBoundaries, NonSymmetric, QuadratureFailure, WrongVariant

PSD_TOL = 1e-10
QUAD_RTOL = 1e-6
_QUAD_MAX_LEVEL = 12


def _midpoint_nodes(lo, hi, n):
    h = (hi - lo) / n
    return lo + h * (np.arange(n) + 0.5), h


def _richardson(estimate, rtol=QUAD_RTOL, max_level=_QUAD_MAX_LEVEL, start=4):
    """Composite midpoint with step halving until the Richardson error estimate
    drops below ``rtol``.  ``estimate(n)`` returns the n-point rule."""
    prev = estimate(start)
    n = start
    for _ in range(max_level):
        n *= 2
        cur = estimate(n)
        err = (cur - prev) / 3.0
        if np.all(np.abs(err) <= rtol * np.maximum(np.abs(cur), 1e-12)):
            return cur + err
        prev = cur
    raise QuadratureFailure(f"midpoint rule not converged at n={n}")


@dataclass(frozen=True)
class BlockSpec:
    boundaries: np.ndarray

    @property
    def M(self) -> int:
        return len(self.boundaries) - 1

    @property
    def rho(self) -> np.ndarray:
        return np.diff(self.boundaries)


def _check_boundaries(boundaries):
    t = np.asarray(boundaries, dtype=float)
    if t.ndim != 1 or len(t) < 2:
        raise BadBoundaries("need at least two boundary points")
    if t[0] != 0.0 or t[-1] != 1.0:
        raise BadBoundaries("boundaries must start at 0 and end at 1")
    if np.any(np.diff(t) <= 0):
        raise BadBoundaries("boundaries must be strictly increasing")
    return t


class Kernel:
    """Base class.  Subclasses provide ``cell_integral`` and pointwise values."""

    kind = "abstract"

    def __call__(self, x, y):
        raise NotImplementedError

    def cell_integral(self, a, b, c, d) -> float:
        """Integral of the kernel over ``[a, b] x [c, d]``."""
        return float(self.grid_integrals([a, b], [c, d])[0, 0])

    def grid_integrals(self, xs, ys) -> np.ndarray:
        """Integrals over every cell of the tensor grid ``xs x ys``."""
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        out = np.empty((len(xs) - 1, len(ys) - 1))
        for i in range(len(xs) - 1):
            for j in range(len(ys) - 1):
                out[i, j] = _quad_cell(self, xs[i], xs[i + 1], ys[j], ys[j + 1])
        return out

    def to_dict(self) -> dict:
        raise NotImplementedError


def _quad_cell(fun, a, b, c, d):
    def rule(n):
        x, hx = _midpoint_nodes(a, b, n)
        y, hy = _midpoint_nodes(c, d, n)
        return float(np.sum(fun(x[:, None], y[None, :])) * hx * hy)

    return _richardson(rule)


class BlockKernel(Kernel):
    """Kernel constant on each square ``[t_{s-1}, t_s] x [t_{u-1}, t_u]``."""

    kind = "block"

    def __init__(self, boundaries, values):
        self.boundaries = _check_boundaries(boundaries)
        K = np.atleast_2d(np.asarray(values, dtype=float))
        M = len(self.boundaries) - 1
        if K.shape != (M, M):
            raise BadBoundaries(f"values shape {K.shape} does not match {M} blocks")
        if not np.allclose(K, K.T, rtol=0, atol=1e-12):
            raise NonSymmetric("block values must be symmetric")
        if np.any(K < 0) or not np.all(np.isfinite(K)):
            raise ValueError("block values must be finite and nonnegative")
        self.values = 0.5 * (K + K.T)

    @property
    def spec(self) -> BlockSpec:
        return BlockSpec(self.boundaries)

    def __call__(self, x, y):
        t = self.boundaries
        M = len(t) - 1
        i = np.clip(np.searchsorted(t, x, side="right") - 1, 0, M - 1)
        j = np.clip(np.searchsorted(t, y, side="right") - 1, 0, M - 1)
        return self.values[i, j]

    def _overlaps(self, grid):
        t = self.boundaries
        lo = np.maximum(t[:-1, None], grid[None, :-1])
        hi = np.minimum(t[1:, None], grid[None, 1:])
        return np.clip(hi - lo, 0.0, None)

    def grid_integrals(self, xs, ys):
        Lx = self._overlaps(np.asarray(xs, dtype=float))
        Ly = self._overlaps(np.asarray(ys, dtype=float))
        return Lx.T @ self.values @ Ly

    def to_dict(self):
        return {"type": "block", "boundaries": self.boundaries.tolist(),
                "values": self.values.tolist()}

    def __repr__(self):
        return f"BlockKernel(boundaries={self.boundaries.tolist()}, values={self.values.tolist()})"


def block_kernel_new(boundaries, values) -> BlockKernel:
    return BlockKernel(boundaries, values)


def constant_kernel(c0: float) -> BlockKernel:
    return BlockKernel([0.0, 1.0], [[c0]])


def _dubins_antiderivative(X, Y):
    # F(X, Y) = int_0^X int_0^Y dy dx / max(x, y) = 2m + m log(M/m), m = min, M = max
    m = np.minimum(X, Y)
    M = np.maximum(X, Y)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 2.0 * m + m * np.log(M / m)
    return np.where(m > 0, out, 0.0)


class DubinsKernel(Kernel):
    """``K(x, y) = 1 / max(x, y)``; integrable but unbounded at the origin.

    Cell integrals use the closed-form antiderivative, so cells touching the
    singular corner carry no quadrature error.
    """

    kind = "dubins"

    def __call__(self, x, y):
        return 1.0 / np.maximum(x, y)

    def grid_integrals(self, xs, ys):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        F = _dubins_antiderivative(xs[:, None], ys[None, :])
        return F[1:, 1:] - F[:-1, 1:] - F[1:, :-1] + F[:-1, :-1]

    def to_dict(self):
        return {"type": "dubins"}

    def __repr__(self):
        return "DubinsKernel()"


class PiecewisePsi:
    """Nonnegative activity function on [0, 1].

    With ``len(vals) == len(knots)`` the function is piecewise linear through
    the knots; with ``len(vals) == len(knots) - 1`` it is piecewise constant.
    """

    def __init__(self, knots, vals):
        self.knots = _check_boundaries(knots)
        self.vals = np.asarray(vals, dtype=float)
        if np.any(self.vals < 0):
            raise ValueError("psi must be nonnegative")
        if len(self.vals) == len(self.knots):
            self.linear = True
        elif len(self.vals) == len(self.knots) - 1:
            self.linear = False
        else:
            raise BadBoundaries("vals must have len(knots) or len(knots) - 1 entries")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.linear:
            return np.interp(x, self.knots, self.vals)
        k = np.clip(np.searchsorted(self.knots, x, side="right") - 1, 0, len(self.vals) - 1)
        return self.vals[k]

    def _cumulative(self, x):
        # exact antiderivative from 0
        t, v = self.knots, self.vals
        x = np.asarray(x, dtype=float)
        if self.linear:
            seg = np.concatenate([[0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * np.diff(t))])
            k = np.clip(np.searchsorted(t, x, side="right") - 1, 0, len(t) - 2)
            dx = x - t[k]
            slope = (v[k + 1] - v[k]) / (t[k + 1] - t[k])
            return seg[k] + v[k] * dx + 0.5 * slope * dx**2
        seg = np.concatenate([[0.0], np.cumsum(v * np.diff(t))])
        k = np.clip(np.searchsorted(t, x, side="right") - 1, 0, len(v) - 1)
        return seg[k] + v[k] * (x - t[k])

    def integral(self, a, b):
        return self._cumulative(b) - self._cumulative(a)

    def to_dict(self):
        return {"psi": "piecewise", "knots": self.knots.tolist(), "vals": self.vals.tolist()}


class Rank1Kernel(Kernel):
    """``K(x, y) = psi(x) psi(y)`` for a nonnegative activity function ``psi``."""

    kind = "rank1"

    def __init__(self, psi: Callable, resolution: int = 64):
        self.psi = psi
        self.resolution = resolution

    def __call__(self, x, y):
        return self.psi(x) * self.psi(y)

    def _integrals_1d(self, grid):
        grid = np.asarray(grid, dtype=float)
        if hasattr(self.psi, "integral"):
            return np.asarray(self.psi.integral(grid[:-1], grid[1:]), dtype=float)
        a, b = grid[:-1], grid[1:]

        def rule(n):
            u = (np.arange(n) + 0.5) / n
            pts = a[:, None] + (b - a)[:, None] * u[None, :]
            return np.sum(self.psi(pts), axis=1) * (b - a) / n

        return _richardson(rule, start=self.resolution // 2 or 1)

    def grid_integrals(self, xs, ys):
        return np.outer(self._integrals_1d(xs), self._integrals_1d(ys))

    def to_dict(self):
        if isinstance(self.psi, PiecewisePsi):
            return {"type": "rank1", **self.psi.to_dict()}
        raise TypeError("only piecewise psi can be serialized")


def cell_averages(kernel: Kernel, N: int) -> np.ndarray:
    """The full ``N x N`` matrix of block averages ``K~_N``."""
    grid = np.linspace(0.0, 1.0, N + 1)
    return N * N * kernel.grid_integrals(grid, grid)


def block_average(kernel: Kernel, N: int, i: int, j: int) -> float:
    """``K~_N(i, j)`` with 1-based vertex indices."""
    if not (1 <= i <= N and 1 <= j <= N):
        raise IndexError("vertex indices are 1-based and at most N")
    return N * N * kernel.cell_integral((i - 1) / N, i / N, (j - 1) / N, j / N)


def coarsen(kernel: Kernel, M: int) -> BlockKernel:
    """Replace the kernel by its averages over the uniform ``M x M`` grid."""
    if M < 1:
        raise ValueError("M must be positive")
    grid = np.linspace(0.0, 1.0, M + 1)
    vals = M * M * kernel.grid_integrals(grid, grid)
    return BlockKernel(grid, 0.5 * (vals + vals.T))


def _block_l1(k1: BlockKernel, k2: BlockKernel) -> float:
    grid = np.union1d(k1.boundaries, k2.boundaries)
    mid = 0.5 * (grid[1:] + grid[:-1])
    w = np.diff(grid)
    diff = np.abs(k1(mid[:, None], mid[None, :]) - k2(mid[:, None], mid[None, :]))
    return float(w @ diff @ w)


def _dubins_block_l1(blk: BlockKernel) -> float:
    # |f - v| = (f - v) + 2 (v - f)_+, and (v - f)_+ lives where max(x, y) > 1/v
    dub = DubinsKernel()
    t = blk.boundaries
    total = 0.0
    for s in range(len(t) - 1):
        for u in range(len(t) - 1):
            a, b, c, d = t[s], t[s + 1], t[u], t[u + 1]
            v = blk.values[s, u]
            area = (b - a) * (d - c)
            full = dub.cell_integral(a, b, c, d)
            part = full - v * area
            if v > 0:
                tau = 1.0 / v
                bb, dd = min(b, tau), min(d, tau)
                if bb > a and dd > c:
                    inner_int = dub.cell_integral(a, bb, c, dd)
                    inner_area = (bb - a) * (dd - c)
                else:
                    inner_int = inner_area = 0.0
                outer_int = full - inner_int
                outer_area = area - inner_area
                part += 2.0 * (v * outer_area - outer_int)
            total += part
    return float(total)


def _quad_l1(k1: Kernel, k2: Kernel) -> float:
    grids = [np.array([0.0, 1.0])]
    for k in (k1, k2):
        if isinstance(k, BlockKernel):
            grids.append(k.boundaries)
    grid = np.unique(np.concatenate(grids))

    def rule(n):
        total = 0.0
        for i in range(len(grid) - 1):
            x, hx = _midpoint_nodes(grid[i], grid[i + 1], n)
            for j in range(len(grid) - 1):
                y, hy = _midpoint_nodes(grid[j], grid[j + 1], n)
                X, Y = x[:, None], y[None, :]
                total += np.sum(np.abs(k1(X, Y) - k2(X, Y))) * hx * hy
        return total

    return float(_richardson(rule, max_level=9))


def l1_distance(k1: Kernel, k2: Kernel) -> float:
    """``int int |K1 - K2|`` over the unit square."""
    if isinstance(k1, BlockKernel) and isinstance(k2, BlockKernel):
        return _block_l1(k1, k2)
    if isinstance(k1, DubinsKernel) and isinstance(k2, DubinsKernel):
        return 0.0
    if isinstance(k1, DubinsKernel) and isinstance(k2, BlockKernel):
        return _dubins_block_l1(k2)
    if isinstance(k2, DubinsKernel) and isinstance(k1, BlockKernel):
        return _dubins_block_l1(k1)
    return _quad_l1(k1, k2)


@dataclass(frozen=True)
class PSDCheck:
    ok: bool
    min_eigenvalue: float

    def __bool__(self):
        return self.ok


def psd_check(kernel: Kernel, tol: float = PSD_TOL) -> PSDCheck:
    """Whether the block value matrix is positive semidefinite up to ``tol``.

    Singular (but PSD) matrices only trigger a warning: rank-one kernels are
    never strictly definite.
    """
    if not isinstance(kernel, BlockKernel):
        raise WrongVariant("psd_check needs a block-constant kernel")
    lam = float(np.linalg.eigvalsh(kernel.values).min())
    ok = lam > -tol
    if ok and abs(lam) <= tol and kernel.values.shape[0] > 0:
        warnings.warn(f"block matrix is singular (min eigenvalue {lam:.3g})", stacklevel=2)
    return PSDCheck(ok, lam)


def kernel_from_dict(spec: dict) -> Kernel:
    """Parse a kernel literal such as ``{"type": "dubins"}``."""
    kind = spec.get("type")
    if kind == "block":
        return BlockKernel(spec["boundaries"], spec["values"])
    if kind == "constant":
        return constant_kernel(float(spec["value"]))
    if kind == "dubins":
        return DubinsKernel()
    if kind == "rank1":
        if spec.get("psi") != "piecewise":
            raise ValueError("rank1 kernels need psi='piecewise'")
        return Rank1Kernel(PiecewisePsi(spec["knots"], spec["vals"]))
    raise ValueError(f"unknown kernel type {kind!r}")
