"""Minimisation of the Parisi functional and what is built on top of it:
zero-temperature extrapolation, the supremum over proportions, and the
Max kappa-cut prediction for block kernels."""

from __future__ import annotations

import itertools
import logging
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize

from ..errors import NonMonotoneSequence, NotPSD
from ..kernel import BlockKernel, psd_check
from .functional import (ModelSpec, ParisiParams, ParisiValue, Scheme, _recursion, as_proportions,
                         functional, increment_covariances)

log = logging.getLogger(__name__)

_XSEP = 1e-10  # keeps sorted x strictly increasing


@dataclass(frozen=True)
class MinimizeOptions:
    restarts: int = 8
    seed: int = 0
    search_nodes: int = 20
    nodes: int | None = None  # final quadrature; defaults to search_nodes
    maxfev: int | None = None
    fatol: float = 1e-9
    xatol: float = 1e-6
    perturb: float = 1.0


@dataclass(frozen=True)
class MinimizeResult:
    params: ParisiParams
    value: float
    err: float
    parts: ParisiValue
    stalled: bool
    evaluations: int


class _Encoder:
    """Unconstrained coordinates for ``(x, Q, lambda)``.

    ``x`` is the sorted box coordinate in ``[0, 1]^r``; Q increments are ``A_p A_p^T`` conjugated
    by ``D^{1/2} S^{-1/2}`` with ``S = sum_p A_p A_p^T`` so they sum to
    ``D`` exactly; ``lambda`` is gauge-fixed at the most likely colour and set
    to ``-inf`` on colours of zero proportion.
    """

    def __init__(self, d, r):
        self.d = np.asarray(d, dtype=float)
        self.S, self.k = self.d.shape
        self.r = r
        self.tri = np.tril_indices(self.k)
        self.n_tri = len(self.tri[0])
        self.n_A = self.S * r * self.n_tri if r > 1 else 0
        self.gauge = np.argmax(self.d, axis=1)
        self.slots = [(s, k) for s in range(self.S) for k in range(self.k)
                      if self.d[s, k] > 0 and k != self.gauge[s]]
        self.dim = r + self.n_A + len(self.slots)
        self.sqrt_d = np.sqrt(self.d)

    def decode(self, theta) -> ParisiParams:
        theta = np.asarray(theta, dtype=float)
        r, S, k = self.r, self.S, self.k
        x = np.sort(np.clip(theta[:r], 0.0, 1.0)) * (1.0 - r * _XSEP) + _XSEP * np.arange(r)
        if r > 1:
            L = np.zeros((S, r, k, k))
            L[:, :, self.tri[0], self.tri[1]] = theta[r:r + self.n_A].reshape(S, r, self.n_tri)
            M = L @ np.swapaxes(L, -1, -2)
            tot = M.sum(axis=1) + 1e-12 * np.eye(k)
            vals, vecs = np.linalg.eigh(tot)
            inv_half = (vecs / np.sqrt(vals)[:, None, :]) @ np.swapaxes(vecs, -1, -2)
            dQ = inv_half[:, None] @ M @ inv_half[:, None]
            dQ = self.sqrt_d[:, None, :, None] * dQ * self.sqrt_d[:, None, None, :]
            dQ = 0.5 * (dQ + np.swapaxes(dQ, -1, -2))
            # absorb rounding so the increments sum to diag(d) exactly
            dQ[:, -1] = np.stack([np.diag(row) for row in self.d]) - dQ[:, :-1].sum(axis=1)
        else:
            dQ = np.stack([np.diag(row) for row in self.d])[:, None]
        lam = np.where(self.d > 0, 0.0, -np.inf)
        for (s, c), t in zip(self.slots, theta[r + self.n_A:]):
            lam[s, c] = t
        return ParisiParams.from_increments(x, dQ, lam)

    def encode(self, params: ParisiParams) -> np.ndarray:
        r = self.r
        out = [np.clip((params.x - _XSEP * np.arange(r)) / (1.0 - r * _XSEP), 0.0, 1.0)]
        if r > 1:
            inv = np.where(self.sqrt_d > 0, 1.0 / np.where(self.sqrt_d > 0, self.sqrt_d, 1.0), 0.0)
            dQ = params.increments()
            A = np.zeros((self.S, r, self.n_tri))
            for s in range(self.S):
                for p in range(r):
                    M = inv[s][:, None] * dQ[s, p] * inv[s][None, :]
                    M[self.d[s] == 0, :] = 0.0
                    M[:, self.d[s] == 0] = 0.0
                    M[np.diag_indices(self.k)] += np.where(self.d[s] == 0, 1.0 / r, 0.0)
                    vals, vecs = np.linalg.eigh(0.5 * (M + M.T))
                    M = (vecs * np.clip(vals, 1e-10, None)) @ vecs.T
                    A[s, p] = np.linalg.cholesky(M)[self.tri]
            out.append(A.ravel())
        lam = params.lam
        out.append(np.array([lam[s, c] - lam[s, self.gauge[s]] for s, c in self.slots]))
        return np.concatenate(out)

    def bounds(self) -> optimize.Bounds:
        lo = np.full(self.dim, -np.inf)
        hi = np.full(self.dim, np.inf)
        lo[:self.r], hi[:self.r] = 0.0, 1.0
        return optimize.Bounds(lo, hi)

    def base(self) -> np.ndarray:
        r = self.r
        x = (np.arange(r) + 1.0) / (r + 1.0)
        dQ = np.stack([np.diag(row) for row in self.d])[:, None].repeat(r, axis=1) / r
        lam = np.where(self.d > 0, np.log(np.where(self.d > 0, self.d, 1.0)), -np.inf)
        return self.encode(ParisiParams.from_increments(x, dQ, lam))


def optimal_lambda(params: ParisiParams, model: ModelSpec, scheme: Scheme | None = None) -> ParisiParams:
    """Exact inner minimisation over the multipliers.

    For fixed ``(x, Q)`` the functional is convex and separable in
    ``lambda^s``; its gradient is the tilted average of the colour softmax.
    """
    scheme = scheme or Scheme()
    d = params.d
    C = increment_covariances(params, model)
    lam = params.lam.copy()
    for s in range(d.shape[0]):
        free = np.flatnonzero(d[s] > 0)
        lam[s, d[s] == 0] = -np.inf
        if len(free) <= 1:
            lam[s, free] = 0.0
            continue
        g = free[np.argmax(d[s, free])]
        movable = free[free != g]

        def phi(mu, s=s, g=g, movable=movable):
            ls = lam[s].copy()
            ls[g] = 0.0
            ls[movable] = mu
            val, grad = _recursion(ls, params.x, C[s], scheme, True)
            return val - float(ls[movable] @ d[s, movable]), grad[movable] - d[s, movable]

        mu0 = lam[s, movable] - lam[s, g] if np.all(np.isfinite(lam[s, free])) else np.log(d[s, movable] / d[s, g])
        res = optimize.minimize(phi, mu0, jac=True, method="BFGS", options={"gtol": 1e-11, "maxiter": 500})
        lam[s, g] = 0.0
        lam[s, movable] = res.x
    return replace(params, lam=lam)


def pad_levels(params: ParisiParams, r: int) -> ParisiParams:
    """Embed ``params`` at depth ``r`` by repeating the top level; a zero
    increment leaves the functional value unchanged."""
    x, Q = params.x, params.Q
    while len(x) < r:
        x = np.append(x, 0.5 * (x[-1] + 1.0))
        Q = np.concatenate([Q, Q[:, -1:]], axis=1)
    return ParisiParams(x, Q, params.lam)


def minimize(model: ModelSpec, d, r: int, opts: MinimizeOptions | None = None,
             init: ParisiParams | None = None) -> MinimizeResult:
    """Approximate ``inf_{x, Q, lambda}`` of the functional at fixed ``r``.

    Nelder-Mead restarts run on a fixed quadrature rule (so the objective is
    deterministic); the best point is then polished on the final rule and the
    multipliers are solved exactly.  ``init`` may have fewer levels than
    ``r``; it is then padded, so the result cannot exceed its value.
    """
    if r < 1:
        raise ValueError("r must be at least 1")
    opts = opts or MinimizeOptions()
    d = as_proportions(d, model)
    enc = _Encoder(d, r)
    search = Scheme(nodes=opts.search_nodes)
    final = Scheme(nodes=opts.nodes or opts.search_nodes)
    maxfev = opts.maxfev or 400 * enc.dim
    evaluations = 0

    def objective(theta, scheme):
        nonlocal evaluations
        evaluations += 1
        try:
            v = functional(enc.decode(theta), model, d, scheme).value
        except (ArithmeticError, np.linalg.LinAlgError):
            return np.inf
        return v if np.isfinite(v) else np.inf

    rng = np.random.default_rng(opts.seed)
    base = enc.base()
    starts = []
    if init is not None and init.r < r:
        init = pad_levels(init, r)
    warm = enc.encode(init) if init is not None and init.r == r else None
    if warm is not None:
        starts.append(warm)
    starts.append(base)
    while len(starts) < max(opts.restarts, 1):
        t = base + opts.perturb * rng.standard_normal(enc.dim)
        t[:r] = np.clip(t[:r], 0.0, 1.0)
        starts.append(t)

    bounds = enc.bounds()

    def run(theta0, scheme, fev):
        nm = {"maxfev": fev, "xatol": opts.xatol, "fatol": opts.fatol, "adaptive": enc.dim > 4}
        return optimize.minimize(objective, theta0, args=(scheme,), method="Nelder-Mead",
                                 bounds=bounds, options=nm)

    # short scouting runs, then the best one continues with the full budget
    scout = min(maxfev, 60 * enc.dim)
    best = min((run(t, search, scout) for t in starts), key=lambda res: res.fun)
    res = run(best.x, search, maxfev)
    theta, stalled = res.x, res.status != 0
    if final != search:
        # the coarse rule can lure the search away from the warm start's basin;
        # polish whichever candidate is lower on the final rule
        if warm is not None and objective(warm, final) < objective(theta, final):
            theta = warm
        res = run(theta, final, maxfev)
        if res.fun <= objective(theta, final):
            theta = res.x
        stalled = res.status != 0
    params = optimal_lambda(enc.decode(theta), model, final)
    val = functional(params, model, d, final, error_estimate=True)
    if stalled:
        log.info("minimize hit the evaluation cap; reporting best-so-far")
    return MinimizeResult(params, val.value, val.err, val, stalled, evaluations)


def _rescale(params: ParisiParams, factor: float) -> ParisiParams:
    """Warm start for ``beta -> beta * factor``: ``x`` scales down, ``lambda`` up."""
    x = np.where(params.x < 1.0 - 1e-6, params.x / factor, params.x)
    x = np.sort(np.clip(x, 0.0, 1.0)) * (1.0 - len(x) * _XSEP) + _XSEP * np.arange(len(x))
    return ParisiParams(x, params.Q, params.lam * factor)


@dataclass(frozen=True)
class GroundStateFit:
    value: float  # extrapolated limit of inf P_beta / beta
    slope: float
    residual: float
    betas: np.ndarray
    values: np.ndarray  # inf P_beta at each beta
    errors: np.ndarray
    monotone: bool
    params: list = field(default_factory=list, repr=False)


def default_nodes(beta: float, base: int = 20, cap: int = 160) -> int:
    """Quadrature nodes per dimension at inverse temperature ``beta``."""
    return int(min(cap, max(base, math.ceil(10 * beta))))


def ground_state(model: ModelSpec, d, beta_grid, r: int, opts: MinimizeOptions | None = None,
                 strict: bool = False) -> GroundStateFit:
    """Zero-temperature limit of ``inf P_beta / beta``.

    Minimises at each beta (warm-starting along the grid), fits
    ``value / beta = a + b / beta`` and returns ``a``.  ``value / beta`` must
    not increase with beta; a violation points at an optimiser failure and
    raises ``NonMonotoneSequence`` when ``strict``.
    """
    betas = np.asarray(sorted(beta_grid), dtype=float)
    if len(betas) < 3 or np.any(betas <= 0):
        raise ValueError("need at least three positive inverse temperatures")
    opts = opts or MinimizeOptions()
    vals, errs, params = [], [], []
    prev = None
    for i, beta in enumerate(betas):
        o = replace(opts, nodes=opts.nodes or default_nodes(beta, opts.search_nodes))
        if prev is not None:
            # the warm start carries the search; keep one cold start as a guard
            o = replace(o, restarts=min(opts.restarts, 2))
        init = _rescale(prev.params, beta / betas[i - 1]) if prev is not None else None
        res = minimize(model.at_beta(beta), d, r, o, init=init)
        vals.append(res.value)
        errs.append(res.err)
        params.append(res.params)
        prev = res
    vals, errs = np.array(vals), np.array(errs)
    per = vals / betas
    A = np.column_stack([np.ones_like(betas), 1.0 / betas])
    coef, *_ = np.linalg.lstsq(A, per, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - per) ** 2)))
    slack = 1e-6 + np.nan_to_num(errs[1:] / betas[1:] + errs[:-1] / betas[:-1])
    monotone = bool(np.all(np.diff(per) <= slack))
    if not monotone:
        msg = f"P_beta/beta increases along the beta grid: {per.tolist()}"
        if strict:
            raise NonMonotoneSequence(msg)
        warnings.warn(msg, stacklevel=2)
    return GroundStateFit(float(coef[0]), float(coef[1]), resid, betas, vals, errs, monotone, params)


def simplex_grid(kappa: int, step: float) -> np.ndarray:
    m = int(round(1.0 / step))
    pts = [c for c in itertools.product(range(m + 1), repeat=kappa - 1) if sum(c) <= m]
    return np.array([[*c, m - sum(c)] for c in pts], dtype=float) / m


def canonical_key(d) -> tuple:
    """Key invariant under relabelling colours jointly across species."""
    d = np.round(np.asarray(d, dtype=float), 9)
    k = d.shape[1]
    return min(tuple(d[:, list(p)].ravel()) for p in itertools.permutations(range(k)))


def _simplex_search(objective, S, kappa, step, refine_step, max_refine=50):
    """Grid search over the product of simplices followed by one hill-climbing
    pass that moves mass ``refine_step`` between colours of one species."""
    grid = simplex_grid(kappa, step)
    best_d, best_v = None, -np.inf
    for combo in itertools.product(range(len(grid)), repeat=S):
        d = grid[list(combo)]
        v = objective(d)
        if v > best_v + 1e-12:
            best_d, best_v = d, v
    if refine_step:
        for _ in range(max_refine):
            moved = False
            cand = []
            for s in range(S):
                for a, b in itertools.permutations(range(kappa), 2):
                    if best_d[s, a] >= refine_step - 1e-12:
                        d = best_d.copy()
                        d[s, a] -= refine_step
                        d[s, b] += refine_step
                        cand.append(np.clip(d, 0.0, 1.0))
            for d in cand:
                v = objective(d)
                if v > best_v + 1e-12:
                    best_d, best_v, moved = d, v, True
            if not moved:
                break
    return best_d, best_v


def free_energy_unconstrained(model: ModelSpec, step: float = 0.05, r: int = 1,
                              opts: MinimizeOptions | None = None, refine_step: float = 0.01):
    """``sup_d inf P`` over a simplex mesh with one local refinement pass.

    Returns ``(d_star, value)``.
    """
    cache = {}

    def objective(d):
        key = canonical_key(d)
        if key not in cache:
            cache[key] = minimize(model, d, r, opts).value
        return cache[key]

    return _simplex_search(objective, model.n_species, model.kappa, step, refine_step)


def leading_term(kernel: BlockKernel, c: float, d) -> float:
    """``(c/2) sum_{s,t} K(s,t) rho_s rho_t (1 - <d^s, d^t>)``."""
    rho = kernel.spec.rho
    d = np.atleast_2d(d)
    return float(0.5 * c * np.sum(kernel.values * np.outer(rho, rho) * (1.0 - d @ d.T)))


def maxcut_model(kernel: BlockKernel, kappa: int) -> ModelSpec:
    """Potts model whose ground state gives the Max-cut correction.

    The Gaussian surrogate has symmetric couplings with variance ``K`` on each
    unordered pair; with independent ordered-pair disorder that is
    ``delta2 = 2 K``.
    """
    chk = psd_check(kernel)
    if not chk.ok:
        raise NotPSD(f"block matrix has eigenvalue {chk.min_eigenvalue:.3g}")
    return ModelSpec(kappa, kernel.spec.rho, 2.0 * kernel.values)


@dataclass(frozen=True)
class Prediction:
    d: np.ndarray
    value: float
    leading: float
    ground_state: float
    c: float


def predict_maxcut(kernel: BlockKernel, c: float, kappa: int, step: float = 0.05, r: int = 2,
                   beta_grid=(2.0, 4.0, 8.0, 16.0), opts: MinimizeOptions | None = None,
                   refine_step: float = 0.01, cache: dict | None = None) -> Prediction:
    """``sup_d [(c/2) sum K rho rho (1 - <d^s, d^t>) + (sqrt(c)/2) P(d)]``.

    ``cache`` maps ``canonical_key(d)`` to ``P(d)`` and may be shared across
    calls with different ``c``.
    """
    model = maxcut_model(kernel, kappa)
    S = model.n_species
    if c == 0:
        return Prediction(np.full((S, kappa), 1.0 / kappa), 0.0, 0.0, float("nan"), 0.0)
    cache = {} if cache is None else cache

    def gs(d):
        key = canonical_key(d)
        if key not in cache:
            cache[key] = ground_state(model, d, beta_grid, r, opts).value
        return cache[key]

    def objective(d):
        return leading_term(kernel, c, d) + 0.5 * math.sqrt(c) * gs(d)

    d_star, value = _simplex_search(objective, S, kappa, step, refine_step)
    return Prediction(d_star, value, leading_term(kernel, c, d_star), gs(d_star), float(c))
