"""Parisi functional of the constrained inhomogeneous Potts glass.

The functional takes ``r`` levels, an increasing sequence ``x_0 < ... < x_{r-1}``
in ``(0, 1)``, per-species increasing PSD matrices ``0 = Q_0 <= ... <= Q_r =
diag(d^s)`` and Lagrange multipliers ``lambda^s``.  Level ``p`` of species
``s`` carries a Gaussian increment ``z_p`` with covariance
``2 sum_t delta2_st rho_t (Q_p^t - Q_{p-1}^t)``, and

    X_r = log sum_k exp(sum_p z_p(k) + lambda_k)
    X_p = (1/x_p) log E_{z_{p+1}} exp(x_p X_{p+1})

Because ``X`` shifts by ``c`` when every colour's field shifts by ``c``, each
level is integrated over the ``kappa - 1`` colour differences only; the
component along colour 0 that is independent of the differences is
integrated in closed form.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp, softmax
from scipy.stats import norm, qmc

from ..errors import DegenerateCovariance, NonMonotoneQ, QuadratureFailure

CLIP_TOL = 1e-8
X_ZERO = 1e-6


@dataclass(frozen=True)
class ModelSpec:
    """Colours, species proportions and interaction matrix.

    The inverse temperature enters only through ``delta2 * beta**2``.
    """

    kappa: int
    rho: np.ndarray
    delta2: np.ndarray
    beta: float = 1.0

    def __post_init__(self):
        rho = np.atleast_1d(np.asarray(self.rho, dtype=float))
        d2 = np.atleast_2d(np.asarray(self.delta2, dtype=float))
        if not math.isclose(rho.sum(), 1.0, abs_tol=1e-9) or np.any(rho <= 0):
            raise ValueError("rho must be positive and sum to 1")
        if d2.shape != (len(rho), len(rho)) or not np.allclose(d2, d2.T):
            raise ValueError("delta2 must be a symmetric S x S matrix")
        if np.linalg.eigvalsh(d2).min() < -1e-10:
            raise ValueError("delta2 must be positive semidefinite")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "delta2", d2)

    @property
    def n_species(self) -> int:
        return len(self.rho)

    @property
    def delta2_eff(self) -> np.ndarray:
        return self.beta**2 * self.delta2

    def at_beta(self, beta: float) -> "ModelSpec":
        return replace(self, beta=float(beta))

    def digest(self) -> str:
        blob = json.dumps({"kappa": self.kappa, "rho": np.round(self.rho, 12).tolist(),
                           "delta2": np.round(self.delta2, 12).tolist()}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]

    @classmethod
    def single(cls, kappa, delta2=1.0, beta=1.0):
        return cls(kappa, [1.0], [[delta2]], beta)


def as_proportions(d, model: ModelSpec) -> np.ndarray:
    d = np.atleast_2d(np.asarray(d, dtype=float))
    if d.shape != (model.n_species, model.kappa):
        raise ValueError(f"d must have shape {(model.n_species, model.kappa)}")
    if np.any(d < -1e-12) or not np.allclose(d.sum(axis=1), 1.0, atol=1e-9):
        raise ValueError("each d^s must be a probability vector")
    return np.clip(d, 0.0, None)


def d_digest(d) -> str:
    blob = json.dumps(np.round(np.asarray(d, dtype=float), 12).tolist())
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


@dataclass(frozen=True)
class ParisiParams:
    """``x`` has length ``r``; ``Q`` has shape ``(S, r+1, kappa, kappa)`` with
    ``Q[:, 0] = 0`` and ``Q[:, r] = diag(d)``; ``lam`` has shape ``(S, kappa)``."""

    x: np.ndarray
    Q: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        Q = np.asarray(self.Q, dtype=float)
        lam = np.atleast_2d(np.asarray(self.lam, dtype=float))
        if Q.ndim != 4 or Q.shape[1] != len(x) + 1:
            raise ValueError("Q must have shape (S, r+1, kappa, kappa)")
        if np.any(np.diff(x) <= 0) or x[0] < 0 or x[-1] > 1:
            raise ValueError("x must be strictly increasing inside [0, 1]")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "lam", lam)

    @property
    def r(self) -> int:
        return len(self.x)

    @property
    def d(self) -> np.ndarray:
        return np.diagonal(self.Q[:, -1], axis1=1, axis2=2).copy()

    def increments(self) -> np.ndarray:
        return np.diff(self.Q, axis=1)

    @classmethod
    def from_increments(cls, x, dQ, lam):
        dQ = np.asarray(dQ, dtype=float)
        Q = np.concatenate([np.zeros_like(dQ[:, :1]), np.cumsum(dQ, axis=1)], axis=1)
        return cls(x, Q, lam)

    def to_dict(self) -> dict:
        lam = np.where(np.isfinite(self.lam), self.lam, -1e300)
        return {"x": self.x.tolist(), "Q": self.Q.tolist(), "lambda": lam.tolist()}

    @classmethod
    def from_dict(cls, data) -> "ParisiParams":
        lam = np.asarray(data["lambda"], dtype=float)
        lam = np.where(lam <= -1e299, -np.inf, lam)
        return cls(data["x"], data["Q"], lam)


def replica_symmetric(d, x=(1.0 - 1e-9,), lam=None) -> ParisiParams:
    """One level with ``Q_1 = D``; ``x -> 1`` is the annealed point."""
    d = np.atleast_2d(np.asarray(d, dtype=float))
    S, k = d.shape
    Q = np.zeros((S, 2, k, k))
    Q[:, 1] = np.stack([np.diag(row) for row in d])
    lam = np.zeros((S, k)) if lam is None else lam
    return ParisiParams(np.asarray(x, dtype=float), Q, lam)


def increment_covariances(params: ParisiParams, model: ModelSpec) -> np.ndarray:
    """``C[s, p-1] = 2 sum_t delta2_st rho_t (Q_p^t - Q_{p-1}^t)``, clipped to PSD."""
    dQ = params.increments()
    C = 2.0 * np.einsum("st,t,tpab->spab", model.delta2_eff, model.rho, dQ)
    C = 0.5 * (C + np.swapaxes(C, -1, -2))
    out = np.empty_like(C)
    for s in range(C.shape[0]):
        for p in range(C.shape[1]):
            out[s, p] = _clip_psd(C[s, p])
    return out


def _clip_psd(C):
    if not np.any(C):
        return C
    vals, vecs = np.linalg.eigh(C)
    tol = CLIP_TOL * max(1.0, float(np.abs(C).max()))
    if vals.min() < -tol:
        raise DegenerateCovariance(f"increment covariance has eigenvalue {vals.min():.3g}")
    vals = np.clip(vals, 0.0, None)
    return (vecs * vals) @ vecs.T


def covariance_factors(C) -> np.ndarray:
    """Symmetric square roots of a stack of PSD matrices."""
    C = np.asarray(C)
    vals, vecs = np.linalg.eigh(C)
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))[..., None, :]) @ np.swapaxes(vecs, -1, -2)


@dataclass(frozen=True)
class Scheme:
    """Gaussian expectation rule for one level.

    ``kind="auto"`` picks tensor Gauss-Hermite when the tree stays below
    ``max_leaves`` and scrambled Sobol points otherwise.
    """

    kind: str = "auto"
    nodes: int = 20
    qmc_points: int = 1 << 14
    max_leaves: int = 1 << 22
    seed: int = 0


@lru_cache(maxsize=64)
def _gh_rule(n, dim):
    t, w = np.polynomial.hermite_e.hermegauss(n)
    w = w / w.sum()
    if dim == 0:
        return np.zeros((1, 0)), np.zeros(1)
    grids = np.meshgrid(*([t] * dim), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=1)
    lw = np.zeros(n**dim)
    for g in np.meshgrid(*([np.log(w)] * dim), indexing="ij"):
        lw += g.ravel()
    return nodes, lw


@lru_cache(maxsize=64)
def _qmc_rule(m, dim, seed):
    if dim == 0:
        return np.zeros((1, 0)), np.zeros(1)
    pts = qmc.Sobol(dim, scramble=True, seed=seed).random(m)
    nodes = norm.ppf(np.clip(pts, 1e-12, 1 - 1e-12))
    return nodes, np.full(m, -np.log(m))


def _reduce_level(C):
    """Split an increment ``z ~ N(0, C)`` into colour differences ``w = B xi``
    and ``z_0 = a . xi + sqrt(v) eta`` with ``eta`` independent of ``xi``."""
    kappa = C.shape[0]
    vals, vecs = np.linalg.eigh(C)
    F = vecs * np.sqrt(np.clip(vals, 0.0, None))
    if kappa == 1:
        return np.zeros((0, 0)), np.zeros(0), float(C[0, 0])
    G = F[1:] - F[0]
    U, sv, Vt = np.linalg.svd(G, full_matrices=True)
    scale = max(float(np.abs(F).max()), 1e-300)
    rank = int(np.sum(sv > 1e-10 * scale))
    B = U[:, :rank] * sv[:rank]
    a = F[0] @ Vt.T
    return B, a[:rank], float(np.sum(a[rank:] ** 2))


def _rules(C_levels, scheme: Scheme):
    reduced = [_reduce_level(C) for C in C_levels]
    dims = [B.shape[1] for B, _, _ in reduced]
    total_dim = sum(dims)
    kappa = C_levels.shape[-1] if len(C_levels) else 1
    use_gh = scheme.kind == "gh"
    n = scheme.nodes
    if scheme.kind == "auto":
        use_gh = kappa <= 3 and len(C_levels) <= 3
        # shrink the node count until the quadrature tree fits the leaf budget
        while total_dim and n > 8 and float(n) ** total_dim > scheme.max_leaves:
            n -= 1
        if total_dim and float(n) ** total_dim > scheme.max_leaves:
            use_gh = False
    active = sum(1 for k in dims if k > 0)
    rules = []
    for (B, a, v), k in zip(reduced, dims):
        if use_gh:
            nodes, lw = _gh_rule(n, k)
        else:
            per = scheme.qmc_points
            if active > 1:
                per = min(per, 2 ** int(np.log2(scheme.max_leaves) // active))
            nodes, lw = _qmc_rule(int(per), k, scheme.seed)
        rules.append((B, a, v, nodes, lw))
    return rules


def _canonical_order(lam, C_levels):
    """Colour order fixed by the data, so relabelled inputs hit the same rule."""
    keys = [lam]
    for C in C_levels:
        keys += [np.diag(C), C.sum(axis=1)]
    return np.lexsort(np.round(np.array(keys[::-1]), 12))


def _recursion(lam, x, C_levels, scheme: Scheme, want_grad: bool):
    # the colour-difference reduction singles out one colour; evaluating in a
    # canonical order keeps the value exactly invariant under relabelling
    order = _canonical_order(lam, C_levels)
    val, grad = _recursion_ordered(lam[order], x, C_levels[:, order][:, :, order], scheme, want_grad)
    if grad is not None:
        out = np.empty_like(grad)
        out[order] = grad
        grad = out
    return val, grad


def _recursion_ordered(lam, x, C_levels, scheme: Scheme, want_grad: bool):
    kappa = len(lam)
    rules = _rules(C_levels, scheme)
    # forward: colour-difference fields at the leaves
    u = np.zeros((1, kappa - 1))
    sizes = []
    for B, a, v, nodes, lw in rules:
        step = nodes @ B.T if B.size else np.zeros((len(nodes), kappa - 1))
        u = (u[:, None, :] + step[None, :, :]).reshape(len(u) * len(nodes), kappa - 1)
        sizes.append(len(nodes))
    fields = np.concatenate([np.zeros((len(u), 1)), u], axis=1) + lam[None, :]
    f = logsumexp(fields, axis=1)
    if not np.all(np.isfinite(f)):
        raise QuadratureFailure("non-finite terminal values")
    grad = softmax(fields, axis=1) if want_grad else None
    # backward: X_{p-1} = (1/x_{p-1}) log E exp(x_{p-1} X_p)
    for p in range(len(rules) - 1, -1, -1):
        B, a, v, nodes, lw = rules[p]
        n = sizes[p]
        f = f.reshape(-1, n)
        shift = nodes @ a if a.size else np.zeros(n)
        xp = x[p]
        if xp < X_ZERO:
            w = np.exp(lw)
            f_new = (f + shift[None, :]) @ w
            pi = np.broadcast_to(w, f.shape)
        else:
            t = lw[None, :] + xp * (f + shift[None, :])
            f_new = logsumexp(t, axis=1) / xp + 0.5 * xp * v
            pi = softmax(t, axis=1) if want_grad else None
        if want_grad:
            grad = np.einsum("mn,mnk->mk", pi, grad.reshape(-1, n, kappa))
        f = f_new
    return float(f[0]), (grad[0] if want_grad else None)


def recursion_x0(params: ParisiParams, model: ModelSpec, s: int, scheme: Scheme | None = None,
                 want_grad: bool = False, C=None):
    """The non-random ``X_0`` of species ``s`` (and optionally its gradient in
    ``lambda^s``)."""
    scheme = scheme or Scheme()
    C = increment_covariances(params, model) if C is None else C
    val, grad = _recursion(params.lam[s], params.x, C[s], scheme, want_grad)
    return (val, grad) if want_grad else val


def y_levels(params: ParisiParams, model: ModelSpec) -> np.ndarray:
    """``q_l = sum_{s,t} delta2_st rho_s rho_t (Q_l^s, Q_l^t)``, the covariance of
    the cascade field ``Y`` at overlap level ``l``."""
    gram = np.einsum("splk,tplk->pst", params.Q, params.Q)
    w = model.delta2_eff * np.outer(model.rho, model.rho)
    return np.einsum("pst,st->p", gram, w)


def y_term(params: ParisiParams, model: ModelSpec) -> float:
    q = y_levels(params, model)
    return float(0.5 * np.sum(params.x * np.diff(q)))


@dataclass(frozen=True)
class ParisiValue:
    value: float
    x0: np.ndarray
    z_term: float
    lagrange_term: float
    y_term: float
    err: float = float("nan")

    def recombined(self) -> float:
        return self.z_term - self.lagrange_term - self.y_term


def _lagrange(params, model, d):
    prod = np.where(d > 0, np.where(d > 0, params.lam, 0.0) * d, 0.0)
    return float(np.sum(model.rho[:, None] * prod))


def functional(params: ParisiParams, model: ModelSpec, d=None, scheme: Scheme | None = None,
               error_estimate: bool = False) -> ParisiValue:
    """Evaluate the Parisi functional and keep its three summands."""
    d = params.d if d is None else as_proportions(d, model)
    if not np.allclose(params.d, d, atol=1e-9):
        raise ValueError("Q_r must equal diag(d)")
    scheme = scheme or Scheme()
    C = increment_covariances(params, model)
    x0 = np.array([recursion_x0(params, model, s, scheme, C=C) for s in range(model.n_species)])
    z = float(model.rho @ x0)
    lag = _lagrange(params, model, d)
    y = y_term(params, model)
    err = float("nan")
    if error_estimate:
        fine = replace(scheme, nodes=int(scheme.nodes * 1.5) + 1, qmc_points=scheme.qmc_points * 2)
        x0f = np.array([recursion_x0(params, model, s, fine, C=C) for s in range(model.n_species)])
        err = float(abs(model.rho @ (x0f - x0)))
    return ParisiValue(z - lag - y, x0, z, lag, y, err)


def check_monotone_q(params: ParisiParams, tol: float = 1e-10) -> None:
    for s in range(params.Q.shape[0]):
        for dq in params.increments()[s]:
            if np.linalg.eigvalsh(0.5 * (dq + dq.T)).min() < -tol:
                raise NonMonotoneQ("Q increments must be positive semidefinite")
