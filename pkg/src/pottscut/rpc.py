"""Ruelle probability cascades, sampled on a truncated tree.

Used as a Monte Carlo oracle for the Parisi recursion: for Gaussian fields
attached to tree edges, ``E log sum_a v_a exp(f(a))`` equals the backward
recursion ``X_{p-1} = (1/x_{p-1}) log E exp(x_{p-1} X_p)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import DegenerateCovariance, NonMonotoneQ
from .parisi.functional import ModelSpec, ParisiParams, _lagrange, increment_covariances
from .stats import Estimate, child_seeds

__all__ = ["CascadeSpec", "CascadeSample", "sample_cascade", "cascade_log_sum",
           "y_term_closed_form", "y_covariances", "z_term_mc", "guerra_bound_mc"]


@dataclass(frozen=True)
class CascadeSpec:
    """Depth ``r = len(x)``; children of a depth-``p`` node use ``x[p]``.

    Each node keeps its ``truncation`` largest atoms plus ``tail`` equal atoms
    carrying the conditional mean of the discarded mass.
    """

    x: tuple
    truncation: int = 256
    tail: int = 8

    def __post_init__(self):
        x = tuple(float(v) for v in np.atleast_1d(self.x))
        if not x or x[0] <= 0 or x[-1] >= 1 or np.any(np.diff(x) <= 0):
            raise ValueError("x must be strictly increasing inside (0, 1)")
        if self.truncation < 2 or self.tail < 0:
            raise ValueError("truncation must be at least 2")
        object.__setattr__(self, "x", x)

    @property
    def r(self) -> int:
        return len(self.x)

    @property
    def width(self) -> int:
        return self.truncation + self.tail

    @property
    def leaves(self) -> int:
        return self.width ** self.r


@dataclass(frozen=True)
class CascadeSample:
    """Normalised leaf weights (lexicographic over ``[width]^r``) and the
    per-level log atoms; ``log_atoms[p]`` has shape ``(width^(p+1),)``."""

    weights: np.ndarray
    log_atoms: list


def _log_atoms(rng, x, count, T, tail):
    # decreasing atoms Gamma_n^{-1/x} of a Poisson process with intensity x t^{-1-x}
    gam = np.cumsum(rng.standard_exponential((count, T)), axis=1)
    logw = -np.log(gam) / x
    if tail:
        # mass beyond the truncation, E[sum_{n>T} Gamma_n^{-1/x} | Gamma_T], shared evenly
        log_mass = np.log(x / (1.0 - x)) + (1.0 - 1.0 / x) * np.log(gam[:, -1])
        logw = np.concatenate([logw, np.repeat(log_mass[:, None] - np.log(tail), tail, axis=1)], axis=1)
    return logw.ravel()


def _log_leaf_weights(spec: CascadeSpec, rng):
    width = spec.width
    logw = np.zeros(1)
    atoms = []
    for xp in spec.x:
        a = _log_atoms(rng, xp, len(logw), spec.truncation, spec.tail)
        atoms.append(a)
        logw = (logw[:, None] + a.reshape(len(logw), width)).ravel()
    return logw, atoms


def sample_cascade(spec: CascadeSpec, seed: int) -> CascadeSample:
    rng = np.random.default_rng(seed)
    logw, atoms = _log_leaf_weights(spec, rng)
    w = np.exp(logw - logsumexp(logw))
    return CascadeSample(w / w.sum(), atoms)


def _factor(C, scale_ref=1.0):
    C = np.atleast_2d(np.asarray(C, dtype=float))
    C = 0.5 * (C + C.T)
    vals, vecs = np.linalg.eigh(C)
    scale = max(float(np.abs(vals).max()) if vals.size else 0.0, scale_ref * 1e-300)
    if vals.size and vals.min() < -1e-8 * max(scale, 1.0):
        raise DegenerateCovariance(f"increment covariance has eigenvalue {vals.min():.3g}")
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def _edge_fields(spec: CascadeSpec, factors, rng):
    """Leaf fields ``sum_p z_p`` with one independent ``z_p`` per tree edge."""
    T = spec.width
    dim = factors[0].shape[0]
    z = np.zeros((1, dim))
    for F in factors:
        step = rng.standard_normal((len(z) * T, F.shape[1])) @ F.T
        z = np.repeat(z, T, axis=0) + step
    return z


def cascade_log_sum(spec: CascadeSpec, payoff, samples: int, seed: int, covariances) -> Estimate:
    """Monte Carlo ``E log sum_a v_a exp(payoff(z_a))``.

    ``covariances[p]`` is the covariance of the Gaussian on edges entering
    depth ``p + 1`` (a scalar or a ``kappa x kappa`` matrix).  ``payoff`` maps
    the leaf fields, shape ``(leaves, dim)``, to one real per leaf.
    """
    if samples < 2:
        raise ValueError("need at least two samples")
    if len(covariances) != spec.r:
        raise ValueError("one covariance per cascade level is required")
    factors = [_factor(C) for C in covariances]
    vals = np.empty(samples)
    for i, s in enumerate(child_seeds(seed, samples)):
        rng = np.random.default_rng(s)
        logw, _ = _log_leaf_weights(spec, rng)
        z = _edge_fields(spec, factors, rng)
        f = np.asarray(payoff(z), dtype=float).reshape(-1)
        vals[i] = logsumexp(logw + f) - logsumexp(logw)
    return Estimate.from_samples(vals)


def y_term_closed_form(spec: CascadeSpec, Q, rho, delta2) -> float:
    """``(1/2) sum_l x_l (q_{l+1} - q_l)`` with
    ``q_l = sum_{s,t} delta2_st rho_s rho_t (Q_l^s, Q_l^t)``."""
    q = y_covariances(Q, rho, delta2, levels=True)
    return float(0.5 * np.sum(np.asarray(spec.x) * np.diff(q)))


def y_covariances(Q, rho, delta2, levels: bool = False) -> np.ndarray:
    """Variances of the increments of the scalar cascade field ``Y``.

    With ``levels=True`` return the cumulative ``q_l`` instead.
    """
    Q = np.asarray(Q, dtype=float)
    rho = np.asarray(rho, dtype=float)
    for s in range(Q.shape[0]):
        for dq in np.diff(Q[s], axis=0):
            if np.linalg.eigvalsh(0.5 * (dq + dq.T)).min() < -1e-10:
                raise NonMonotoneQ("Q increments must be positive semidefinite")
    gram = np.einsum("splk,tplk->pst", Q, Q)
    q = np.einsum("pst,st->p", gram, np.asarray(delta2, dtype=float) * np.outer(rho, rho))
    return q if levels else np.diff(q)


def z_term_mc(params: ParisiParams, model: ModelSpec, samples: int = 200, seed: int = 0,
              truncation: int = 64, tail: int = 8) -> Estimate:
    """Cascade estimate of ``sum_s rho_s E log sum_a v_a exp(X_r^s(a))``, the
    quantity the recursion returns as ``sum_s rho_s X_0^s``."""
    spec = CascadeSpec(tuple(params.x), truncation, tail)
    C = increment_covariances(params, model)
    mean, var = 0.0, 0.0
    for s in range(model.n_species):
        lam = params.lam[s]
        est = cascade_log_sum(spec, lambda z, lam=lam: logsumexp(z + lam, axis=1), samples,
                              seed + s, list(C[s]))
        mean += model.rho[s] * est.mean
        var += (model.rho[s] * est.stderr) ** 2
    return Estimate(mean, float(np.sqrt(var)), samples)


def guerra_bound_mc(params: ParisiParams, model: ModelSpec, samples: int = 200, seed: int = 0,
                    truncation: int = 64) -> Estimate:
    """Cascade estimate of the Parisi functional (z-term minus the multiplier
    and y-terms); the y-term is computed in closed form."""
    z = z_term_mc(params, model, samples, seed, truncation)
    lag = _lagrange(params, model, params.d)
    y = y_term_closed_form(CascadeSpec(tuple(params.x)), params.Q, model.rho, model.delta2_eff)
    return Estimate(z.mean - lag - y, z.stderr, samples)
