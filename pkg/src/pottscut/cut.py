"""Cut values and Max kappa-cut solvers.

Colours are 0-based internally (``0 .. kappa-1``).  Both solvers accept either
a ``Graph`` or a dense symmetric weight matrix; the objective is
``sum_{i<j} W_ij 1(sigma_i != sigma_j)``.
"""

from __future__ import annotations

import numpy as np

from .constraints import (ProportionConstraint, check_length, count_bounds, feasible_counts,
                          initial_counts, iter_states, satisfies)
from .errors import EmptyConstraintSet, LengthMismatch
from .graph import Graph, SpeciesStructure

__all__ = ["ProportionConstraint", "cut_value", "maxcut_exhaustive", "maxcut_localsearch",
           "empirical_proportions", "feasible_counts"]


def _weights(problem) -> np.ndarray:
    if isinstance(problem, Graph):
        return problem.adjacency().astype(float)
    W = np.asarray(problem, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValueError("weight matrix must be square")
    W = 0.5 * (W + W.T)
    np.fill_diagonal(W, 0.0)
    return W


def _n(problem) -> int:
    return problem.n if isinstance(problem, Graph) else np.asarray(problem).shape[0]


def _species(species, n):
    if species is None:
        return SpeciesStructure.single(n)
    if len(species.assignment) != n:
        raise LengthMismatch("species partition does not cover the graph")
    return species


def cut_value(problem, sigma):
    """Number (or total weight) of edges whose endpoints get different colours."""
    sigma = np.asarray(sigma)
    check_length(sigma, _n(problem))
    if isinstance(problem, Graph):
        e = problem.edges
        return int(np.count_nonzero(sigma[e[:, 0]] != sigma[e[:, 1]]))
    W = _weights(problem)
    diff = sigma[:, None] != sigma[None, :]
    return float(0.5 * np.sum(W * diff))


def _batch_values(problem, states, W):
    if isinstance(problem, Graph):
        e = problem.edges
        return np.count_nonzero(states[:, e[:, 0]] != states[:, e[:, 1]], axis=1)
    total = 0.5 * W.sum()
    same = np.zeros(len(states))
    for k in range(int(states.max()) + 1):
        Ek = (states == k).astype(float)
        same += 0.5 * np.einsum("bi,bi->b", Ek @ W, Ek)
    return total - same


def maxcut_exhaustive(problem, kappa: int, constraint: ProportionConstraint | None = None,
                      species: SpeciesStructure | None = None, budget: int = 10**8):
    """Global maximum by enumeration.

    Returns ``(value, assignment)`` where the assignment is the lexicographically
    smallest maximiser; without a constraint the first vertex is pinned to colour
    0 by label symmetry.
    """
    n = _n(problem)
    sp = _species(species, n)
    W = None if isinstance(problem, Graph) else _weights(problem)
    best_val, best = -np.inf, None
    for states in iter_states(n, kappa, fix_first=constraint is None, budget=budget):
        vals = _batch_values(problem, states, W)
        if constraint is not None:
            vals = np.where(satisfies(states, sp, constraint), vals, -np.inf)
        k = int(np.argmax(vals))
        if vals[k] > best_val:
            best_val, best = vals[k], states[k].astype(np.int64)
    if best is None:
        raise EmptyConstraintSet("no colouring satisfies the constraint")
    value = int(best_val) if isinstance(problem, Graph) else float(best_val)
    return value, best


def _random_assignment(rng, n, kappa, sp, counts):
    if counts is None:
        return rng.integers(0, kappa, size=n)
    sigma = np.empty(n, dtype=np.int64)
    for s in range(sp.n_species):
        idx = sp.members(s)
        colours = np.repeat(np.arange(kappa), counts[s])
        sigma[idx] = rng.permutation(colours)
    return sigma


def _descend(W, sigma, kappa, sp, constraint, lo, hi, tol):
    n = len(sigma)
    rows = np.arange(n)
    onehot = np.zeros((n, kappa))
    onehot[rows, sigma] = 1.0
    nb = W @ onehot
    recolor = constraint is None or constraint.epsilon > 0
    swap = constraint is not None
    if constraint is not None:
        cnt = np.zeros((sp.n_species, kappa), dtype=np.int64)
        np.add.at(cnt, (sp.assignment, sigma), 1)
        same_species = sp.assignment[:, None] == sp.assignment[None, :]
        upper = np.triu(np.ones((n, n), dtype=bool), 1) & same_species
    while True:
        own = nb[rows, sigma]
        gain = own[:, None] - nb  # gain of recolouring i to b
        best_gain, move = tol, None
        if recolor:
            g = gain.copy()
            g[rows, sigma] = -np.inf
            if constraint is not None:
                s = sp.assignment
                g[cnt[s, sigma] - 1 < lo[s, sigma]] = -np.inf
                g[cnt[s, :] + 1 > hi[s, :]] = -np.inf
            k = int(np.argmax(g))
            if g.flat[k] > best_gain:
                best_gain, move = g.flat[k], ("recolor", k // kappa, k % kappa)
        if swap:
            G = gain[:, sigma] + gain[:, sigma].T + 2.0 * W
            G = np.where(upper & (sigma[:, None] != sigma[None, :]), G, -np.inf)
            k = int(np.argmax(G))
            if G.flat[k] > best_gain:
                best_gain, move = G.flat[k], ("swap", k // n, k % n)
        if move is None:
            return sigma
        if move[0] == "recolor":
            _, v, b = move
            a = sigma[v]
            nb[:, a] -= W[:, v]
            nb[:, b] += W[:, v]
            sigma[v] = b
            if constraint is not None:
                s = sp.assignment[v]
                cnt[s, a] -= 1
                cnt[s, b] += 1
        else:
            _, u, v = move
            a, b = sigma[u], sigma[v]
            nb[:, a] += W[:, v] - W[:, u]
            nb[:, b] += W[:, u] - W[:, v]
            sigma[u], sigma[v] = b, a


def maxcut_localsearch(problem, kappa: int, restarts: int = 10, seed: int = 0,
                       constraint: ProportionConstraint | None = None,
                       species: SpeciesStructure | None = None, init=None):
    """Best of ``restarts`` steepest-ascent runs from random colourings.

    Unconstrained runs use single-vertex recolouring; exact proportion
    constraints use swaps inside a species so counts never change.  Ties go
    to the lowest vertex, then the lowest colour.  ``init`` optionally adds
    warm-start assignments that are polished before the random restarts.
    """
    if restarts < 1:
        raise ValueError("restarts must be at least 1")
    n = _n(problem)
    sp = _species(species, n)
    W = _weights(problem)
    scale = float(np.abs(W).max()) if W.size else 0.0
    tol = 1e-9 * max(scale, 1.0)
    counts = lo = hi = None
    if constraint is not None:
        counts = initial_counts(constraint, sp.counts)
        lo, hi = count_bounds(constraint, sp.counts)
    starts = [np.asarray(s, dtype=np.int64).copy() for s in (init or [])]
    children = np.random.SeedSequence(seed).spawn(restarts)
    best_val, best = -np.inf, None
    for k in range(len(starts) + restarts):
        if k < len(starts):
            sigma = starts[k]
        else:
            rng = np.random.default_rng(children[k - len(starts)])
            sigma = _random_assignment(rng, n, kappa, sp, counts)
        sigma = _descend(W, sigma, kappa, sp, constraint, lo, hi, tol)
        val = cut_value(problem, sigma)
        if val > best_val + tol:
            best_val, best = val, sigma.copy()
    return best_val, best


def empirical_proportions(sigma, species: SpeciesStructure, kappa: int) -> np.ndarray:
    """Per-species empirical colour law, shape ``(S, kappa)``."""
    sigma = np.asarray(sigma)
    check_length(sigma, species.N)
    out = np.zeros((species.n_species, kappa))
    np.add.at(out, (species.assignment, sigma), 1.0)
    return out / species.counts[:, None]
