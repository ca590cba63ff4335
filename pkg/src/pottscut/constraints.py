"""Per-species colour proportions and enumeration of (constrained) colourings."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceeded, EmptyConstraintSet, LengthMismatch

ENUM_BUDGET = 10**8
_CHUNK = 1 << 15


@dataclass(frozen=True)
class ProportionConstraint:
    """Target colour law ``d[s]`` per species and half-width ``epsilon``.

    ``epsilon == 0`` means exact counts, rounded with ``feasible_counts``.
    """

    d: np.ndarray
    epsilon: float = 0.0

    def __post_init__(self):
        d = np.atleast_2d(np.asarray(self.d, dtype=float))
        if np.any(d < -1e-12) or not np.allclose(d.sum(axis=1), 1.0, atol=1e-9):
            raise ValueError("each d^s must be a probability vector")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        object.__setattr__(self, "d", np.clip(d, 0.0, None))

    @property
    def kappa(self) -> int:
        return self.d.shape[1]

    def digest(self) -> str:
        blob = json.dumps({"d": np.round(self.d, 12).tolist(), "eps": self.epsilon}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


def largest_remainder(d, total: int) -> np.ndarray:
    """Integer vector summing to ``total``, closest to ``total * d``."""
    d = np.asarray(d, dtype=float)
    raw = total * d
    base = np.floor(raw + 1e-12).astype(np.int64)
    short = total - int(base.sum())
    if short > 0:
        frac = raw - base
        frac[d <= 0] = -np.inf  # zero proportions stay zero
        # ties to the lowest colour
        order = np.lexsort((np.arange(len(d)), -frac))
        base[order[:short]] += 1
    return base


def feasible_counts(d, species) -> np.ndarray:
    """Counts ``(S, kappa)`` realising proportions ``d`` in each species."""
    d = np.atleast_2d(np.asarray(d, dtype=float))
    counts = species.counts if hasattr(species, "counts") else np.atleast_1d(species)
    if len(counts) != d.shape[0]:
        raise LengthMismatch("one proportion vector per species is required")
    return np.stack([largest_remainder(d[s], int(counts[s])) for s in range(len(counts))])


def count_bounds(constraint: ProportionConstraint, species_counts):
    """Inclusive integer bounds ``lo, hi`` of shape ``(S, kappa)`` on colour counts."""
    Ns = np.asarray(species_counts)[:, None].astype(float)
    if constraint.epsilon == 0:
        c = feasible_counts(constraint.d, np.asarray(species_counts))
        return c, c
    lo = np.ceil(Ns * (constraint.d - constraint.epsilon) - 1e-9)
    hi = np.floor(Ns * (constraint.d + constraint.epsilon) + 1e-9)
    lo = np.clip(lo, 0, Ns).astype(np.int64)
    hi = np.clip(hi, 0, Ns).astype(np.int64)
    return lo, hi


def initial_counts(constraint: ProportionConstraint, species_counts) -> np.ndarray:
    """One feasible count matrix, or ``EmptyConstraintSet``."""
    lo, hi = count_bounds(constraint, species_counts)
    if constraint.epsilon == 0:
        return lo
    out = []
    for s, Ns in enumerate(species_counts):
        if lo[s].sum() > Ns or hi[s].sum() < Ns:
            raise EmptyConstraintSet(f"no colouring of species {s} meets the proportions")
        c = np.clip(largest_remainder(constraint.d[s], int(Ns)), lo[s], hi[s])
        # repair the total while staying inside the bounds
        while c.sum() < Ns:
            k = np.argmax((hi[s] - c) > 0)
            c[k] += 1
        while c.sum() > Ns:
            k = np.argmax((c - lo[s]) > 0)
            c[k] -= 1
        out.append(c)
    return np.stack(out)


def colour_counts(states: np.ndarray, assignment: np.ndarray, kappa: int, n_species: int) -> np.ndarray:
    """``(B, S, kappa)`` colour counts per species for a batch of states."""
    onehot = states[:, :, None] == np.arange(kappa)[None, None, :]
    out = np.zeros((states.shape[0], n_species, kappa), dtype=np.int64)
    for s in range(n_species):
        out[:, s, :] = onehot[:, assignment == s, :].sum(axis=1)
    return out


def satisfies(states, species, constraint: ProportionConstraint) -> np.ndarray:
    """Boolean mask of states lying in the constrained space."""
    states = np.atleast_2d(states)
    lo, hi = count_bounds(constraint, species.counts)
    cc = colour_counts(states, species.assignment, constraint.kappa, species.n_species)
    return np.all((cc >= lo[None]) & (cc <= hi[None]), axis=(1, 2))


def iter_states(N: int, kappa: int, fix_first: bool = False, budget: int = ENUM_BUDGET,
                chunk: int = _CHUNK):
    """Yield chunks of ``[kappa]^N`` in lexicographic order (vertex 0 most
    significant).  With ``fix_first`` only states with ``sigma_0 = 0``."""
    if kappa**N > budget:
        raise BudgetExceeded(f"{kappa}^{N} states exceed the enumeration budget {budget}")
    free = N - 1 if fix_first else N
    total = kappa**free
    powers = kappa ** np.arange(free - 1, -1, -1, dtype=np.int64)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        digits = (idx[:, None] // powers[None, :]) % kappa
        if fix_first:
            digits = np.hstack([np.zeros((len(idx), 1), dtype=np.int64), digits])
        yield digits.astype(np.int8)


def check_length(sigma, n):
    if len(sigma) != n:
        raise LengthMismatch(f"assignment has length {len(sigma)}, expected {n}")
