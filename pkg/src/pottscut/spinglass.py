"""Inhomogeneous Potts spin glass at desk scale.

``H(sigma) = N^{-1/2} sum_{i,j} g_ij 1(sigma_i = sigma_j)`` with the sum over
all ordered pairs, diagonal included, and ``Var g_ij = delta2[s(i), s(j)]``.
For two colours this is ``2^{-1/2}`` times the usual SK Hamiltonian with
unit couplings on unordered pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .constraints import ProportionConstraint, check_length, feasible_counts, iter_states, satisfies
from .cut import maxcut_exhaustive, maxcut_localsearch
from .errors import EmptyConstraintSet, LengthMismatch
from .graph import SpeciesStructure
from .kernel import Kernel, cell_averages
from .stats import Estimate, child_seeds

__all__ = ["sample_disorder", "hamiltonian", "overlap", "overlap_covariance", "feasible_counts",
           "free_energy_enum", "ground_state_enum", "enumerate_summary", "SurrogateInstance",
           "sample_surrogate", "surrogate_value", "estimate_free_energy"]


def sample_disorder(species: SpeciesStructure, seed: int) -> np.ndarray:
    """Independent ``N(0, delta2[s(i), s(j)])`` entries over all ordered pairs."""
    rng = np.random.default_rng(seed)
    a = species.assignment
    sd = np.sqrt(np.clip(species.delta2, 0.0, None))[a[:, None], a[None, :]]
    return rng.standard_normal((species.N, species.N)) * sd


def _batch_energies(g, states, kappa):
    N = g.shape[0]
    H = np.zeros(len(states))
    for k in range(kappa):
        Ek = (states == k).astype(float)
        H += np.einsum("bi,bi->b", Ek @ g, Ek)
    return H / np.sqrt(N)


def hamiltonian(g, sigma) -> float:
    g = np.asarray(g, dtype=float)
    sigma = np.asarray(sigma)
    check_length(sigma, g.shape[0])
    same = sigma[:, None] == sigma[None, :]
    return float(np.sum(g * same) / np.sqrt(g.shape[0]))


def overlap(sigma1, sigma2, species: SpeciesStructure, kappa: int) -> np.ndarray:
    """Species overlap matrices, shape ``(S, kappa, kappa)``."""
    s1, s2 = np.asarray(sigma1), np.asarray(sigma2)
    if len(s1) != len(s2):
        raise LengthMismatch("configurations differ in length")
    check_length(s1, species.N)
    R = np.zeros((species.n_species, kappa, kappa))
    np.add.at(R, (species.assignment, s1, s2), 1.0)
    return R / species.counts[:, None, None]


def overlap_covariance(sigma1, sigma2, species: SpeciesStructure, kappa: int) -> float:
    """``E H(s1) H(s2) = N sum_{s,t} delta2_st rho_s rho_t (R^s, R^t)``."""
    R = overlap(sigma1, sigma2, species, kappa)
    rho = species.rho
    gram = np.einsum("sab,tab->st", R, R)
    return float(species.N * np.sum(species.delta2 * np.outer(rho, rho) * gram))


def _energy_chunks(g, kappa, constraint, species, budget):
    N = g.shape[0]
    sp = species if species is not None else SpeciesStructure.single(N)
    pinned = constraint is None
    for states in iter_states(N, kappa, fix_first=pinned, budget=budget):
        if constraint is not None:
            states = states[satisfies(states, sp, constraint)]
            if not len(states):
                continue
        yield states, _batch_energies(g, states, kappa)


def enumerate_summary(g, kappa: int, betas, constraint: ProportionConstraint | None = None,
                      species: SpeciesStructure | None = None, budget: int = 10**8):
    """Free energies ``(1/N) log sum exp(beta H)`` for each beta and the ground
    state ``(max H, argmax)`` from a single pass over the state space.

    Without a constraint only states with ``sigma_0 = 0`` are visited; colour
    relabelling makes the full sum exactly ``kappa`` times larger.
    """
    g = np.asarray(g, dtype=float)
    N = g.shape[0]
    betas = np.atleast_1d(np.asarray(betas, dtype=float))
    acc = np.full(len(betas), -np.inf)
    best, best_state, seen = -np.inf, None, False
    for states, H in _energy_chunks(g, kappa, constraint, species, budget):
        seen = True
        acc = np.logaddexp(acc, logsumexp(betas[:, None] * H[None, :], axis=1))
        k = int(np.argmax(H))
        if H[k] > best:
            best, best_state = float(H[k]), states[k].astype(np.int64)
    if not seen:
        raise EmptyConstraintSet("constrained configuration space is empty")
    if constraint is None:
        acc = acc + np.log(kappa)
    return acc / N, (best, best_state)


def free_energy_enum(g, beta: float, kappa: int, constraint: ProportionConstraint | None = None,
                     species: SpeciesStructure | None = None, budget: int = 10**8) -> float:
    """``(1/N) log sum_{sigma in A} exp(beta H(sigma))`` for one disorder sample."""
    F, _ = enumerate_summary(g, kappa, [beta], constraint, species, budget)
    return float(F[0])


def ground_state_enum(g, kappa: int, constraint: ProportionConstraint | None = None,
                      species: SpeciesStructure | None = None, budget: int = 10**8):
    """Exact ``(max H, argmax)``; the first maximiser in lexicographic order."""
    _, gs = enumerate_summary(g, kappa, [0.0], constraint, species, budget)
    return gs


def estimate_free_energy(species: SpeciesStructure, kappa: int, beta: float,
                         constraint: ProportionConstraint | None = None, replicas: int = 200,
                         seed: int = 0) -> Estimate:
    """Disorder average of ``free_energy_enum`` over seeded replicas."""
    vals = [free_energy_enum(sample_disorder(species, s), beta, kappa, constraint, species)
            for s in child_seeds(seed, replicas)]
    return Estimate.from_samples(vals)


@dataclass(frozen=True)
class SurrogateInstance:
    """Gaussian surrogate of the graph: symmetric ``J`` plus the mean term."""

    J: np.ndarray
    Kt: np.ndarray
    c: float

    @property
    def N(self) -> int:
        return self.J.shape[0]

    def weights(self) -> np.ndarray:
        """Pair weights ``(c/N) K~ + sqrt(c) J / sqrt(N)`` of the cut objective."""
        N = self.N
        W = self.c / N * self.Kt + np.sqrt(self.c) * self.J / np.sqrt(N)
        np.fill_diagonal(W, 0.0)
        return W


def sample_surrogate(kernel: Kernel, N: int, c: float, seed: int,
                     normalization: str = "matched") -> SurrogateInstance:
    """Symmetric ``J`` with independent entries on ``i <= j``.

    ``normalization="matched"`` uses ``Var J_ij = K~_N(i, j)`` so that
    ``sqrt(c/N) J_ij`` has the variance of a centred edge indicator;
    ``"display"`` uses ``K~_N(i, j) / N`` on top of the explicit ``1/sqrt(N)``.
    """
    Kt = cell_averages(kernel, N)
    var = Kt if normalization == "matched" else Kt / N
    if normalization not in ("matched", "display"):
        raise ValueError(f"unknown normalization {normalization!r}")
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((N, N))
    J = np.triu(Z * np.sqrt(var))
    J = J + np.triu(J, 1).T
    return SurrogateInstance(J, Kt, float(c))


def surrogate_value(kernel: Kernel, N: int, c: float, kappa: int, seed: int,
                    solver: str = "localsearch", restarts: int = 20,
                    normalization: str = "matched", instance: SurrogateInstance | None = None,
                    init=None):
    """``Z~_N = (1/2N) max_sigma sum_{i,j} W_ij 1(sigma_i != sigma_j)``.

    With ``solver="localsearch"`` the result is a lower bound on the maximum.
    Returns ``(value, assignment)``.
    """
    if c == 0:
        return 0.0, np.zeros(N, dtype=np.int64)
    inst = instance if instance is not None else sample_surrogate(kernel, N, c, seed, normalization)
    W = inst.weights()
    if solver == "exhaustive":
        best, sigma = maxcut_exhaustive(W, kappa)
    elif solver == "localsearch":
        best, sigma = maxcut_localsearch(W, kappa, restarts=restarts, seed=seed, init=init)
    else:
        raise ValueError(f"unknown solver {solver!r}")
    # sum over ordered pairs is twice the i<j cut weight
    return float(best) / N, sigma
