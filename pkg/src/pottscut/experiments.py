"""Replica pipelines shared by the verification suites and the command line.

Max-cut estimates subtract ``(1 - 1/kappa)`` times the centred edge count (or
total surrogate weight); the correction has mean zero, so the estimator stays
unbiased while most of the replica-to-replica spread cancels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cut import maxcut_localsearch
from .graph import expected_edges, sample_coupled, sample_graph
from .kernel import Kernel
from .spinglass import sample_surrogate, surrogate_value
from .stats import Estimate, child_seeds


def _cv_weight(kappa: int) -> float:
    return 1.0 - 1.0 / kappa


def maxcut_estimate(kernel: Kernel, N: int, c: float, kappa: int, replicas: int, seed: int = 0,
                    restarts: int = 10, control_variate: bool = True) -> Estimate:
    """Replica mean of ``MaxCut_kappa(G) / N`` (local search lower bound)."""
    mean_edges = expected_edges(kernel, N, c)
    vals = []
    for s in child_seeds(seed, replicas):
        G = sample_graph(kernel, N, c, s)
        v, _ = maxcut_localsearch(G, kappa, restarts=restarts, seed=s)
        if control_variate:
            v -= _cv_weight(kappa) * (G.m - mean_edges)
        vals.append(v / N)
    return Estimate.from_samples(vals)


def surrogate_estimate(kernel: Kernel, N: int, c: float, kappa: int, replicas: int, seed: int = 0,
                       restarts: int = 10, normalization: str = "matched",
                       control_variate: bool = True) -> Estimate:
    """Replica mean of the Gaussian surrogate cut ``Z~_N``."""
    mean_edges = expected_edges(kernel, N, c)
    vals = []
    for s in child_seeds(seed, replicas):
        inst = sample_surrogate(kernel, N, c, s, normalization)
        v, _ = surrogate_value(kernel, N, c, kappa, s, restarts=restarts, instance=inst)
        if control_variate:
            total = float(np.triu(inst.weights(), 1).sum())
            v -= _cv_weight(kappa) * (total - mean_edges) / N
        vals.append(v)
    return Estimate.from_samples(vals)


@dataclass(frozen=True)
class CoupledDifference:
    """Paired ``(MaxCut(G_a) - MaxCut(G_b)) / N`` over coupled replicas."""

    mean: float
    stderr: float
    mean_abs: float
    disagreements: float  # mean symmetric-difference edge count over N
    replicas: int


def _pooled_cuts(Ga, Gb, kappa, restarts, seed, rounds=5):
    # each graph's best colouring seeds a polish on the other until neither improves
    va, sa = maxcut_localsearch(Ga, kappa, restarts=restarts, seed=seed)
    vb, sb = maxcut_localsearch(Gb, kappa, restarts=restarts, seed=seed)
    for _ in range(rounds):
        va2, sa2 = maxcut_localsearch(Ga, kappa, restarts=1, seed=seed, init=[sb])
        vb2, sb2 = maxcut_localsearch(Gb, kappa, restarts=1, seed=seed, init=[sa])
        improved = False
        if va2 > va:
            va, sa, improved = va2, sa2, True
        if vb2 > vb:
            vb, sb, improved = vb2, sb2, True
        if not improved:
            break
    return va, vb


def coupled_difference(kernel_a: Kernel, kernel_b: Kernel, N: int, c: float, kappa: int,
                       replicas: int, seed: int = 0, restarts: int = 5) -> CoupledDifference:
    diffs, dis = [], []
    for s in child_seeds(seed, replicas):
        Ga, Gb = sample_coupled(kernel_a, kernel_b, N, c, s)
        ea = set(map(tuple, Ga.edges.tolist()))
        eb = set(map(tuple, Gb.edges.tolist()))
        dis.append(len(ea ^ eb) / N)
        va, vb = _pooled_cuts(Ga, Gb, kappa, restarts, s)
        diffs.append((va - vb) / N)
    d = np.asarray(diffs)
    est = Estimate.from_samples(d)
    return CoupledDifference(est.mean, est.stderr, float(np.abs(d).mean()), float(np.mean(dis)), replicas)
