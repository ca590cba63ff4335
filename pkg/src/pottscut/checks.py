"""Named verification suites.

Each suite returns a list of ``CheckResult``; the command line prints them
and the acceptance tests assert on them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .constraints import ProportionConstraint
from .cut import maxcut_exhaustive, maxcut_localsearch
from .errors import SuiteUnknown
from .experiments import coupled_difference, maxcut_estimate, surrogate_estimate
from .graph import Graph, SpeciesStructure
from .kernel import DubinsKernel, coarsen, constant_kernel, l1_distance
from .parisi import (ModelSpec, MinimizeOptions, ParisiParams, Scheme, functional, increment_covariances,
                     minimize, predict_maxcut, recursion_x0, replica_symmetric)
from .parisi.optimize import _Encoder
from .rpc import CascadeSpec, cascade_log_sum, y_covariances, y_term_closed_form, z_term_mc
from .spinglass import enumerate_summary, hamiltonian, overlap, overlap_covariance, sample_disorder
from .stats import Estimate, child_seeds


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        extra = f"  {self.detail}" if self.detail else ""
        return f"{tag} {self.name}: measured={self.measured:.6g} tol={self.tolerance:.6g}{extra}"


def _entropy(d):
    d = np.asarray(d, dtype=float)
    return float(-np.sum(np.where(d > 0, d * np.log(np.where(d > 0, d, 1.0)), 0.0)))


# --- closed forms -----------------------------------------------------------

def closed_forms(seed: int = 0) -> list[CheckResult]:
    out = []
    model = ModelSpec(3, [0.4, 0.6], [[1.0, 0.3], [0.3, 0.8]], beta=0.0)
    d = np.array([[0.5, 0.3, 0.2], [0.1, 0.1, 0.8]])
    res = minimize(model, d, 1)
    target = float(model.rho @ [_entropy(row) for row in d])
    err = abs(res.value - target)
    out.append(CheckResult("beta=0 infimum equals entropy", err <= 1e-6, err, 1e-6))

    for kappa, beta in [(2, 0.5), (3, 1.0), (4, 0.7)]:
        m = ModelSpec.single(kappa, 1.0, beta)
        p = replica_symmetric(np.full((1, kappa), 1.0 / kappa))
        val = functional(p, m).value
        err = abs(val - (math.log(kappa) + beta ** 2 / (2 * kappa)))
        out.append(CheckResult(f"annealed value kappa={kappa} beta={beta}", err <= 1e-3, err, 1e-3))

    rng = np.random.default_rng(seed)
    for r in (1, 2, 3):
        x = np.sort(rng.uniform(0.05, 0.95, r))
        steps = rng.uniform(0.1, 1.0, r)
        Q = np.concatenate([[0.0], np.cumsum(steps) / steps.sum()]).reshape(1, r + 1, 1, 1)
        lam = rng.normal(size=(1, 1))
        m = ModelSpec.single(1, rng.uniform(0.5, 2.0))
        p = ParisiParams(x, Q, lam)
        var = increment_covariances(p, m)[0, :, 0, 0]
        exact = float(lam[0, 0] + 0.5 * np.sum(x * var))
        err = abs(recursion_x0(p, m, 0) - exact)
        out.append(CheckResult(f"kappa=1 recursion r={r}", err <= 1e-9, err, 1e-9))
    return out


# --- cascade oracle ---------------------------------------------------------

RPC_LAYOUTS = [(1, 2, 1), (1, 3, 1), (1, 2, 2), (1, 3, 2), (2, 2, 1),
               (2, 3, 1), (2, 2, 2), (2, 3, 2), (2, 3, 1), (1, 2, 1)]


def random_instance(rng, r, kappa, S, scale=0.4):
    """Seeded valid ``(params, model)`` with moderate field variances."""
    rho = rng.dirichlet(np.full(S, 3.0))
    A = rng.uniform(0.0, 1.0, size=(S, S))  # entrywise nonnegative variances
    delta2 = scale * (A @ A.T / S + 0.5 * np.eye(S))
    d = rng.dirichlet(np.full(kappa, 3.0), size=S)
    enc = _Encoder(d, r)
    theta = rng.normal(size=enc.dim)
    x = np.sort(rng.uniform(0.1, 0.6, r))
    while np.any(np.diff(x) < 0.05):
        x = np.sort(rng.uniform(0.1, 0.6, r))
    theta[:r] = x
    p = enc.decode(theta)
    model = ModelSpec(kappa, rho, delta2)
    return ParisiParams(x, p.Q, rng.normal(scale=0.5, size=(S, kappa))), model


def rpc_oracle(seed: int = 0, samples: int = 2000) -> list[CheckResult]:
    out = []
    for i, (r, kappa, S) in enumerate(RPC_LAYOUTS):
        rng = np.random.default_rng([seed, i])
        p, m = random_instance(rng, r, kappa, S)
        exact = float(m.rho @ [recursion_x0(p, m, s, Scheme(nodes=40)) for s in range(S)])
        T = 256 if r == 1 else 48
        est = z_term_mc(p, m, samples, seed=seed * 1000 + i, truncation=T)
        z = abs(est.mean - exact) / est.stderr
        out.append(CheckResult(f"recursion vs cascade #{i} (r={r}, kappa={kappa}, S={S})", z <= 3.0, z, 3.0,
                               f"recursion={exact:.5f} cascade={est.mean:.5f}+-{est.stderr:.5f}"))
    rng = np.random.default_rng([seed, 99])
    p, m = random_instance(rng, 2, 3, 2)
    spec = CascadeSpec(tuple(p.x), 48)
    closed = y_term_closed_form(spec, p.Q, m.rho, m.delta2_eff)
    est = cascade_log_sum(spec, lambda z: z[:, 0], samples, seed, list(y_covariances(p.Q, m.rho, m.delta2_eff)))
    z = abs(est.mean - closed) / est.stderr
    out.append(CheckResult("y-term closed form vs cascade", z <= 3.0, z, 3.0,
                           f"closed={closed:.5f} cascade={est.mean:.5f}+-{est.stderr:.5f}"))
    return out


# --- enumeration ------------------------------------------------------------

def _guerra_runs(seed, N=14, replicas=200, betas=(0.5, 1.0)):
    species = SpeciesStructure.single(N, 1.0)
    con = ProportionConstraint([[0.5, 0.5]], 0.0)
    F, gs = [], []
    for s in child_seeds(seed, replicas):
        f, (best, _) = enumerate_summary(sample_disorder(species, s), 2, betas, con, species)
        F.append(f)
        gs.append(best / N)
    return np.asarray(F), np.asarray(gs)


def guerra(seed: int = 0, N: int = 14, replicas: int = 200) -> list[CheckResult]:
    betas = (0.5, 1.0)
    F, _ = _guerra_runs(seed, N, replicas, betas)
    out = []
    for k, beta in enumerate(betas):
        est = Estimate.from_samples(F[:, k])
        bound = minimize(ModelSpec.single(2, 1.0, beta), [[0.5, 0.5]], 2).value
        slack = 3 * (est.stderr + 2 / math.sqrt(N))
        gap = est.mean - bound
        out.append(CheckResult(f"enumeration <= Parisi bound, beta={beta}", gap <= slack, gap, slack,
                               f"F_N={est.mean:.5f}+-{est.stderr:.5f} bound={bound:.5f}"))
    return out


def sandwich(seed: int = 0) -> list[CheckResult]:
    """``0 <= F/beta - GS/N <= log(kappa)/beta`` on every enumerated instance."""
    worst_lo, worst_hi, count = np.inf, np.inf, 0
    cases = [(2, 12, [[0.5, 0.5]]), (3, 8, None), (2, 10, None), (3, 9, [[0.4, 0.3, 0.3]])]
    betas = np.array([0.3, 1.0, 3.0])
    for kappa, N, d in cases:
        species = SpeciesStructure.single(N, 1.0)
        con = None if d is None else ProportionConstraint(d, 0.0)
        for s in child_seeds(seed + kappa * 100 + N, 25):
            F, (best, _) = enumerate_summary(sample_disorder(species, s), kappa, betas, con, species)
            gap = F / betas - best / N
            worst_lo = min(worst_lo, float(gap.min()))
            worst_hi = min(worst_hi, float(np.min(np.log(kappa) / betas - gap)))
            count += len(betas)
    tol = 1e-12
    return [CheckResult(f"lower side over {count} instances", worst_lo >= -tol, worst_lo, -tol),
            CheckResult(f"upper side over {count} instances", worst_hi >= -tol, worst_hi, -tol)]


# --- cuts -------------------------------------------------------------------

def fixture_graphs():
    return [("K4", Graph.complete(4), 3, 5), ("C5", Graph.cycle(5), 2, 4), ("K9", Graph.complete(9), 3, 27),
            ("triangle", Graph.complete(3), 2, 2)]


def cut_oracle(seed: int = 0, graphs: int = 50, restarts: int = 50) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    mismatches = []
    for g in range(graphs):
        kappa = 2 + g % 2
        n = int(rng.integers(5, 15 if kappa == 2 else 13))
        p = rng.uniform(0.2, 0.7)
        iu = np.triu_indices(n, 1)
        keep = rng.random(len(iu[0])) < p
        G = Graph(n, np.column_stack([iu[0][keep], iu[1][keep]]))
        ex, _ = maxcut_exhaustive(G, kappa)
        ls, _ = maxcut_localsearch(G, kappa, restarts=restarts, seed=g)
        if ex != ls:
            mismatches.append(f"#{g}(n={n},kappa={kappa}): {ls} vs {ex}")
    out = [CheckResult(f"local search equals exhaustive on {graphs} graphs", not mismatches,
                       len(mismatches), 0, "; ".join(mismatches))]
    for name, G, kappa, known in fixture_graphs():
        ex, _ = maxcut_exhaustive(G, kappa)
        ls, _ = maxcut_localsearch(G, kappa, restarts=restarts, seed=0)
        ok = ex == ls == known
        out.append(CheckResult(f"{name} kappa={kappa}", ok, ls, known, f"exhaustive={ex}"))
    return out


def coupling(seed: int = 0, N: int = 500, c: float = 2.0, replicas: int = 50,
             Ms=(2, 4, 8)) -> list[CheckResult]:
    D = DubinsKernel()
    out, abs_diffs, disagree = [], [], []
    for M in Ms:
        Km = coarsen(D, M)
        res = coupled_difference(D, Km, N, c, 2, replicas, seed)
        bound = 0.5 * c * l1_distance(D, Km) + 3 * res.stderr
        out.append(CheckResult(f"|E MaxCut/N difference| vs (c/2) l1, M={M}", abs(res.mean) <= bound,
                               abs(res.mean), bound,
                               f"mean |paired diff|={res.mean_abs:.5f} disagreements/N={res.disagreements:.4f}"))
        abs_diffs.append(res.mean_abs)
        disagree.append(res.disagreements)
    shrink = bool(np.all(np.diff(abs_diffs) <= 0)) and bool(np.all(np.diff(disagree) <= 0))
    out.append(CheckResult("paired differences shrink with M", shrink, abs_diffs[-1], abs_diffs[0],
                           f"mean |diff|={np.round(abs_diffs, 5).tolist()} disagreements={np.round(disagree, 4).tolist()}"))
    return out


def maxcut_prediction(seed: int = 0, N: int = 1000, cs=(8, 16, 32), replicas: int = 10,
             beta_grid=(2.0, 4.0, 8.0, 16.0), r: int = 2, step: float = 0.05) -> list[CheckResult]:
    K = constant_kernel(1.0)
    corr = []
    for c in cs:
        est = maxcut_estimate(K, N, c, 2, replicas, seed)
        corr.append((est.mean - c / 4) / math.sqrt(c))
    corr = np.array(corr)
    cache = {}
    preds = [predict_maxcut(K, c, 2, step=step, r=r, beta_grid=beta_grid, cache=cache) for c in cs]
    half = np.array([0.5 * p.ground_state for p in preds])
    spread = float(np.max(np.abs(corr / corr.mean() - 1.0)))
    rel = np.abs(corr / half - 1.0)
    out = [CheckResult("rescaled correction positive", bool(np.all(corr > 0)), float(corr.min()), 0.0,
                       f"corrections={np.round(corr, 4).tolist()}"),
           CheckResult("stable across c", spread <= 0.2, spread, 0.2)]
    for c, v, h, e in zip(cs, corr, half, rel):
        out.append(CheckResult(f"c={c} correction vs P(d*)/2", e <= 0.25, float(e), 0.25,
                               f"graph={v:.4f} prediction={h:.4f}"))
    return out


def surrogate(seed: int = 0, N: int = 600, cs=(8, 16, 32), replicas: int = 30) -> list[CheckResult]:
    K = constant_kernel(1.0)
    gaps, detail = [], []
    for c in cs:
        g = maxcut_estimate(K, N, c, 2, replicas, seed)
        z = surrogate_estimate(K, N, c, 2, replicas, seed + 1)
        gaps.append(abs(g.mean - z.mean) / math.sqrt(c))
        detail.append(f"c={c}: {g.mean:.4f} vs {z.mean:.4f}")
    ok = bool(np.all(np.diff(gaps) < 0))
    return [CheckResult("|E MaxCut/N - E Z~|/sqrt(c) decreases in c", ok, gaps[-1], gaps[0],
                        f"gaps={np.round(gaps, 5).tolist()} " + "; ".join(detail))]


# --- invariants -------------------------------------------------------------

def permute_colours(p: ParisiParams, perm) -> ParisiParams:
    perm = list(perm)
    return ParisiParams(p.x, p.Q[:, :, perm][:, :, :, perm], p.lam[:, perm])


def permute_species(p: ParisiParams, m: ModelSpec, perm):
    perm = list(perm)
    q = ParisiParams(p.x, p.Q[perm], p.lam[perm])
    return q, ModelSpec(m.kappa, m.rho[perm], m.delta2[np.ix_(perm, perm)], m.beta)


def merge_level(p: ParisiParams, level: int, x_new: float) -> ParisiParams:
    """Insert a duplicate of ``Q_level`` with a new ``x`` in between."""
    x = np.insert(p.x, level, x_new)
    Q = np.insert(p.Q, level, p.Q[:, level], axis=1)
    return ParisiParams(x, Q, p.lam)


def invariants(seed: int = 0) -> list[CheckResult]:
    out = []
    rng = np.random.default_rng(seed)
    assignment = np.repeat([0, 1], [5, 7])
    sp = SpeciesStructure(assignment, [[1.0, 0.4], [0.4, 0.7]])
    worst = 0.0
    for _ in range(20):
        a, b = rng.integers(0, 3, 12), rng.integers(0, 3, 12)
        R = overlap(a, b, sp, 3)
        worst = max(worst, float(np.abs(R.sum(axis=(1, 2)) - 1).max()))
    out.append(CheckResult("overlap matrices sum to one", worst <= 1e-12, worst, 1e-12))

    a, b = rng.integers(0, 3, 12), rng.integers(0, 3, 12)
    prods = [hamiltonian(g, a) * hamiltonian(g, b) for g in (sample_disorder(sp, s) for s in child_seeds(seed, 4000))]
    est = Estimate.from_samples(prods)
    target = overlap_covariance(a, b, sp, 3)
    z = abs(est.mean - target) / est.stderr
    out.append(CheckResult("covariance identity", z <= 4.0, z, 4.0, f"mc={est.mean:.4f} identity={target:.4f}"))

    p, m = random_instance(np.random.default_rng([seed, 7]), 2, 3, 2, scale=1.0)
    base = functional(p, m).value
    err = max(abs(functional(permute_colours(p, perm), m).value - base) for perm in [(1, 0, 2), (2, 0, 1)])
    out.append(CheckResult("colour relabelling", err <= 1e-9, err, 1e-9))
    q, m2 = permute_species(p, m, [1, 0])
    err = abs(functional(q, m2).value - base)
    out.append(CheckResult("species relabelling", err <= 1e-9, err, 1e-9))
    err = max(abs(functional(merge_level(p, lvl, xn), m).value - base)
              for lvl, xn in [(1, 0.5 * (p.x[0] + p.x[1])), (0, 0.5 * p.x[0])])
    out.append(CheckResult("duplicate level leaves the value unchanged", err <= 1e-9, err, 1e-9))

    m3 = ModelSpec.single(3, 1.0, beta=1.5)
    d = [[0.5, 0.3, 0.2]]
    opts = MinimizeOptions(restarts=2, search_nodes=10)
    r1 = minimize(m3, d, 1, opts)
    v1 = r1.value
    v2 = minimize(m3, d, 2, opts, init=r1.params).value
    tol = 1e-6
    out.append(CheckResult("minimize does not increase with r", v2 <= v1 + tol, v2 - v1, tol,
                           f"r=1: {v1:.6f} r=2: {v2:.6f}"))
    return out


SUITES = {
    "closed-forms": closed_forms,
    "rpc-oracle": rpc_oracle,
    "guerra": guerra,
    "sandwich": sandwich,
    "cut-oracle": cut_oracle,
    "coupling": coupling,
    "maxcut-prediction": maxcut_prediction,
    "surrogate": surrogate,
    "invariants": invariants,
}


def run_suite(name: str, seed: int = 0) -> list[CheckResult]:
    try:
        fn = SUITES[name]
    except KeyError:
        raise SuiteUnknown(f"unknown suite {name!r}; choose from {sorted(SUITES)}") from None
    return fn(seed=seed)
