"""Inhomogeneous random graphs sampled from a kernel.

Pair ``{i, j}`` (``i < j``) is an edge with probability
``min(c * K~_N(i, j) / N, 1)``.  Randomness for a pair comes from a Philox
stream keyed by ``(seed, i)`` at position ``j``, so samples do not depend on
iteration order and two graphs can share the same uniforms (maximal coupling).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import LengthMismatch
from .kernel import BlockSpec, Kernel, cell_averages


@dataclass(frozen=True)
class Graph:
    n: int
    edges: np.ndarray  # (m, 2) int array, 0-based, i < j, lexicographically sorted

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if len(e):
            if np.any(e[:, 0] == e[:, 1]):
                raise ValueError("self-loops are not allowed")
            e = np.sort(e, axis=1)
            e = np.unique(e, axis=0)
            if e.min() < 0 or e.max() >= self.n:
                raise ValueError("edge endpoint out of range")
        object.__setattr__(self, "edges", e)

    @property
    def m(self) -> int:
        return len(self.edges)

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.n, self.n), dtype=np.int8)
        A[self.edges[:, 0], self.edges[:, 1]] = 1
        A[self.edges[:, 1], self.edges[:, 0]] = 1
        return A

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n)

    def neighbors(self):
        """CSR-style neighbour index: ``(indptr, indices)``."""
        both = np.concatenate([self.edges, self.edges[:, ::-1]])
        order = np.lexsort((both[:, 1], both[:, 0]))
        both = both[order]
        indptr = np.concatenate([[0], np.cumsum(np.bincount(both[:, 0], minlength=self.n))])
        return indptr, both[:, 1]

    @classmethod
    def from_edges(cls, n, edges):
        return cls(n, np.asarray(list(edges), dtype=np.int64).reshape(-1, 2))

    @classmethod
    def complete(cls, n):
        i, j = np.triu_indices(n, 1)
        return cls(n, np.column_stack([i, j]))

    @classmethod
    def cycle(cls, n):
        i = np.arange(n)
        return cls(n, np.column_stack([i, (i + 1) % n]))


def write_edgelist(graph: Graph, path) -> None:
    """Header ``N M`` then one 1-based ``i j`` pair per line."""
    lines = [f"{graph.n} {graph.m}"]
    lines += [f"{i + 1} {j + 1}" for i, j in graph.edges]
    Path(path).write_text("\n".join(lines) + "\n")


def read_edgelist(path) -> Graph:
    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    n, m = int(rows[0][0]), int(rows[0][1])
    edges = np.array([[int(a) - 1, int(b) - 1] for a, b in rows[1:]], dtype=np.int64).reshape(-1, 2)
    if len(edges) != m:
        raise ValueError(f"header announces {m} edges, file has {len(edges)}")
    return Graph(n, edges)


@dataclass(frozen=True)
class SpeciesStructure:
    assignment: np.ndarray  # species index per vertex, 0-based
    delta2: np.ndarray = field(default=None)

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=np.int64)
        object.__setattr__(self, "assignment", a)
        S = int(a.max()) + 1 if len(a) else 0
        d2 = np.ones((S, S)) if self.delta2 is None else np.atleast_2d(np.asarray(self.delta2, dtype=float))
        if d2.shape != (S, S):
            raise LengthMismatch(f"delta2 must be {S}x{S}")
        if not np.allclose(d2, d2.T):
            raise ValueError("delta2 must be symmetric")
        object.__setattr__(self, "delta2", d2)

    @property
    def N(self) -> int:
        return len(self.assignment)

    @property
    def n_species(self) -> int:
        return self.delta2.shape[0]

    @property
    def counts(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.n_species)

    @property
    def rho(self) -> np.ndarray:
        return self.counts / self.N

    def members(self, s):
        return np.flatnonzero(self.assignment == s)

    @classmethod
    def single(cls, N, delta2=1.0):
        return cls(np.zeros(N, dtype=np.int64), [[delta2]])


def species_partition(spec: BlockSpec, N: int, delta2=None) -> SpeciesStructure:
    """Vertex ``i`` (1-based) joins block ``s`` iff ``(i-1)/N`` lies in ``[t_{s-1}, t_s)``."""
    t = np.asarray(spec.boundaries if isinstance(spec, BlockSpec) else spec, dtype=float)
    M = len(t) - 1
    if N < M:
        raise ValueError("need at least one vertex per species")
    # number of i with i - 1 < N t_s; guard against round-off in N * t_s
    cuts = np.ceil(N * t[1:-1] - 1e-9).astype(np.int64)
    cuts = np.concatenate([[0], cuts, [N]])
    counts = np.diff(cuts)
    if np.any(counts <= 0):
        raise ValueError(f"empty species for N={N}: counts {counts.tolist()}")
    assignment = np.repeat(np.arange(M), counts)
    return SpeciesStructure(assignment, delta2)


def edge_probabilities(kernel: Kernel, N: int, c: float) -> np.ndarray:
    """Matrix of ``min(c K~_N(i, j) / N, 1)`` (diagonal included, unused)."""
    if c < 0:
        raise ValueError("c must be nonnegative")
    if c == 0:
        return np.zeros((N, N))
    return np.minimum(c * cell_averages(kernel, N) / N, 1.0)


def pair_uniforms(N: int, seed: int) -> np.ndarray:
    """Upper-triangular matrix of uniforms; entry (i, j), i < j, is the j-th
    draw of the Philox stream keyed by ``(seed, i)``."""
    U = np.ones((N, N))
    for i in range(N - 1):
        bg = np.random.Philox(key=np.array([seed, i], dtype=np.uint64))
        U[i, :] = np.random.Generator(bg).random(N)
    U[np.tril_indices(N)] = 1.0
    return U


def _graph_from_probs(P, U):
    N = P.shape[0]
    mask = np.triu(U < P, 1)
    i, j = np.nonzero(mask)
    return Graph(N, np.column_stack([i, j]))


def sample_graph(kernel: Kernel, N: int, c: float, seed: int) -> Graph:
    return _graph_from_probs(edge_probabilities(kernel, N, c), pair_uniforms(N, seed))


def sample_coupled(kernel_a: Kernel, kernel_b: Kernel, N: int, c: float, seed: int):
    """Two graphs sharing one uniform per pair, so that
    ``P[A_ij != B_ij] = |p_A - p_B|``."""
    U = pair_uniforms(N, seed)
    return (_graph_from_probs(edge_probabilities(kernel_a, N, c), U),
            _graph_from_probs(edge_probabilities(kernel_b, N, c), U))


def expected_edges(kernel: Kernel, N: int, c: float) -> float:
    P = edge_probabilities(kernel, N, c)
    return float(np.triu(P, 1).sum())


def expected_degrees(kernel: Kernel, N: int, c: float) -> np.ndarray:
    P = edge_probabilities(kernel, N, c)
    np.fill_diagonal(P, 0.0)
    return P.sum(axis=1)
