import numpy as np
import pytest

from pottscut.constraints import ProportionConstraint, feasible_counts
from pottscut.cut import cut_value, empirical_proportions, maxcut_exhaustive, maxcut_localsearch
from pottscut.errors import EmptyConstraintSet, LengthMismatch
from pottscut.graph import Graph, SpeciesStructure

TRIANGLE = Graph.complete(3)


def er_graph(n, p, seed):
    rng = np.random.default_rng(seed)
    i, j = np.triu_indices(n, 1)
    keep = rng.random(len(i)) < p
    return Graph(n, np.column_stack([i[keep], j[keep]]))


class TestCutValue:
    def test_triangle(self):
        assert cut_value(TRIANGLE, [0, 0, 1]) == 2
        assert cut_value(TRIANGLE, [0, 1, 2]) == 3

    def test_empty_graph(self):
        assert cut_value(Graph(5, []), [0, 1, 0, 1, 2]) == 0

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            cut_value(TRIANGLE, [0, 1])

    def test_weights_match_graph(self):
        G = er_graph(9, 0.5, 1)
        sigma = np.random.default_rng(0).integers(0, 3, 9)
        assert cut_value(G.adjacency(), sigma) == pytest.approx(cut_value(G, sigma))


class TestExhaustive:
    @pytest.mark.parametrize("G,kappa,value", [(TRIANGLE, 2, 2), (Graph.complete(4), 3, 5), (Graph.cycle(5), 2, 4)])
    def test_fixtures(self, G, kappa, value):
        v, sigma = maxcut_exhaustive(G, kappa)
        assert v == value and cut_value(G, sigma) == value
        assert sigma[0] == 0

    def test_monotone_in_kappa(self):
        G = er_graph(9, 0.6, 4)
        assert maxcut_exhaustive(G, 3)[0] >= maxcut_exhaustive(G, 2)[0]

    def test_constrained(self):
        G = Graph.complete(4)
        con = ProportionConstraint([[0.75, 0.25]])
        v, sigma = maxcut_exhaustive(G, 2, con)
        assert v == 3 and np.bincount(sigma, minlength=2).tolist() == [3, 1]

    def test_empty_constraint_set(self):
        con = ProportionConstraint([[0.5, 0.5]], 0.05)
        with pytest.raises(EmptyConstraintSet):
            maxcut_exhaustive(TRIANGLE, 2, con)


class TestLocalSearch:
    def test_triangle(self):
        assert maxcut_localsearch(TRIANGLE, 2)[0] == 2

    def test_k9(self):
        assert maxcut_localsearch(Graph.complete(9), 3, restarts=20)[0] == 27

    def test_matches_exhaustive(self):
        for g in range(12):
            G = er_graph(12, 0.5, 100 + g)
            kappa = 2 + g % 2
            assert maxcut_localsearch(G, kappa, restarts=50, seed=g)[0] == maxcut_exhaustive(G, kappa)[0]

    def test_monotone_in_restarts(self):
        G = er_graph(40, 0.2, 8)
        vals = [maxcut_localsearch(G, 3, restarts=r, seed=5)[0] for r in (1, 3, 10)]
        assert vals == sorted(vals)

    def test_constrained_keeps_counts(self):
        sp = SpeciesStructure(np.repeat([0, 1], [6, 6]))
        con = ProportionConstraint([[0.5, 0.5], [1 / 3, 2 / 3]])
        G = er_graph(12, 0.5, 3)
        v, sigma = maxcut_localsearch(G, 2, restarts=5, constraint=con, species=sp)
        got = np.stack([np.bincount(sigma[sp.members(s)], minlength=2) for s in range(2)])
        np.testing.assert_array_equal(got, feasible_counts(con.d, sp))
        assert v <= maxcut_exhaustive(G, 2, con, sp)[0]

    def test_warm_start_polished(self):
        G = Graph.cycle(6)
        v, sigma = maxcut_localsearch(G, 2, restarts=1, init=[[0, 0, 0, 0, 0, 0]])
        assert v == 6

    def test_weighted(self):
        W = np.array([[0, 5, 1], [5, 0, 1], [1, 1, 0]], dtype=float)
        v, sigma = maxcut_localsearch(W, 2, restarts=5)
        assert v == pytest.approx(6.0) and sigma[0] != sigma[1]


class TestProportions:
    def test_half(self):
        sp = SpeciesStructure.single(4)
        np.testing.assert_allclose(empirical_proportions([0, 0, 1, 1], sp, 2), [[0.5, 0.5]])

    def test_all_one_colour(self):
        sp = SpeciesStructure.single(3)
        np.testing.assert_allclose(empirical_proportions([0, 0, 0], sp, 3), [[1, 0, 0]])

    def test_two_species(self):
        sp = SpeciesStructure([0, 0, 1, 1])
        np.testing.assert_allclose(empirical_proportions([0, 1, 1, 1], sp, 2), [[0.5, 0.5], [0, 1]])
