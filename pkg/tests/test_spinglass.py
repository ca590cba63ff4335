import math

import numpy as np
import pytest
from scipy.special import gammaln

from pottscut.constraints import ProportionConstraint, feasible_counts, largest_remainder
from pottscut.graph import SpeciesStructure
from pottscut.kernel import constant_kernel
from pottscut.spinglass import (enumerate_summary, estimate_free_energy, free_energy_enum, ground_state_enum,
                                hamiltonian, overlap, overlap_covariance, sample_disorder, sample_surrogate,
                                surrogate_value)


class TestDisorder:
    def test_zero_variance(self):
        sp = SpeciesStructure.single(6, 0.0)
        assert np.all(sample_disorder(sp, 1) == 0)

    def test_unit_variance(self):
        g = sample_disorder(SpeciesStructure.single(100, 1.0), 2).ravel()
        # chi-square: the variance of the sample variance is 2/n
        assert abs(g.var() - 1.0) <= 3 * math.sqrt(2 / len(g))

    def test_cross_species_variance(self):
        sp = SpeciesStructure(np.repeat([0, 1], [60, 60]), [[1, 4], [4, 9]])
        g = sample_disorder(sp, 3)
        cross = g[:60, 60:].ravel()
        assert abs(cross.var() - 4.0) <= 3 * 4.0 * math.sqrt(2 / len(cross))
        assert abs(g[60:, 60:].var() - 9.0) <= 3 * 9.0 * math.sqrt(2 / 3600)


class TestHamiltonian:
    def test_zero(self):
        assert hamiltonian(np.zeros((3, 3)), [0, 1, 2]) == 0.0

    def test_single_site(self):
        assert hamiltonian([[1.7]], [2]) == pytest.approx(1.7)

    def test_two_sites(self):
        g = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert hamiltonian(g, [0, 1]) == pytest.approx(5 / math.sqrt(2))


class TestOverlap:
    def test_identical_constant(self):
        sp = SpeciesStructure([0, 0, 1, 1])
        R = overlap([0] * 4, [0] * 4, sp, 2)
        np.testing.assert_allclose(R, [[[1, 0], [0, 0]]] * 2)

    def test_constant_pair(self):
        R = overlap([0] * 3, [1] * 3, SpeciesStructure.single(3), 2)
        np.testing.assert_allclose(R[0], [[0, 1], [0, 0]])

    def test_hand_count(self):
        R = overlap([0, 0, 1, 1], [0, 1, 0, 1], SpeciesStructure.single(4), 2)
        np.testing.assert_allclose(R[0], np.full((2, 2), 0.25))

    def test_self_overlap_diagonal(self):
        R = overlap([0, 2, 2, 1, 2], [0, 2, 2, 1, 2], SpeciesStructure.single(5), 3)
        np.testing.assert_allclose(R[0], np.diag([0.2, 0.2, 0.6]))

    def test_covariance_identity(self):
        sp = SpeciesStructure(np.repeat([0, 1], [3, 4]), [[1.0, 0.5], [0.5, 2.0]])
        rng = np.random.default_rng(0)
        a, b = rng.integers(0, 2, 7), rng.integers(0, 2, 7)
        prods = np.array([hamiltonian(g, a) * hamiltonian(g, b) for g in (sample_disorder(sp, s) for s in range(10000))])
        se = prods.std(ddof=1) / 100
        assert abs(prods.mean() - overlap_covariance(a, b, sp, 2)) <= 4 * se


class TestFeasibleCounts:
    def test_even(self):
        assert feasible_counts([[0.5, 0.5]], [4]).tolist() == [[2, 2]]

    def test_largest_remainder(self):
        assert feasible_counts([[1 / 3, 1 / 3, 1 / 3]], [4]).tolist() == [[2, 1, 1]]

    def test_zero_proportion(self):
        assert largest_remainder([1.0, 0.0], 7).tolist() == [7, 0]


def log_multinomial(counts):
    counts = np.asarray(counts)
    return gammaln(counts.sum() + 1) - gammaln(counts + 1).sum()


class TestEnumeration:
    def test_beta_zero_unconstrained(self):
        g = sample_disorder(SpeciesStructure.single(6), 0)
        assert free_energy_enum(g, 0.0, 3) == pytest.approx(math.log(3))

    def test_beta_zero_constrained(self):
        sp = SpeciesStructure(np.repeat([0, 1], [4, 5]))
        con = ProportionConstraint([[0.5, 0.25, 0.25], [0.2, 0.4, 0.4]])
        g = sample_disorder(sp, 1)
        counts = feasible_counts(con.d, sp)
        exact = sum(log_multinomial(c) for c in counts) / 9
        assert free_energy_enum(g, 0.0, 3, con, sp) == pytest.approx(exact, rel=1e-12)

    def test_single_site(self):
        g = np.array([[0.8]])
        assert free_energy_enum(g, 1.5, 3) == pytest.approx(math.log(3) + 1.5 * 0.8)

    def test_ground_state_examples(self):
        assert ground_state_enum(np.zeros((3, 3)), 2)[0] == 0.0
        g = np.ones((2, 2))
        val, sigma = ground_state_enum(g, 2)
        assert val == pytest.approx(2 * math.sqrt(2)) and sigma.tolist() == [0, 0]
        val, sigma = ground_state_enum(g, 2, ProportionConstraint([[0.5, 0.5]]))
        assert val == pytest.approx(math.sqrt(2)) and sigma.tolist() == [0, 1]

    def test_constraint_lowers_values(self):
        sp = SpeciesStructure.single(8)
        g = sample_disorder(sp, 4)
        con0 = ProportionConstraint([[0.5, 0.5]], 0.0)
        con1 = ProportionConstraint([[0.5, 0.5]], 0.25)
        F0, gs0 = enumerate_summary(g, 2, [0.5, 2.0], con0, sp)
        F1, gs1 = enumerate_summary(g, 2, [0.5, 2.0], con1, sp)
        F, gs = enumerate_summary(g, 2, [0.5, 2.0])
        assert np.all(F0 <= F1 + 1e-12) and np.all(F1 <= F + 1e-12)
        assert gs0[0] <= gs1[0] <= gs[0]

    def test_sandwich(self):
        sp = SpeciesStructure.single(7)
        betas = np.array([0.5, 2.0, 8.0])
        for s in range(5):
            F, (best, _) = enumerate_summary(sample_disorder(sp, s), 3, betas)
            gap = F / betas - best / 7
            assert np.all(gap >= -1e-12) and np.all(gap <= math.log(3) / betas + 1e-12)

    def test_replica_estimate(self):
        est = estimate_free_energy(SpeciesStructure.single(5), 2, 0.0, replicas=5)
        assert est.mean == pytest.approx(math.log(2)) and est.replicas == 5


class TestSurrogate:
    def test_zero_c(self):
        assert surrogate_value(constant_kernel(1.0), 10, 0.0, 2, seed=0)[0] == 0.0

    def test_no_disorder_balanced(self):
        N, c = 10, 3.0
        inst = sample_surrogate(constant_kernel(1.0), N, c, 0)
        zero = type(inst)(np.zeros_like(inst.J), inst.Kt, c)
        val, sigma = surrogate_value(constant_kernel(1.0), N, c, 2, 0, solver="exhaustive", instance=zero)
        assert val == pytest.approx(c / 4)
        assert np.bincount(sigma).tolist() == [5, 5]

    def test_symmetric_variance(self):
        inst = sample_surrogate(constant_kernel(2.0), 200, 4.0, 1)
        assert np.allclose(inst.J, inst.J.T)
        off = inst.J[np.triu_indices(200, 1)]
        assert abs(off.var() - 2.0) <= 3 * 2.0 * math.sqrt(2 / len(off))
        disp = sample_surrogate(constant_kernel(2.0), 200, 4.0, 1, normalization="display")
        assert disp.J[np.triu_indices(200, 1)].var() == pytest.approx(off.var() / 200)

    def test_exhaustive_vs_localsearch(self):
        K = constant_kernel(1.0)
        for s in range(10):
            a = surrogate_value(K, 10, 4.0, 2, s, solver="exhaustive")[0]
            b = surrogate_value(K, 10, 4.0, 2, s, solver="localsearch", restarts=50)[0]
            assert a == pytest.approx(b)
