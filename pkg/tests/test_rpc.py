import numpy as np
import pytest
from scipy.special import logsumexp

from pottscut.errors import DegenerateCovariance, NonMonotoneQ
from pottscut.parisi import ModelSpec, ParisiParams, Scheme, recursion_x0, replica_symmetric
from pottscut.rpc import (CascadeSpec, cascade_log_sum, sample_cascade, y_covariances,
                          y_term_closed_form, z_term_mc)
from pottscut.stats import child_seeds


class TestCascadeSpec:
    def test_rejects_unsorted(self):
        with pytest.raises(ValueError):
            CascadeSpec((0.6, 0.3))

    def test_rejects_small_truncation(self):
        with pytest.raises(ValueError):
            CascadeSpec((0.5,), truncation=1)

    def test_leaves(self):
        spec = CascadeSpec((0.2, 0.5), truncation=4, tail=1)
        assert spec.r == 2 and spec.leaves == 25


class TestSampleCascade:
    def test_normalised(self):
        w = sample_cascade(CascadeSpec((0.3, 0.7), truncation=16), 1).weights
        assert w.sum() == pytest.approx(1.0, abs=1e-12) and np.all(w >= 0)

    def test_second_moment(self):
        spec = CascadeSpec((0.5,), truncation=256)
        m2 = np.array([np.sum(sample_cascade(spec, s).weights ** 2) for s in child_seeds(3, 4000)])
        assert abs(m2.mean() - 0.5) <= 3 * m2.std(ddof=1) / np.sqrt(len(m2))

    def test_truncation_stability(self):
        seeds = child_seeds(5, 2000)
        lead = [np.mean([sample_cascade(CascadeSpec((0.5,), T), s).weights.max() for s in seeds])
                for T in (200, 400)]
        assert abs(lead[1] - lead[0]) / lead[1] < 0.01

    def test_deterministic(self):
        spec = CascadeSpec((0.4,), truncation=8)
        np.testing.assert_array_equal(sample_cascade(spec, 9).weights, sample_cascade(spec, 9).weights)


class TestCascadeLogSum:
    def test_constant_payoff(self):
        spec = CascadeSpec((0.3, 0.6), truncation=8)
        est = cascade_log_sum(spec, lambda z: np.full(len(z), 1.25), 4, 0, [0.5, 0.5])
        assert est.mean == pytest.approx(1.25)

    def test_depth_one_gaussian(self):
        # E log sum v e^{W} with W ~ N(0, s2) equals x s2 / 2
        x, s2 = 0.4, 0.8
        est = cascade_log_sum(CascadeSpec((x,)), lambda z: z[:, 0], 600, 1, [s2])
        assert abs(est.mean - x * s2 / 2) <= 3 * est.stderr

    def test_depth_one_log_sum_exp(self):
        x, lam = 0.5, np.array([0.3, -0.2])
        C = np.array([[0.9, 0.2], [0.2, 0.6]])
        est = cascade_log_sum(CascadeSpec((x,)), lambda z: logsumexp(z + lam, axis=1), 600, 2, [C])
        g, w = np.polynomial.hermite_e.hermegauss(40)
        L = np.linalg.cholesky(C)
        z = np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2) @ L.T
        wt = np.outer(w, w).ravel() / (2 * np.pi)
        exact = np.log(np.sum(wt * np.exp(x * logsumexp(z + lam, axis=1)))) / x
        assert abs(est.mean - exact) <= 3 * est.stderr

    def test_matches_recursion_two_levels(self):
        model = ModelSpec.single(2, 0.6)
        dQ = np.array([[np.diag([0.2, 0.3]), np.diag([0.3, 0.2])]])
        params = ParisiParams.from_increments([0.3, 0.6], dQ, [[0.1, -0.1]])
        est = z_term_mc(params, model, samples=400, seed=4, truncation=48)
        exact = recursion_x0(params, model, 0, Scheme(nodes=24))
        assert abs(est.mean - exact) <= 3 * est.stderr

    def test_rejects_indefinite(self):
        with pytest.raises(DegenerateCovariance):
            cascade_log_sum(CascadeSpec((0.5,)), lambda z: z[:, 0], 2, 0, [np.diag([1.0, -1.0])])


class TestYTerm:
    def test_constant_q(self):
        Q = np.zeros((1, 2, 2, 2))
        Q[:, :] = np.diag([0.5, 0.5])
        assert y_term_closed_form(CascadeSpec((0.3,)), Q, [1.0], [[1.0]]) == 0.0

    def test_single_level(self):
        d, x, delta2 = np.array([0.2, 0.3, 0.5]), 0.4, 1.7
        Q = replica_symmetric(d[None], x=(x,)).Q
        expected = 0.5 * x * delta2 * np.sum(d ** 2)
        assert y_term_closed_form(CascadeSpec((x,)), Q, [1.0], [[delta2]]) == pytest.approx(expected)

    def test_mc_matches_closed_form(self):
        dQ = np.array([[np.diag([0.2, 0.1]), np.diag([0.3, 0.4])]])
        params = ParisiParams.from_increments([0.35, 0.65], dQ, [[0.0, 0.0]])
        spec = CascadeSpec((0.35, 0.65), truncation=48)
        var = y_covariances(params.Q, [1.0], [[2.0]])
        est = cascade_log_sum(spec, lambda z: z[:, 0], 400, 6, list(var))
        assert abs(est.mean - y_term_closed_form(spec, params.Q, [1.0], [[2.0]])) <= 3 * est.stderr

    def test_non_monotone(self):
        Q = np.zeros((1, 3, 2, 2))
        Q[0, 1] = np.diag([0.5, 0.5])
        Q[0, 2] = np.diag([0.6, 0.4])
        with pytest.raises(NonMonotoneQ):
            y_term_closed_form(CascadeSpec((0.3, 0.6)), Q, [1.0], [[1.0]])
