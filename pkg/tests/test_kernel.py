import math

import numpy as np
import pytest

from pottscut.errors import BadBoundaries, NonSymmetric, WrongVariant
from pottscut.kernel import (BlockKernel, DubinsKernel, PiecewisePsi, Rank1Kernel, block_average,
                             block_kernel_new, cell_averages, coarsen, constant_kernel, kernel_from_dict,
                             l1_distance, psd_check)

LN2 = math.log(2.0)


class TestBlockKernel:
    def test_homogeneous(self):
        k = block_kernel_new([0, 1], [[1]])
        assert k(0.3, 0.9) == 1.0
        assert k.spec.M == 1

    def test_two_blocks(self):
        k = block_kernel_new([0, 0.5, 1], [[2, 1], [1, 2]])
        assert k(0.1, 0.2) == 2.0
        assert k(0.1, 0.7) == 1.0
        np.testing.assert_allclose(k.spec.rho, [0.5, 0.5])

    def test_rejects_asymmetric(self):
        with pytest.raises(NonSymmetric):
            block_kernel_new([0, 0.5, 1], [[1, 2], [3, 1]])

    @pytest.mark.parametrize("bounds", [[0.1, 1], [0, 0.5, 0.4, 1], [0, 0.9]])
    def test_rejects_bad_boundaries(self, bounds):
        with pytest.raises(BadBoundaries):
            block_kernel_new(bounds, np.ones((len(bounds) - 1,) * 2))


class TestBlockAverage:
    def test_constant(self):
        k = constant_kernel(3.5)
        assert block_average(k, 7, 2, 5) == pytest.approx(3.5)

    def test_dubins_diagonal_cell(self):
        assert block_average(DubinsKernel(), 2, 2, 2) == pytest.approx(4 * (1 - LN2), rel=1e-12)

    def test_dubins_off_diagonal_cell(self):
        assert block_average(DubinsKernel(), 2, 1, 2) == pytest.approx(2 * LN2, rel=1e-12)

    def test_aligned_block_value_exact(self):
        k = block_kernel_new([0, 0.25, 1], [[3, 1], [1, 2]])
        Kt = cell_averages(k, 8)
        assert Kt[0, 1] == pytest.approx(3.0, abs=1e-12)
        assert Kt[0, 5] == pytest.approx(1.0, abs=1e-12)
        assert Kt[6, 7] == pytest.approx(2.0, abs=1e-12)

    def test_one_based_indices(self):
        with pytest.raises(IndexError):
            block_average(DubinsKernel(), 2, 0, 1)


class TestCoarsen:
    def test_constant_stays_constant(self):
        k = coarsen(constant_kernel(1.0), 4)
        np.testing.assert_allclose(k.values, np.ones((4, 4)))

    def test_dubins_two_blocks(self):
        k = coarsen(DubinsKernel(), 2)
        np.testing.assert_allclose(k.values, [[4, 2 * LN2], [2 * LN2, 4 * (1 - LN2)]], rtol=1e-12)

    def test_aligned_block_is_fixed_point(self):
        k = block_kernel_new([0, 0.5, 1], [[2, 1], [1, 3]])
        assert l1_distance(coarsen(k, 4), k) == pytest.approx(0.0, abs=1e-14)

    def test_preserves_integral(self):
        D = DubinsKernel()
        for M in (1, 3, 8):
            k = coarsen(D, M)
            assert k.values.mean() == pytest.approx(D.cell_integral(0, 1, 0, 1), rel=1e-12)

    def test_rank1_coarsens_to_outer_product(self):
        psi = PiecewisePsi([0, 0.5, 1], [1.0, 2.0, 0.5])
        k = coarsen(Rank1Kernel(psi), 5)
        assert np.linalg.matrix_rank(k.values, tol=1e-10) == 1
        with pytest.warns(UserWarning):
            assert psd_check(k)


class TestL1Distance:
    def test_identical(self):
        k = block_kernel_new([0, 0.3, 1], [[1, 2], [2, 1]])
        assert l1_distance(k, k) == 0.0

    def test_constant_gap(self):
        assert l1_distance(constant_kernel(1.0), constant_kernel(2.0)) == pytest.approx(1.0)

    def test_dubins_coarsenings_decrease(self):
        D = DubinsKernel()
        dists = [l1_distance(D, coarsen(D, M)) for M in (1, 2, 4, 8, 16)]
        assert all(b < a for a, b in zip(dists, dists[1:]))

    def test_dubins_block_matches_quadrature(self):
        # closed form against brute-force midpoint integration
        D = DubinsKernel()
        blk = coarsen(D, 3)
        n = 1500
        x = (np.arange(n) + 0.5) / n
        brute = np.abs(D(x[:, None], x[None, :]) - blk(x[:, None], x[None, :])).mean()
        assert l1_distance(D, blk) == pytest.approx(brute, rel=5e-3)

    def test_rank1_contracts(self):
        psi = PiecewisePsi([0, 1], [0.5, 2.0])
        k = Rank1Kernel(psi)
        d = [l1_distance(k, coarsen(k, M)) for M in (2, 4, 8)]
        assert d[0] > d[1] > d[2]


class TestPSD:
    def test_scalar(self):
        assert psd_check(block_kernel_new([0, 1], [[1]]))

    def test_positive_definite(self):
        chk = psd_check(block_kernel_new([0, 0.5, 1], [[2, 1], [1, 2]]))
        assert chk.ok and chk.min_eigenvalue == pytest.approx(1.0)

    def test_bipartite_is_not_psd(self):
        assert not psd_check(block_kernel_new([0, 0.5, 1], [[0, 1], [1, 0]]))

    def test_wrong_variant(self):
        with pytest.raises(WrongVariant):
            psd_check(DubinsKernel())


class TestFromDict:
    @pytest.mark.parametrize("spec", [
        {"type": "constant", "value": 2.0},
        {"type": "block", "boundaries": [0, 0.4, 1], "values": [[1, 0.5], [0.5, 2]]},
        {"type": "dubins"},
        {"type": "rank1", "psi": "piecewise", "knots": [0, 1], "vals": [1, 2]},
    ])
    def test_round_trip(self, spec):
        k = kernel_from_dict(spec)
        k2 = kernel_from_dict(k.to_dict())
        np.testing.assert_allclose(cell_averages(k, 6), cell_averages(k2, 6))

    def test_unknown(self):
        with pytest.raises(ValueError):
            kernel_from_dict({"type": "nope"})
