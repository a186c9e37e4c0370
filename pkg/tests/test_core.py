import doctest
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import copentropy.core
from copentropy.core import (
    ce_matrix,
    conditional_mi,
    copula_entropy,
    lagged_triple,
    transfer_entropy,
    vector_association,
)
from copentropy.dataset import Dataset, TiePolicy
from copentropy.errors import ConfigError, DataError, EstimatorError, PartitionError
from copentropy.knn import EntropyConfig, ksg_entropy
from copentropy.simlab import (
    correlation_matrix,
    gaussian_cmi_oracle,
    replicate_seeds,
    sample_mvn,
)

from .conftest import gaussian_pair


def test_doctests():
    assert doctest.testmod(copentropy.core).failed == 0


class TestCopulaEntropy:
    def test_independent(self, rng):
        assert copula_entropy(rng.uniform(size=(2000, 2))).ce == pytest.approx(0, abs=0.05)

    @pytest.mark.parametrize("rho,tol", [(0.9, 0.06), (0.5, 0.05)])
    def test_gaussian_closed_form(self, rho, tol):
        R = correlation_matrix(rho)
        vals = [copula_entropy(sample_mvn(0.0, R, 2000, s)).ce for s in replicate_seeds(1, 10)]
        assert np.mean(vals) == pytest.approx(0.5 * math.log(1 - rho**2), abs=tol)

    def test_mi_is_minus_ce(self, rng):
        r = copula_entropy(rng.standard_normal((100, 2)))
        assert r.mi == -r.ce
        assert r.to_dict()["mi"] == -r.to_dict()["ce"]
        assert (r.T, r.dims) == (100, 2)

    def test_monotone_invariance_exact(self, rng):
        x = gaussian_pair(0.6, 500, 1)
        y = np.column_stack([np.exp(x[:, 0]), x[:, 1] ** 3])
        assert copula_entropy(x).ce == copula_entropy(y).ce

    def test_column_permutation(self, rng):
        x = sample_mvn(0.0, correlation_matrix(0.4, 3), 400, 2).values
        assert copula_entropy(x).ce == pytest.approx(copula_entropy(x[:, [2, 0, 1]]).ce,
                                                     abs=1e-12)

    def test_marginal_decomposition(self):
        # H(x) = sum H(x_i) + H_c(x)
        x = gaussian_pair(0.7, 3000, 5)
        joint = ksg_entropy(x).value
        margins = sum(ksg_entropy(x[:, i]).value for i in range(2))
        assert joint == pytest.approx(margins + copula_entropy(x).ce, abs=0.1)

    def test_needs_two_columns(self, rng):
        with pytest.raises(DataError):
            copula_entropy(rng.standard_normal((50, 1)))

    def test_ties_need_random_policy(self):
        x = np.column_stack([np.repeat([0.0, 1.0], 50), np.repeat([0.0, 1.0], 50)])
        with pytest.raises(EstimatorError, match="random"):
            copula_entropy(x)
        assert math.isfinite(copula_entropy(x, tp=TiePolicy.random(1)).ce)

    def test_too_short(self):
        with pytest.raises(ConfigError):
            copula_entropy(np.arange(6.0).reshape(3, 2))


class TestCeMatrix:
    def test_chain(self):
        R = np.array([[1, 0.8, 0.64], [0.8, 1, 0.8], [0.64, 0.8, 1]])
        m = sum(ce_matrix(sample_mvn(0.0, R, 3000, s)).values for s in range(5)) / 5
        assert m[0, 1] == pytest.approx(-0.5 * math.log(0.36), abs=0.06)
        assert m[1, 2] == pytest.approx(-0.5 * math.log(0.36), abs=0.06)
        assert m[0, 2] == pytest.approx(-0.5 * math.log(1 - 0.64**2), abs=0.06)

    def test_symmetric_zero_diagonal(self, rng):
        m = ce_matrix(rng.standard_normal((300, 4)))
        np.testing.assert_array_equal(m.values, m.values.T)
        np.testing.assert_array_equal(np.diag(m.values), 0)

    def test_independent(self, rng):
        m = ce_matrix(rng.standard_normal((2000, 3)))
        assert np.all(np.abs(m.values) < 0.05)

    def test_entry_equals_pairwise(self, rng):
        x = rng.standard_normal((200, 3))
        m = ce_matrix(x)
        assert m[0, 2] == -copula_entropy(x[:, [0, 2]]).ce

    def test_threads_do_not_change_result(self, rng):
        x = rng.standard_normal((300, 5))
        np.testing.assert_array_equal(ce_matrix(x, threads=1).values,
                                      ce_matrix(x, threads=4).values)


class TestVectorAssociation:
    def test_singletons_reduce_to_pair(self, rng):
        x = gaussian_pair(0.5, 400, 2)
        assert vector_association(x, [[0], [1]]) == copula_entropy(x).ce

    @pytest.mark.xfail(strict=True, reason="kNN boundary bias of the 4-D copula term is "
                       "about +0.14 at T=2000 and only shrinks like T^(-1/4)")
    def test_block_independent(self):
        R = np.eye(4)
        R[0, 1] = R[1, 0] = 0.8
        R[2, 3] = R[3, 2] = 0.75
        vals = [vector_association(sample_mvn(0.0, R, 2000, s), [[0, 1], [2, 3]])
                for s in range(3)]
        assert np.mean(vals) == pytest.approx(0.0, abs=0.06)

    def test_magnitude_grows_with_cross_correlation(self):
        # the estimate carries a positive bias, so compare -association (the MI)
        def mi(c):
            R = np.full((4, 4), c)
            R[:2, :2] = [[1, 0.8], [0.8, 1]]
            R[2:, 2:] = [[1, 0.75], [0.75, 1]]
            return -vector_association(sample_mvn(0.0, R, 2000, 4), [[0, 1], [2, 3]])
        vals = [mi(c) for c in (0.0, 0.3, 0.6)]
        assert vals[0] < vals[1] < vals[2]

    def test_overlap(self, rng):
        with pytest.raises(PartitionError):
            vector_association(rng.standard_normal((50, 3)), [[0, 1], [1, 2]])

    def test_needs_two_groups(self, rng):
        with pytest.raises(PartitionError):
            vector_association(rng.standard_normal((50, 3)), [[0, 1, 2]])


class TestConditionalMI:
    def test_independent(self, rng):
        assert conditional_mi(rng.standard_normal((2000, 3)), [0], [1], [2]) == pytest.approx(
            0, abs=0.07)

    def test_gaussian_oracle(self):
        R = np.array([[1, 0.0, 0.7], [0.0, 1, 0.6], [0.7, 0.6, 1]])
        oracle = gaussian_cmi_oracle(R)
        vals = [conditional_mi(sample_mvn(0.0, R, 2000, s), [0], [1], [2]) for s in range(3)]
        assert np.mean(vals) == pytest.approx(oracle, abs=0.08)

    def test_symmetric_in_x_y(self, rng):
        x = sample_mvn(0.0, correlation_matrix(0.3, 3), 300, 1)
        assert conditional_mi(x, [0], [1], [2]) == conditional_mi(x, [1], [0], [2])

    def test_empty_condition(self, rng):
        with pytest.raises(PartitionError):
            conditional_mi(rng.standard_normal((50, 3)), [0], [1], [])

    def test_named_columns(self, rng):
        d = Dataset(rng.standard_normal((100, 3)), ("a", "b", "c"))
        assert conditional_mi(d, ["a"], ["b"], ["c"]) == conditional_mi(d, [0], [1], [2])


class TestTransferEntropy:
    def test_lagged_triple_literal(self):
        x = np.arange(10.0)
        y = 100 + np.arange(10.0)
        t = lagged_triple(x, y, 3)
        np.testing.assert_array_equal(t[0], [103, 100, 0])
        assert t.shape == (7, 3)

    def test_lagged_triple_adjacent(self):
        x = np.arange(10.0)
        y = 100 + np.arange(10.0)
        t = lagged_triple(x, y, 3, "adjacent")
        np.testing.assert_array_equal(t[0], [103, 102, 0])
        assert t.shape == (7, 3)

    def test_driven_pair(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal(3000)
        y = np.empty_like(x)
        y[0] = 0.0
        y[1:] = x[:-1] + rng.standard_normal(2999)
        forward = transfer_entropy(x, y, 1)
        # y[t+1] independent of y[t] given nothing else, so TE = I(y[t+1]; x[t]) = 0.5 log 2
        assert forward == pytest.approx(0.5 * math.log(2), abs=0.08)
        assert forward > transfer_entropy(y, x, 1)

    def test_independent(self, rng):
        x, y = rng.standard_normal((2, 2000))
        assert transfer_entropy(x, y, 1) == pytest.approx(0, abs=0.07)

    def test_too_short(self):
        with pytest.raises(DataError, match="= 9"):
            transfer_entropy(np.arange(8.0), np.arange(8.0), lag=4)

    def test_bad_lag(self):
        with pytest.raises(ConfigError):
            transfer_entropy(np.arange(20.0), np.arange(20.0), lag=0)

    def test_unknown_history(self):
        with pytest.raises(ConfigError):
            lagged_triple(np.arange(20.0), np.arange(20.0), 1, "both")
