import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spdalign.core import (
    FeatureBatch,
    batch_covariance,
    check_spd,
    matrix_exp,
    matrix_log,
    matrix_power,
    random_spd,
    random_spd_with_condition,
    sym_eig,
    symmetrize,
)
from spdalign.errors import (
    DimensionError,
    InsufficientSamplesError,
    NotPositiveDefiniteError,
    ValidationError,
)


def rel_fro(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


class TestSymmetrize:
    def test_examples(self):
        np.testing.assert_array_equal(symmetrize([[1, 2], [0, 1]]), [[1, 1], [1, 1]])
        np.testing.assert_array_equal(symmetrize(np.eye(3)), np.eye(3))
        np.testing.assert_array_equal(symmetrize([[0, 4], [2, 0]]), [[0, 3], [3, 0]])

    def test_non_square(self):
        with pytest.raises(DimensionError):
            symmetrize(np.ones((2, 3)))


class TestCheckSpd:
    def test_rejects_asymmetric(self):
        with pytest.raises(ValidationError):
            check_spd([[2.0, 1.0], [0.0, 2.0]])

    def test_rejects_indefinite(self):
        with pytest.raises(NotPositiveDefiniteError):
            check_spd(np.diag([1.0, -1.0]))

    def test_rejects_singular(self):
        with pytest.raises(NotPositiveDefiniteError):
            check_spd(np.diag([1.0, 0.0]))


class TestSymEig:
    def test_diagonal(self):
        eig = sym_eig(np.diag([4.0, 1.0]))
        np.testing.assert_array_equal(eig.values, [1.0, 4.0])
        np.testing.assert_array_equal(eig.vectors, [[0.0, 1.0], [1.0, 0.0]])

    def test_identity(self):
        eig = sym_eig(np.eye(4))
        np.testing.assert_allclose(eig.values, 1.0)
        np.testing.assert_allclose(eig.vectors @ eig.vectors.T, np.eye(4), atol=1e-12)

    def test_random_reconstruction(self):
        a = random_spd(8, np.random.default_rng(0))
        eig = sym_eig(a)
        assert rel_fro(eig.reconstruct(), a) < 1e-10
        np.testing.assert_allclose(eig.vectors @ eig.vectors.T, np.eye(8), atol=1e-10)
        assert np.all(np.diff(eig.values) >= 0) and eig.values[0] > 0

    def test_sign_convention(self):
        a = random_spd(10, np.random.default_rng(1))
        u = sym_eig(a).vectors
        pivots = np.abs(u).argmax(axis=0)
        assert np.all(u[pivots, np.arange(10)] > 0)

    def test_deterministic(self):
        a = random_spd(12, np.random.default_rng(2))
        e1, e2 = sym_eig(a), sym_eig(a.copy())
        assert e1.vectors.tobytes() == e2.vectors.tobytes()
        assert e1.values.tobytes() == e2.values.tobytes()


class TestMatrixFunctions:
    def test_log_examples(self):
        np.testing.assert_allclose(matrix_log(np.eye(3)), np.zeros((3, 3)), atol=1e-15)
        np.testing.assert_allclose(matrix_log(np.diag([math.e, math.e])), np.eye(2), atol=1e-15)
        np.testing.assert_allclose(
            matrix_log(np.diag([4.0, 1.0])), np.diag([1.3862943611198906, 0.0]), atol=1e-15
        )

    def test_exp_examples(self):
        np.testing.assert_allclose(matrix_exp(np.zeros((3, 3))), np.eye(3))
        np.testing.assert_allclose(matrix_exp(np.eye(2)), np.diag([math.e, math.e]))

    def test_exp_rejects_asymmetric(self):
        with pytest.raises(ValidationError):
            matrix_exp([[0.0, 1.0], [0.0, 0.0]])

    def test_exp_output_is_spd(self):
        s = symmetrize(np.random.default_rng(3).standard_normal((6, 6)))
        check_spd(matrix_exp(s))

    def test_power_examples(self):
        np.testing.assert_allclose(matrix_power(np.eye(3), -0.5), np.eye(3))
        np.testing.assert_allclose(matrix_power(np.diag([4.0, 9.0]), 0.5), np.diag([2.0, 3.0]))

    def test_power_square(self):
        a = random_spd(8, np.random.default_rng(4))
        r = matrix_power(a, 0.5)
        assert rel_fro(r @ r, a) < 1e-10

    def test_power_matches_scipy(self):
        import scipy.linalg

        a = random_spd(6, np.random.default_rng(5))
        np.testing.assert_allclose(matrix_power(a, 0.5), scipy.linalg.sqrtm(a).real, atol=1e-10)
        np.testing.assert_allclose(matrix_log(a), scipy.linalg.logm(a).real, atol=1e-10)

    @pytest.mark.parametrize("n", [2, 8, 32, 64])
    @pytest.mark.parametrize("cond", [1.0, 1e3, 1e6])
    def test_log_exp_round_trip(self, n, cond):
        rng = np.random.default_rng(n)
        a = random_spd_with_condition(n, cond, rng)
        assert rel_fro(matrix_exp(matrix_log(a)), a) < 1e-8


class TestFeatureBatch:
    def test_too_few_rows(self):
        with pytest.raises(InsufficientSamplesError):
            FeatureBatch(np.zeros((1, 3)))

    def test_label_length(self):
        with pytest.raises(DimensionError):
            FeatureBatch(np.zeros((3, 2)), np.array([0, 1]))

    def test_negative_labels(self):
        with pytest.raises(ValidationError):
            FeatureBatch(np.zeros((2, 2)), np.array([0, -1]))


class TestBatchCovariance:
    rows = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 0.0]])

    def test_rank_deficient_without_ridge(self):
        with pytest.raises(NotPositiveDefiniteError):
            batch_covariance(self.rows, 0.0)

    def test_hand_computed(self):
        np.testing.assert_allclose(
            batch_covariance(self.rows, 1e-5), np.diag([1 + 1e-5, 1e-5]), rtol=0, atol=1e-15
        )

    def test_identical_rows(self):
        rows = np.tile([3.0, -1.0, 2.0], (5, 1))
        np.testing.assert_allclose(batch_covariance(rows, 1e-5), 1e-5 * np.eye(3), atol=1e-18)

    def test_too_few_rows(self):
        with pytest.raises(InsufficientSamplesError):
            batch_covariance(np.zeros((1, 2)))

    def test_matches_numpy(self):
        x = np.random.default_rng(6).standard_normal((40, 5))
        np.testing.assert_allclose(batch_covariance(x, 0.0), np.cov(x.T), atol=1e-14)

    def test_min_eigenvalue_at_least_gamma(self):
        x = np.random.default_rng(7).standard_normal((4, 10))
        lam = np.linalg.eigvalsh(batch_covariance(x, 1e-5))
        assert lam[0] >= 1e-5 - 1e-12

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 30), d=st.integers(1, 8))
    def test_permutation_and_shift_invariance(self, seed, n, d):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((n, d))
        c = batch_covariance(x, 1e-5)
        perm = rng.permutation(n)
        np.testing.assert_allclose(batch_covariance(x[perm], 1e-5), c, rtol=0, atol=1e-12)
        shifted = x + rng.uniform(-5, 5, size=d)
        np.testing.assert_allclose(batch_covariance(shifted, 1e-5), c, rtol=0, atol=1e-10)
