"""Tests for Hutchinson sampling, EMA truncation and baseline preconditioners."""

import numpy as np
import pytest

from oasis_bench.estimator import (
    DiagonalPreconditioner,
    baseline_precond,
    bias_correct,
    clamp,
    ema_update,
    hutchinson_block,
    hutchinson_sample,
    warmstart,
)
from oasis_bench.linalg import Rng, rademacher


def _matrix_oracle(matrix):
    def hvp(w, v, batch=None):
        return matrix @ v

    return hvp


def _random_symmetric(dim: int, rng: Rng) -> np.ndarray:
    g = rng.normal(dim * dim).reshape(dim, dim)
    return 0.5 * (g + g.T)


class TestHutchinsonSample:
    def test_diagonal_matrix_is_exact(self, rng):
        hvp = _matrix_oracle(np.diag([2.0, -3.0]))
        for _ in range(4):
            z = rademacher(2, rng)
            np.testing.assert_array_equal(hutchinson_sample(hvp, np.zeros(2), z), [2.0, -3.0])

    def test_off_diagonal_signs(self):
        hvp = _matrix_oracle(np.array([[0.0, 1.0], [1.0, 0.0]]))
        same = hutchinson_sample(hvp, np.zeros(2), np.array([1.0, 1.0]))
        opposite = hutchinson_sample(hvp, np.zeros(2), np.array([1.0, -1.0]))
        np.testing.assert_array_equal(same, [1.0, 1.0])
        np.testing.assert_array_equal(opposite, [-1.0, -1.0])
        np.testing.assert_array_equal((same + opposite) / 2, [0.0, 0.0])

    def test_probe_dimension_checked(self):
        with pytest.raises(ValueError, match="Dimension mismatch"):
            hutchinson_sample(_matrix_oracle(np.eye(2)), np.zeros(2), np.ones(3))

    def test_block_on_diagonal_matrix(self, rng):
        diag = rng.normal(7)
        samples = hutchinson_block(np.diag(diag), 20, rng)
        assert samples.shape == (20, 7)
        assert np.max(np.abs(samples - diag)) <= 1e-12

    def test_block_matches_single_samples(self):
        matrix = _random_symmetric(6, Rng(1))
        block = hutchinson_block(matrix, 3, Rng(2))
        stream = Rng(2)
        hvp = _matrix_oracle(matrix)
        single = np.stack([hutchinson_sample(hvp, np.zeros(6), rademacher(6, stream)) for _ in range(3)])
        np.testing.assert_allclose(block, single, rtol=0, atol=1e-12)

    def test_sample_magnitude_bound(self, rng):
        matrix = _random_symmetric(8, rng)
        row_sums = np.abs(matrix).sum(axis=1)
        samples = hutchinson_block(matrix, 200, rng)
        assert np.all(np.abs(samples) <= row_sums + 1e-12)
        assert np.max(np.abs(samples)) <= np.sqrt(8) * np.linalg.norm(matrix, 2) + 1e-12

    def test_oracle_linearity(self, small_logistic, rng):
        w = rng.normal(small_logistic.dim())
        v1, v2 = rng.normal(small_logistic.dim()), rng.normal(small_logistic.dim())
        combined = small_logistic.hvp(w, 2.0 * v1 - 3.0 * v2)
        separate = 2.0 * small_logistic.hvp(w, v1) - 3.0 * small_logistic.hvp(w, v2)
        np.testing.assert_allclose(combined, separate, rtol=0, atol=1e-10)


class TestEmaAndClamp:
    def test_ema_formula(self):
        np.testing.assert_array_equal(ema_update(np.ones(2), np.array([3.0, 5.0]), 0.5), [2.0, 3.0])

    def test_ema_beta2_one_keeps_previous(self):
        previous = np.array([1.0, 2.0])
        updated = ema_update(previous, np.array([9.0, 9.0]), 1.0)
        np.testing.assert_array_equal(updated, previous)
        assert updated is not previous

    def test_ema_beta2_zero_takes_sample(self):
        np.testing.assert_array_equal(ema_update(np.ones(2), np.array([3.0, 5.0]), 0.0), [3.0, 5.0])

    def test_ema_rejects_out_of_range(self):
        with pytest.raises(ValueError, match="beta2"):
            ema_update(np.ones(2), np.ones(2), 1.5)

    def test_clamp_formula(self):
        np.testing.assert_array_equal(clamp(np.array([0.5, -2.0, 0.01]), 0.1), [0.5, 2.0, 0.1])

    def test_clamp_zero_vector(self):
        np.testing.assert_array_equal(clamp(np.zeros(3), 0.25), [0.25, 0.25, 0.25])

    def test_clamp_small_alpha_keeps_magnitudes(self):
        d = np.array([0.3, -4.0, 1.5])
        np.testing.assert_array_equal(clamp(d, 1e-6), np.abs(d))

    def test_clamp_idempotent(self, rng):
        d = rng.normal(10)
        once = clamp(d, 0.5)
        np.testing.assert_array_equal(clamp(once, 0.5), once)
        assert once.min() >= 0.5

    @pytest.mark.parametrize("alpha", [0.0, -1.0])
    def test_clamp_rejects_non_positive_alpha(self, alpha):
        with pytest.raises(ValueError, match="alpha"):
            clamp(np.ones(2), alpha)


class TestBiasCorrection:
    def test_first_step_recovers_sample(self):
        v = np.array([0.3, -1.2])
        np.testing.assert_allclose(bias_correct(0.1 * v, 0.9, 0), v, rtol=1e-14)

    def test_hand_unrolled_ema(self):
        d = ema_update(ema_update(np.zeros(1), np.ones(1), 0.5), np.ones(1), 0.5)
        np.testing.assert_allclose(d, [0.75])
        np.testing.assert_allclose(bias_correct(d, 0.5, 1), [1.0])

    def test_factor_tends_to_one(self):
        assert bias_correct(np.ones(1), 0.9, 10_000)[0] == pytest.approx(1.0)

    def test_rejects_beta2_one(self):
        with pytest.raises(ValueError, match="beta2"):
            bias_correct(np.ones(2), 1.0, 3)

    def test_rejects_negative_index(self):
        with pytest.raises(ValueError, match="iteration index"):
            bias_correct(np.ones(2), 0.9, -1)


class TestWarmstart:
    def test_single_sample_of_diagonal_is_exact(self):
        hvp = _matrix_oracle(np.diag([1.0, -4.0, 2.5]))
        np.testing.assert_array_equal(warmstart(hvp, np.zeros(3), 1, Rng(0)), [1.0, -4.0, 2.5])

    def test_average_is_reproducible(self):
        hvp = _matrix_oracle(_random_symmetric(5, Rng(3)))
        first = warmstart(hvp, np.zeros(5), 2, Rng(4))
        second = warmstart(hvp, np.zeros(5), 2, Rng(4))
        np.testing.assert_array_equal(first, second)

        stream = Rng(4)
        samples = [hutchinson_sample(hvp, np.zeros(5), rademacher(5, stream)) for _ in range(2)]
        np.testing.assert_allclose(first, (samples[0] + samples[1]) / 2, rtol=1e-14)

    def test_many_samples_approach_diagonal(self):
        matrix = _random_symmetric(10, Rng(5))
        estimate = warmstart(_matrix_oracle(matrix), np.zeros(10), 5000, Rng(6))
        diag = np.diag(matrix)
        assert np.linalg.norm(estimate - diag) / np.linalg.norm(diag) <= 0.1

    def test_rejects_zero_samples(self):
        with pytest.raises(ValueError, match="at least one"):
            warmstart(_matrix_oracle(np.eye(2)), np.zeros(2), 0, Rng(0))


class TestDiagonalPreconditioner:
    def test_truncation_invariant(self, rng):
        precond = DiagonalPreconditioner.from_initial(rng.normal(6), alpha=0.3, beta2=0.9)
        for _ in range(10):
            precond = precond.advance(rng.normal(6))
            np.testing.assert_array_equal(precond.d_hat, np.maximum(np.abs(precond.d_raw), 0.3))
            assert precond.d_hat.min() >= precond.alpha
            assert precond.d_hat.max() <= precond.gamma

    def test_gamma_is_running_max(self):
        precond = DiagonalPreconditioner.from_initial(np.array([5.0, 1.0]), alpha=0.1, beta2=0.0)
        precond = precond.advance(np.array([1.0, 1.0]))
        assert precond.d_hat.max() == 1.0
        assert precond.gamma == 5.0

    def test_bias_corrected_start(self):
        v = np.array([2.0, -8.0])
        precond = DiagonalPreconditioner.from_initial(0.01 * v, alpha=1e-5, beta2=0.99, bias_steps=0)
        np.testing.assert_allclose(precond.d_hat, np.abs(v), rtol=1e-12)
        precond = precond.advance(v)
        assert precond.bias_steps == 1
        np.testing.assert_allclose(precond.d_hat, np.abs(v), rtol=1e-12)

    def test_identity_stays_identity_without_decay(self, rng):
        precond = DiagonalPreconditioner.identity(4, alpha=1.0, beta2=1.0)
        for _ in range(5):
            precond = precond.advance(rng.normal(4) * 10)
        np.testing.assert_array_equal(precond.d_hat, np.ones(4))


class TestBaselinePreconditioners:
    def test_adagrad_accumulates(self):
        acc, d = baseline_precond("adagrad", np.zeros(2), np.array([3.0, 4.0]), 0.99, 0)
        acc, d = baseline_precond("adagrad", acc, np.zeros(2), 0.99, 1)
        np.testing.assert_array_equal(d, [3.0, 4.0])

    def test_rmsprop(self):
        acc, d = baseline_precond("rmsprop", np.array([1.0]), np.array([2.0]), 0.5, 3)
        np.testing.assert_allclose(acc, [2.5])
        np.testing.assert_allclose(d, [np.sqrt(2.5)])

    def test_adam_first_step_is_gradient_magnitude(self, rng):
        g = rng.normal(5)
        _, d = baseline_precond("adam", np.zeros(5), g, 0.999, 0)
        np.testing.assert_allclose(d, np.abs(g), rtol=1e-12)

    def test_adahessian_on_constant_diagonal(self, rng):
        hvp = _matrix_oracle(np.diag([2.0, -3.0]))
        acc = np.zeros(2)
        for k in range(200):
            v = hutchinson_sample(hvp, np.zeros(2), rademacher(2, rng))
            acc, d = baseline_precond("adahessian", acc, v, 0.9, k)
        np.testing.assert_allclose(d, [2.0, 3.0], rtol=1e-12)

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="Unknown"):
            baseline_precond("adadelta", np.zeros(1), np.ones(1), 0.9, 0)
