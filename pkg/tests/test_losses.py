import math

import numpy as np
import pytest

from convdiag.errors import DataError
from convdiag.layers import softmax
from convdiag.losses import CLAMP_EPS, cross_entropy_loss, least_squares_loss
from helpers import central_difference, rel_err


def softmax_rows(logits):
    return np.stack([softmax(row) for row in np.atleast_2d(logits)])


class TestCrossEntropy:
    def test_perfect_prediction_near_zero(self):
        probs = np.array([[1.0 - CLAMP_EPS, CLAMP_EPS]])
        loss, _ = cross_entropy_loss(probs, [0])
        assert 0.0 <= loss < 1e-10

    def test_uniform_binary_is_two_log_two(self):
        loss, _ = cross_entropy_loss(np.array([[0.5, 0.5]]), [1])
        assert abs(loss - 2.0 * math.log(2.0)) < 1e-15

    def test_batch_average(self):
        # two identical uniform rows average to the per-sample value
        probs = np.array([[0.5, 0.5], [0.5, 0.5]])
        loss, _ = cross_entropy_loss(probs, [0, 1])
        assert abs(loss - 2.0 * math.log(2.0)) < 1e-15

    def test_direct_evaluation_against_formula(self):
        # independent evaluation of the per-class indicator sum
        rng = np.random.default_rng(0)
        probs = softmax_rows(rng.normal(size=(5, 4)))
        labels = rng.integers(0, 4, size=5)
        expected = 0.0
        for i in range(5):
            for j in range(4):
                indicator = 1.0 if labels[i] == j else 0.0
                p = min(max(probs[i, j], CLAMP_EPS), 1.0 - CLAMP_EPS)
                expected += indicator * math.log(p) + (1 - indicator) * math.log(1 - p)
        expected = -expected / 5
        loss, _ = cross_entropy_loss(probs, labels)
        assert abs(loss - expected) < 1e-12

    @pytest.mark.parametrize("seed", range(10))
    def test_gradient_matches_finite_differences(self, seed):
        rng = np.random.default_rng(300 + seed)
        q, n = int(rng.integers(1, 6)), int(rng.integers(2, 6))
        logits = rng.normal(scale=2.0, size=(q, n))
        labels = rng.integers(0, n, size=q)

        def loss():
            return cross_entropy_loss(softmax_rows(logits), labels)[0]

        _, grad = cross_entropy_loss(softmax_rows(logits), labels)
        (fd,) = central_difference(loss, [logits])
        assert rel_err(grad, fd) <= 1e-5

    def test_nonnegative_on_random_inputs(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            q, n = int(rng.integers(1, 8)), int(rng.integers(2, 7))
            probs = softmax_rows(rng.normal(scale=6.0, size=(q, n)))
            loss, _ = cross_entropy_loss(probs, rng.integers(0, n, size=q))
            assert loss >= 0.0

    def test_permutation_invariant(self):
        rng = np.random.default_rng(2)
        probs = softmax_rows(rng.normal(size=(7, 3)))
        labels = rng.integers(0, 3, size=7)
        loss_a, _ = cross_entropy_loss(probs, labels)
        order = rng.permutation(7)
        loss_b, _ = cross_entropy_loss(probs[order], labels[order])
        assert abs(loss_a - loss_b) < 1e-12

    def test_label_out_of_range(self):
        with pytest.raises(DataError):
            cross_entropy_loss(np.array([[0.5, 0.5]]), [2])

    def test_unnormalized_row_rejected(self):
        with pytest.raises(DataError):
            cross_entropy_loss(np.array([[0.4, 0.4]]), [0])


class TestLeastSquares:
    def test_zero_on_perfect_fit(self):
        loss, grad = least_squares_loss([0.3, 0.7], [0.3, 0.7])
        assert loss == 0.0
        assert np.all(grad == 0.0)

    def test_unit_case(self):
        loss, _ = least_squares_loss([0.0], [1.0])
        assert loss == 1.0

    def test_gradient_formula(self):
        # grad wrt each estimate is -2 (y - y_est) / q
        estimates = np.array([0.2, 0.9, 0.5])
        targets = np.array([0.5, 0.4, 0.5])
        _, grad = least_squares_loss(estimates, targets)
        assert np.allclose(grad, -2.0 * (targets - estimates) / 3.0)

    @pytest.mark.parametrize("seed", range(5))
    def test_gradient_matches_finite_differences(self, seed):
        rng = np.random.default_rng(400 + seed)
        q = int(rng.integers(1, 8))
        estimates = rng.uniform(0.0, 1.0, size=q)
        targets = rng.uniform(0.0, 1.0, size=q)

        def loss():
            return least_squares_loss(estimates, targets)[0]

        _, grad = least_squares_loss(estimates, targets)
        (fd,) = central_difference(loss, [estimates], h=1e-6)
        assert np.max(np.abs(grad - fd)) <= 1e-8

    def test_permutation_invariant(self):
        rng = np.random.default_rng(3)
        estimates = rng.uniform(size=9)
        targets = rng.uniform(size=9)
        order = rng.permutation(9)
        assert (least_squares_loss(estimates, targets)[0]
                == least_squares_loss(estimates[order], targets[order])[0])

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            least_squares_loss([0.1, 0.2], [0.3])
