import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memctrl.numerics import (
    cosine_similarity,
    entropy,
    finite_diff_grad,
    l2_normalize,
    softmax,
    validate_prob_dist,
)


class TestSoftmax:
    def test_uniform_on_equal_logits(self):
        np.testing.assert_allclose(softmax([0, 0, 0, 0]), [0.25] * 4, atol=1e-12)

    def test_exp_inverts_ln(self):
        out = softmax([math.log(1), math.log(2), math.log(3)])
        np.testing.assert_allclose(out, [1 / 6, 2 / 6, 3 / 6], atol=1e-12)

    def test_large_logits_do_not_overflow(self):
        out = softmax([1000.0, 1000.0])
        np.testing.assert_allclose(out, [0.5, 0.5], atol=1e-12)
        assert np.all(np.isfinite(out))

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            softmax([])

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            softmax([0.0, np.nan])

    @given(st.lists(st.floats(-50, 50), min_size=1, max_size=16),
           st.floats(-100, 100))
    @settings(max_examples=200, deadline=None)
    def test_shift_invariance(self, logits, c):
        a = softmax(logits)
        b = softmax(np.asarray(logits) + c)
        np.testing.assert_allclose(a, b, atol=1e-9)

    def test_output_is_valid_distribution(self):
        rng = np.random.default_rng(42)
        for _ in range(100):
            p = softmax(rng.standard_normal(rng.integers(1, 20)))
            validate_prob_dist(p)


class TestEntropy:
    def test_uniform_is_maximal(self):
        assert entropy([0.25] * 4) == pytest.approx(math.log(4), abs=1e-12)

    def test_one_hot_is_zero(self):
        assert entropy([0.0, 1.0, 0.0]) == 0.0

    def test_direct_summation_value(self):
        # oracle: -sum p ln p = 1.5 * (0.25 * ln 4) + 0.5 * ln 2
        expected = -(0.5 * math.log(0.5) + 2 * 0.25 * math.log(0.25))
        assert expected == pytest.approx(1.039721, abs=1e-6)
        assert entropy([0.5, 0.25, 0.25]) == pytest.approx(expected, abs=1e-12)

    @given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=12))
    @settings(max_examples=300, deadline=None)
    def test_bounds(self, raw):
        total = sum(raw)
        if total <= 0:
            return
        p = np.asarray(raw) / total
        h = entropy(p)
        assert -1e-12 <= h <= math.log(len(p)) + 1e-9


class TestCosineSimilarity:
    def test_identical_unit_vectors(self):
        v = l2_normalize([3.0, 1.0, 2.0])
        assert cosine_similarity(v, v) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal(self):
        assert cosine_similarity([1, 0], [0, 1]) == 0.0

    def test_antiparallel(self):
        assert cosine_similarity([1.0, 0.0], [-1.0, 0.0]) == pytest.approx(-1.0)

    def test_zero_norm_means_no_preference(self):
        assert cosine_similarity([0.0, 0.0], [1.0, 2.0]) == 0.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            cosine_similarity([1.0], [1.0, 2.0])

    def test_symmetry_and_scale_invariance(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            a = rng.standard_normal(5)
            b = rng.standard_normal(5)
            alpha, beta = rng.uniform(0.1, 10, size=2)
            assert cosine_similarity(a, b) == pytest.approx(
                cosine_similarity(b, a), abs=1e-12)
            assert cosine_similarity(alpha * a, beta * b) == pytest.approx(
                cosine_similarity(a, b), abs=1e-9)
            assert -1.0 - 1e-12 <= cosine_similarity(a, b) <= 1.0 + 1e-12


class TestL2Normalize:
    def test_three_four_five(self):
        np.testing.assert_allclose(l2_normalize([3.0, 4.0]), [0.6, 0.8], atol=1e-12)

    def test_symmetric_pair(self):
        np.testing.assert_allclose(
            l2_normalize([1.0, 1.0]), [0.70711, 0.70711], atol=1e-5)

    def test_idempotent(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            v = rng.standard_normal(6)
            once = l2_normalize(v)
            np.testing.assert_allclose(l2_normalize(once), once, atol=1e-12)

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError):
            l2_normalize([0.0, 0.0, 0.0])


class TestFiniteDiffGrad:
    def test_squared_norm(self):
        grad = finite_diff_grad(lambda x: float(x @ x), np.array([1.0, 2.0]))
        np.testing.assert_allclose(grad, [2.0, 4.0], atol=1e-6)

    def test_constant_function(self):
        grad = finite_diff_grad(lambda x: 3.5, np.array([0.3, -0.7, 2.0]))
        np.testing.assert_allclose(grad, 0.0, atol=1e-12)

    def test_softmax_jacobian_row(self):
        # analytic: d softmax(x)[0] / dx = [p0(1-p0), -p0 p1] = [0.25, -0.25] at x=0
        grad = finite_diff_grad(lambda x: float(softmax(x)[0]), np.zeros(2))
        np.testing.assert_allclose(grad, [0.25, -0.25], atol=1e-6)

    def test_non_finite_evaluation_rejected(self):
        with pytest.raises(ValueError):
            finite_diff_grad(lambda x: float("nan"), np.ones(2))


class TestValidateProbDist:
    def test_accepts_valid(self):
        validate_prob_dist([0.2, 0.3, 0.5])

    @pytest.mark.parametrize("bad", [[0.5, 0.6], [-0.1, 1.1], [0.9], []])
    def test_rejects_invalid(self, bad):
        with pytest.raises(ValueError):
            validate_prob_dist(bad)
