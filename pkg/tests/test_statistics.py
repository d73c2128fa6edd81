"""Unit tests for services/statistics.py"""
import numpy as np
import pytest

from truewalks.core.errors import EvaluationError
from truewalks.services.statistics import prf_weighted, wilcoxon_signed_rank, wilcoxon_test


class TestWilcoxon:
    """Paired two-sided signed-rank test."""

    def test_identical_samples(self):
        result = wilcoxon_test([0.5, 0.6, 0.7], [0.5, 0.6, 0.7])
        assert result.p_value == 1.0
        assert result.n == 0

    @pytest.mark.parametrize("n", range(5, 13))
    def test_all_differences_positive(self, n):
        a = np.arange(1, n + 1, dtype=float) + 10.0
        b = np.full(n, 10.0)
        result = wilcoxon_test(a, b)
        assert result.method == "exact"
        assert result.statistic == n * (n + 1) / 2
        assert result.p_value == pytest.approx(2.0 / 2 ** n)

    def test_exact_and_normal_agree_at_twelve(self):
        diffs = np.array([1, -2, 3, 4, -5, 6, 7, -8, 9, 10, -11, 12], dtype=float)
        exact = wilcoxon_test(diffs, np.zeros(12), method="exact")
        approx = wilcoxon_test(diffs, np.zeros(12), method="approx")
        assert abs(exact.p_value - approx.p_value) < 0.02

    @pytest.mark.parametrize("n, seed", [(12, s) for s in range(10)])
    def test_exact_and_normal_agree_on_random_samples(self, n, seed):
        rng = np.random.default_rng(seed)
        a, b = rng.normal(0.2, 1.0, n), rng.normal(0.0, 1.0, n)
        exact = wilcoxon_test(a, b, method="exact")
        approx = wilcoxon_test(a, b, method="approx")
        assert abs(exact.p_value - approx.p_value) < 0.02

    @pytest.mark.parametrize("n", [10, 20])
    def test_p_value_falls_as_shift_grows(self, n):
        """Symmetric noise plus a growing shift: the p-value never goes back up."""
        rng = np.random.default_rng(n)
        half = rng.normal(size=n // 2)
        noise = np.concatenate([half, -half])
        p_values = [wilcoxon_signed_rank(noise + shift, np.zeros(n)) for shift in (0.0, 0.2, 0.5, 1.0, 2.0, 4.0)]
        assert p_values[0] == pytest.approx(1.0)
        assert all(later <= earlier + 1e-12 for earlier, later in zip(p_values, p_values[1:]))
        assert p_values[-1] < 0.01

    def test_symmetric_in_arguments(self):
        rng = np.random.default_rng(9)
        a, b = rng.random(15), rng.random(15)
        assert wilcoxon_signed_rank(a, b) == pytest.approx(wilcoxon_signed_rank(b, a))

    def test_large_samples_use_normal_approximation(self):
        rng = np.random.default_rng(2)
        a = rng.random(30) + 0.2
        result = wilcoxon_test(a, rng.random(30))
        assert result.method == "approx"
        assert 0.0 <= result.p_value <= 1.0

    def test_zero_differences_are_dropped(self):
        result = wilcoxon_test([1.0, 2.0, 3.0, 5.0, 6.0], [1.0, 1.0, 1.0, 1.0, 1.0])
        assert result.n == 4

    def test_length_mismatch(self):
        with pytest.raises(EvaluationError):
            wilcoxon_test([1.0, 2.0], [1.0])

    def test_exact_refused_for_many_pairs(self):
        with pytest.raises(EvaluationError):
            wilcoxon_test(np.arange(1.0, 26.0), np.zeros(25), method="exact")


class TestPrf:
    """Precision, recall and support-weighted F."""

    def test_worked_example(self):
        precision, recall, f = prf_weighted([1, 0, 1, 1], [1, 0, 0, 1])
        assert precision == pytest.approx(2 / 3)
        assert recall == pytest.approx(1.0)
        assert f == pytest.approx((0.8 * 2 + (2 / 3) * 2) / 4)

    def test_weighted_average(self):
        precision, recall, f = prf_weighted([1, 0, 1, 1], [1, 0, 0, 1], average="weighted")
        assert precision == pytest.approx((2 / 3 * 2 + 1.0 * 2) / 4)
        assert recall == pytest.approx(0.75)
        assert f == pytest.approx((0.8 * 2 + (2 / 3) * 2) / 4)

    def test_perfect_predictions(self):
        assert prf_weighted([0, 1, 1, 0], [0, 1, 1, 0]) == (1.0, 1.0, 1.0)

    def test_no_positive_predictions(self):
        precision, recall, _ = prf_weighted([0, 0, 0], [1, 0, 1])
        assert precision == 0.0 and recall == 0.0

    def test_empty_input(self):
        with pytest.raises(EvaluationError):
            prf_weighted([], [])

    def test_unknown_average(self):
        with pytest.raises(EvaluationError):
            prf_weighted([1], [1], average="macro")
