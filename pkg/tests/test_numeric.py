import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tempalign import ContractViolationError, ParameterError, make_rng, pairwise_sq_dist, softmin, softmin_weights

finite_floats = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)
value_lists = st.lists(finite_floats, min_size=1, max_size=8)
gammas = st.floats(min_value=1e-6, max_value=100.0, allow_nan=False)


class TestSoftmin:
    def test_single_element_is_identity(self):
        assert softmin([3.7], 0.5) == 3.7

    def test_two_zeros_gamma_one_is_minus_ln2(self):
        # frozen high-precision value of -ln(2)
        assert softmin([0.0, 0.0], 1.0) == pytest.approx(-0.6931471805599453, abs=1e-15)

    def test_three_values_small_gamma(self):
        # frozen from a 50-digit evaluation of the defining formula
        got = softmin([1.0, 2.0, 3.0], 0.1)
        assert got == pytest.approx(0.9999954599039723, abs=1e-14)
        assert 1.0 - 0.1 * math.log(3) <= got <= 1.0

    def test_empty_rejected(self):
        with pytest.raises(ContractViolationError):
            softmin([], 1.0)

    def test_non_finite_rejected(self):
        with pytest.raises(ContractViolationError):
            softmin([1.0, float("nan")], 1.0)

    @pytest.mark.parametrize("gamma", [0.0, -1.0, float("nan")])
    def test_bad_gamma_rejected(self, gamma):
        with pytest.raises(ParameterError):
            softmin([1.0], gamma)

    def test_tiny_gamma_falls_back_to_hard_min(self):
        assert softmin([4.0, 2.0, 9.0], 1e-12) == 2.0

    @given(values=value_lists, gamma=gammas)
    @settings(max_examples=200)
    def test_bracket(self, values, gamma):
        got = softmin(values, gamma)
        lo = min(values) - gamma * math.log(len(values))
        assert lo - 1e-9 <= got <= min(values) + 1e-9

    @given(values=value_lists, gamma=gammas, bump=st.floats(min_value=0, max_value=10))
    @settings(max_examples=200)
    def test_monotone_in_values(self, values, gamma, bump):
        bigger = [v + bump for v in values]
        assert softmin(values, gamma) <= softmin(bigger, gamma) + 1e-9

    @given(values=value_lists)
    @settings(max_examples=100)
    def test_gamma_to_zero_limit(self, values):
        slack = 1e-12 * max(1.0, abs(min(values)))  # representation error at the value's scale
        for gamma in (1e-1, 1e-3, 1e-6):
            assert abs(softmin(values, gamma) - min(values)) <= gamma * math.log(len(values)) + slack


class TestSoftminWeights:
    def test_symmetric_pair(self):
        assert softmin_weights([0.0, 0.0], 1.0).tolist() == [0.5, 0.5]

    def test_single_element(self):
        assert softmin_weights([42.0], 2.0).tolist() == [1.0]

    def test_dominant_minimum(self):
        w = softmin_weights([0.0, 10.0], 0.1)
        assert w[0] == pytest.approx(1.0, abs=1e-40)
        assert w[1] < 1e-40  # frozen oracle: exp(-100) ~ 3.72e-44

    def test_errors_match_softmin(self):
        with pytest.raises(ContractViolationError):
            softmin_weights([], 1.0)
        with pytest.raises(ParameterError):
            softmin_weights([1.0], -0.1)

    @given(values=value_lists, gamma=gammas)
    @settings(max_examples=200)
    def test_normalized_and_bounded(self, values, gamma):
        w = softmin_weights(values, gamma)
        assert abs(w.sum() - 1.0) < 1e-12
        assert np.all(w >= 0) and np.all(w <= 1)

    def test_weights_are_softmin_derivative(self):
        values = np.array([0.3, 1.2, 0.9, 2.0])
        gamma = 0.7
        w = softmin_weights(values, gamma)
        eps = 1e-7
        for k in range(len(values)):
            bumped = values.copy()
            bumped[k] += eps
            dropped = values.copy()
            dropped[k] -= eps
            fd = (softmin(bumped, gamma) - softmin(dropped, gamma)) / (2 * eps)
            assert fd == pytest.approx(w[k], rel=1e-6, abs=1e-9)


class TestPairwiseSqDist:
    def test_self_distance_diagonal_zero(self, rng):
        a = rng.normal(size=(5, 3))
        d = pairwise_sq_dist(a, a)
        assert np.all(np.diag(d) == 0.0)
        assert np.all(d >= 0)

    def test_orthogonal_unit_vectors(self):
        a = np.array([[1.0, 0.0]])
        b = np.array([[0.0, 1.0]])
        assert pairwise_sq_dist(a, b)[0, 0] == 2.0

    def test_matches_naive_double_loop(self, rng):
        a = rng.normal(size=(3, 2))
        b = rng.normal(size=(4, 2))
        d = pairwise_sq_dist(a, b)
        for i in range(3):
            for j in range(4):
                expected = 0.0
                for c in range(2):
                    expected += (a[i, c] - b[j, c]) ** 2
                assert d[i, j] == expected

    def test_transpose_symmetry(self, rng):
        a = rng.normal(size=(6, 4))
        b = rng.normal(size=(3, 4))
        assert np.array_equal(pairwise_sq_dist(a, b), pairwise_sq_dist(b, a).T)

    def test_dim_mismatch_rejected(self, rng):
        with pytest.raises(ContractViolationError):
            pairwise_sq_dist(rng.normal(size=(3, 2)), rng.normal(size=(3, 5)))


class TestRng:
    def test_identical_seed_identical_stream(self):
        a = make_rng(123, 7).random(16)
        b = make_rng(123, 7).random(16)
        assert np.array_equal(a, b)

    def test_distinct_salts_distinct_streams(self):
        assert not np.array_equal(make_rng(1, 0).random(8), make_rng(1, 1).random(8))
