import math

import numpy as np
import pytest

from tempalign import (
    ContractViolationError,
    ParameterError,
    dtw,
    dtw_bruteforce,
    make_rng,
    pairwise_sq_dist,
    soft_dtw,
    soft_dtw_embedding_grad,
    soft_dtw_grad,
)
from conftest import central_diff, fd_close


def valid_path(steps, n, m):
    if steps[0] != (1, 1) or steps[-1] != (n, m):
        return False
    for (i0, j0), (i1, j1) in zip(steps, steps[1:]):
        if (i1 - i0, j1 - j0) not in ((1, 0), (0, 1), (1, 1)):
            return False
    return True


class TestDtw:
    def test_all_zeros(self):
        res = dtw(np.zeros((4, 5)))
        assert res.value == 0.0
        assert valid_path(res.path.steps, 4, 5)

    def test_single_row_path_forced(self):
        res = dtw(np.array([[0.0, 1.0, 4.0]]))
        assert res.value == 5.0
        assert res.path.steps == ((1, 1), (1, 2), (1, 3))

    def test_two_by_three(self):
        res = dtw(np.array([[0.0, 1.0, 4.0], [4.0, 1.0, 0.0]]))
        assert res.value == 1.0  # brute-force enumerated optimum

    def test_path_cost_achieves_value(self, rng):
        for _ in range(30):
            d = rng.random((int(rng.integers(1, 8)), int(rng.integers(1, 8))))
            res = dtw(d)
            assert res.path.cost(d) == pytest.approx(res.value, abs=1e-12)
            assert valid_path(res.path.steps, *d.shape)

    def test_transpose_symmetry(self, rng):
        d = rng.random((5, 7))
        assert dtw(d).value == pytest.approx(dtw(d.T).value, abs=1e-12)

    def test_identity_self_alignment(self, rng):
        a = rng.normal(size=(6, 3))
        res = dtw(pairwise_sq_dist(a, a))
        assert res.value == 0.0
        assert res.path.cost(pairwise_sq_dist(a, a)) == 0.0

    def test_empty_rejected(self):
        with pytest.raises(ContractViolationError):
            dtw(np.zeros((0, 3)))

    def test_tie_break_prefers_diagonal(self):
        res = dtw(np.zeros((3, 3)))
        assert res.path.steps == ((1, 1), (2, 2), (3, 3))


class TestBruteForce:
    def test_known_matrix(self):
        assert dtw_bruteforce(np.array([[0.0, 1.0, 4.0], [4.0, 1.0, 0.0]])) == 1.0

    def test_one_by_one(self):
        assert dtw_bruteforce(np.array([[3.5]])) == 3.5

    def test_cross_check_with_dp(self, rng):
        for _ in range(120):
            n, m = int(rng.integers(1, 7)), int(rng.integers(1, 7))
            d = rng.random((n, m))
            assert abs(dtw(d).value - dtw_bruteforce(d)) <= 1e-12

    def test_size_limit(self):
        with pytest.raises(ParameterError):
            dtw_bruteforce(np.zeros((8, 8)))


class TestSoftDtw:
    def test_zero_matrix_bracket(self):
        for gamma in (1.0, 0.1, 0.01):
            val = soft_dtw(np.zeros((4, 6)), gamma).value
            assert -gamma * math.log(3) * 10 <= val <= 0.0

    def test_approaches_hard_dtw(self):
        d = np.array([[0.0, 1.0, 4.0], [4.0, 1.0, 0.0]])
        assert abs(soft_dtw(d, 0.001).value - dtw_bruteforce(d)) < 0.01

    def test_strictly_below_dtw_with_multiple_paths(self, rng):
        d = rng.random((10, 10))
        assert soft_dtw(d, 0.1).value < dtw(d).value

    def test_bracket_random(self, rng):
        for _ in range(25):
            d = rng.random((6, 9)) * 3
            hard = dtw(d).value
            for gamma in (1.0, 0.1, 0.01):
                val = soft_dtw(d, gamma).value
                assert hard - gamma * math.log(3) * 15 - 1e-12 <= val <= hard + 1e-12

    def test_monotone_in_gamma(self, rng):
        d = rng.random((7, 5))
        values = [soft_dtw(d, g).value for g in (0.01, 0.1, 0.5, 1.0, 2.0)]
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_transpose_symmetry(self, rng):
        d = rng.random((5, 8))
        assert soft_dtw(d, 0.1).value == pytest.approx(soft_dtw(d.T, 0.1).value, rel=1e-12)

    def test_normalize_flag(self, rng):
        d = rng.random((4, 6))
        raw = soft_dtw(d, 0.1).value
        assert soft_dtw(d, 0.1, normalize=True).value == pytest.approx(raw / 10)

    def test_bad_gamma(self):
        with pytest.raises(ParameterError):
            soft_dtw(np.ones((2, 2)), 0.0)


class TestSoftDtwGrad:
    def test_corners_are_one(self, rng):
        d = rng.random((6, 4))
        g = soft_dtw_grad(d, 0.1).grad_d
        assert g[0, 0] == pytest.approx(1.0, abs=1e-9)
        assert g[-1, -1] == pytest.approx(1.0, abs=1e-9)

    def test_single_row_all_ones(self):
        g = soft_dtw_grad(np.array([[1.0, 2.0, 0.5, 3.0]]), 0.1).grad_d
        assert np.allclose(g, 1.0, atol=1e-12)

    def test_entries_in_unit_interval(self, rng):
        g = soft_dtw_grad(rng.random((8, 8)), 0.05).grad_d
        assert g.min() >= 0.0 and g.max() <= 1.0

    def test_matches_finite_differences(self, rng):
        for _ in range(5):
            d = rng.random((5, 7))
            analytic = soft_dtw_grad(d, 0.1).grad_d
            fd = central_diff(lambda m: soft_dtw(m, 0.1).value, d)
            assert fd_close(analytic, fd)

    def test_value_matches_soft_dtw(self, rng):
        d = rng.random((5, 5))
        assert soft_dtw_grad(d, 0.2).value == soft_dtw(d, 0.2).value


class TestEmbeddingGrad:
    def test_single_frame_pair(self):
        x = np.array([[1.0, 2.0, 0.0]])
        y = np.array([[0.0, 1.0, 1.0]])
        gx, gy, value = soft_dtw_embedding_grad(x, y, 0.1)
        assert np.allclose(gx, 2 * (x - y))
        assert np.allclose(gy, 2 * (y - x))
        assert value == pytest.approx(pairwise_sq_dist(x, y)[0, 0])

    def test_matches_finite_differences(self, rng):
        x = rng.normal(size=(4, 3))
        y = rng.normal(size=(5, 3))
        gx, gy, _ = soft_dtw_embedding_grad(x, y, 0.1)
        fd_x = central_diff(lambda m: soft_dtw_embedding_grad(m, y, 0.1)[2], x)
        fd_y = central_diff(lambda m: soft_dtw_embedding_grad(x, m, 0.1)[2], y)
        assert fd_close(gx, fd_x)
        assert fd_close(gy, fd_y)

    def test_identical_sequences(self, rng):
        x = rng.normal(size=(5, 2))
        gx, gy, value = soft_dtw_embedding_grad(x, x.copy(), 0.1)
        assert value <= 0.0  # self-alignment cost is bracketed below zero
        fd_x = central_diff(lambda m: soft_dtw_embedding_grad(m, x, 0.1)[2], x.copy())
        assert fd_close(gx, fd_x)

    def test_dim_mismatch(self, rng):
        with pytest.raises(ContractViolationError):
            soft_dtw_embedding_grad(rng.normal(size=(3, 2)), rng.normal(size=(3, 4)), 0.1)
