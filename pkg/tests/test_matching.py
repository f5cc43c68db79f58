import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pointkit import (
    Assignment,
    CostMatrix,
    DegenerateFeature,
    InvalidCost,
    alignment_loss,
    cosine_cost,
    hungarian,
)


def brute_force(values: np.ndarray):
    """All optimal permutations, totals accumulated left to right like the
    solver does, so equality comparisons are meaningful."""
    n = values.shape[0]
    best_total, best_perms = None, []
    for perm in itertools.permutations(range(n)):
        total = 0.0
        for i, j in enumerate(perm):
            total += float(values[i, j])
        if best_total is None or total < best_total:
            best_total, best_perms = total, [perm]
        elif total == best_total:
            best_perms.append(perm)
    return best_total, best_perms


class TestCosineCost:
    def test_orthonormal_identity(self):
        eye = np.eye(4)
        cost = cosine_cost(eye, eye)
        assert np.array_equal(cost.values, -np.eye(4))

    def test_positive_scale_invariance(self, rng):
        v = rng.normal(size=(6, 5))
        q = rng.normal(size=(6, 5))
        base = cosine_cost(v, q).values
        scales = rng.uniform(0.1, 10.0, size=6)
        scaled = cosine_cost(v * scales[:, None], q).values
        assert np.max(np.abs(scaled - base)) <= 1e-12

    def test_matches_direct_oracle(self, rng):
        v = rng.normal(size=(3, 4))
        q = rng.normal(size=(3, 4))
        got = cosine_cost(v, q).values
        for i in range(3):
            for j in range(3):
                expect = -np.dot(v[i], q[j]) / (np.linalg.norm(v[i]) * np.linalg.norm(q[j]))
                assert abs(got[i, j] - expect) <= 1e-12

    def test_zero_norm_rejected(self):
        with pytest.raises(DegenerateFeature):
            cosine_cost(np.array([[0.0, 0.0], [1.0, 0.0]]), np.eye(2))

    def test_shape_mismatch_rejected(self, rng):
        with pytest.raises(InvalidCost):
            cosine_cost(rng.normal(size=(3, 4)), rng.normal(size=(2, 4)))


class TestHungarian:
    def test_diagonal_optimum(self):
        a = hungarian(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert a.sigma == (0, 1) and a.total_cost == 0.0

    def test_antidiagonal_optimum(self):
        a = hungarian(np.array([[4.0, 1.0], [2.0, 3.0]]))
        assert a.sigma == (1, 0) and a.total_cost == 3.0

    def test_matches_bruteforce_random(self, rng):
        for _ in range(60):
            n = int(rng.integers(1, 8))
            values = rng.normal(size=(n, n))
            got = hungarian(values)
            best_total, best_perms = brute_force(values)
            assert got.total_cost == best_total
            assert got.sigma == min(best_perms)

    def test_lexicographic_tie_rule(self, rng):
        # small integer costs force many exactly optimal permutations
        for _ in range(40):
            n = int(rng.integers(2, 6))
            values = rng.integers(0, 3, size=(n, n)).astype(np.float64)
            got = hungarian(values)
            best_total, best_perms = brute_force(values)
            assert got.total_cost == best_total
            assert got.sigma == min(best_perms)

    def test_all_equal_costs(self):
        a = hungarian(np.ones((4, 4)))
        assert a.sigma == (0, 1, 2, 3)

    def test_row_shift_preserves_argmin_set(self, rng):
        values = rng.integers(0, 4, size=(5, 5)).astype(np.float64)
        _, before = brute_force(values)
        shifted = values.copy()
        shifted[2] += 11.0
        _, after = brute_force(shifted)
        assert before == after
        assert hungarian(values).sigma == hungarian(shifted).sigma

    def test_invalid_inputs(self):
        with pytest.raises(InvalidCost):
            hungarian(np.array([[np.inf, 0.0], [0.0, 1.0]]))
        with pytest.raises(InvalidCost):
            hungarian(np.zeros((2, 3)))
        with pytest.raises(InvalidCost):
            hungarian(np.zeros((0, 0)))

    def test_assignment_validation(self):
        with pytest.raises(Exception):
            Assignment((0, 0), 1.0)


class TestAlignmentLoss:
    def test_perfectly_aligned(self, rng):
        i_feats = rng.normal(size=(5, 4))
        q_feats = i_feats * rng.uniform(0.5, 2.0, size=(5, 1))
        loss, grad = alignment_loss(i_feats, q_feats, tuple(range(5)))
        assert abs(loss) <= 1e-12
        # gradient of 1 - cos at cos = 1 has no component along the query
        for g, q in zip(grad, q_feats):
            along = np.dot(g, q) / np.dot(q, q)
            assert abs(along) <= 1e-12

    def test_orthogonal_pair(self):
        loss, _ = alignment_loss(np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]]), (0,))
        assert loss == 1.0

    def test_finite_difference_gradient(self, rng):
        h = 1e-5
        for _ in range(30):
            n = int(rng.integers(1, 9))
            d = int(rng.integers(2, 17))
            i_feats = rng.normal(size=(n, d))
            q_feats = rng.normal(size=(n, d))
            sigma = tuple(rng.permutation(n).tolist())
            _, grad = alignment_loss(i_feats, q_feats, sigma)
            fd = np.zeros_like(q_feats)
            for r in range(n):
                for c in range(d):
                    plus = q_feats.copy()
                    minus = q_feats.copy()
                    plus[r, c] += h
                    minus[r, c] -= h
                    lp, _ = alignment_loss(i_feats, plus, sigma)
                    lm, _ = alignment_loss(i_feats, minus, sigma)
                    fd[r, c] = (lp - lm) / (2.0 * h)
            rel = np.linalg.norm(fd - grad) / max(np.linalg.norm(grad), 1e-12)
            assert rel <= 1e-4

    def test_loss_bounds(self, rng):
        n = 6
        i_feats = rng.normal(size=(n, 3))
        q_feats = rng.normal(size=(n, 3))
        loss, _ = alignment_loss(i_feats, q_feats, tuple(range(n)))
        assert 0.0 <= loss <= 2.0 * n

    def test_degenerate_rejected(self):
        with pytest.raises(DegenerateFeature):
            alignment_loss(np.zeros((1, 3)), np.ones((1, 3)), (0,))


@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_hungarian_not_worse_than_random_permutations(n, seed):
    rng = np.random.default_rng(seed)
    values = rng.normal(size=(n, n))
    total = hungarian(values).total_cost
    for _ in range(10):
        perm = rng.permutation(n)
        assert total <= float(np.sum(values[np.arange(n), perm])) + 1e-9


def test_cost_matrix_frozen(rng):
    cost = CostMatrix(rng.normal(size=(3, 3)))
    with pytest.raises(ValueError):
        cost.values[0, 0] = 5.0
