import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mdmica.exceptions import InvalidAnglesError, InvalidIndexError, InvalidRotationError
from mdmica.rotation import (
    angle_planes,
    angles_from_rotation,
    block_slices,
    canonical_angles,
    check_rotation,
    dim_from_n_angles,
    givens,
    in_support,
    n_angles,
    rotation_from_angles,
    support_upper,
    wrap_angles,
)

from oracles import givens_literal, matmul_literal


def random_support_angles(rng, d, margin=0.0):
    upper = support_upper(d)
    return margin + rng.random(n_angles(d)) * (upper - 2 * margin)


class TestCounting:
    @pytest.mark.parametrize("d, p", [(2, 1), (3, 3), (4, 6), (7, 21)])
    def test_n_angles_roundtrip(self, d, p):
        assert n_angles(d) == p
        assert dim_from_n_angles(p) == d

    @pytest.mark.parametrize("p", [0, 2, 4, 5])
    def test_non_triangular(self, p):
        with pytest.raises(InvalidAnglesError):
            dim_from_n_angles(p)

    def test_planes_and_blocks(self):
        assert angle_planes(4) == [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
        assert [(s.start, s.stop) for s in block_slices(4)] == [(0, 3), (3, 5), (5, 6)]
        np.testing.assert_array_equal(support_upper(3), [2 * np.pi, 2 * np.pi, np.pi])


class TestGivens:
    def test_zero_angle_is_identity(self):
        np.testing.assert_array_equal(givens(2, 0, 1, 0.0), np.eye(2))

    def test_quarter_turn(self):
        np.testing.assert_allclose(givens(2, 0, 1, np.pi / 2), [[0, -1], [1, 0]], atol=1e-16)

    def test_three_dim_plane(self):
        G = givens(3, 0, 2, np.pi / 4)
        h = math.sqrt(2) / 2
        np.testing.assert_allclose(G, [[h, 0, -h], [0, 1, 0], [h, 0, h]], atol=1e-16)

    @pytest.mark.parametrize("i, j", [(1, 1), (2, 1), (-1, 1), (0, 3)])
    def test_bad_indices(self, i, j):
        with pytest.raises(InvalidIndexError):
            givens(3, i, j, 0.1)

    def test_matches_literal(self):
        np.testing.assert_allclose(givens(5, 1, 3, 0.7), givens_literal(5, 1, 3, 0.7),
                                   atol=0, rtol=0)


class TestRotationFromAngles:
    def test_zero_angles(self):
        np.testing.assert_array_equal(rotation_from_angles(np.zeros(6)), np.eye(4))

    def test_single_factor(self):
        np.testing.assert_allclose(rotation_from_angles([np.pi / 2]), [[0, -1], [1, 0]],
                                   atol=1e-16)

    def test_triple_product_oracle(self):
        # W = Q[1,2](2.0) Q[0,2](1.1) Q[0,1](0.3)
        expected = matmul_literal(givens_literal(3, 1, 2, 2.0),
                                  matmul_literal(givens_literal(3, 0, 2, 1.1),
                                                 givens_literal(3, 0, 1, 0.3)))
        np.testing.assert_allclose(rotation_from_angles([0.3, 1.1, 2.0]), expected,
                                   atol=1e-12, rtol=0)

    @pytest.mark.parametrize("d", [2, 3, 4, 5, 6])
    def test_orthogonal_det_one(self, d):
        rng = np.random.default_rng(d)
        for _ in range(50):
            W = rotation_from_angles(random_support_angles(rng, d))
            np.testing.assert_allclose(W @ W.T, np.eye(d), atol=1e-10)
            assert abs(np.linalg.det(W) - 1) < 1e-10

    @pytest.mark.parametrize("d", [3, 4, 5])
    def test_rows_depend_only_on_earlier_blocks(self, d):
        rng = np.random.default_rng(10 + d)
        theta = random_support_angles(rng, d)
        W = rotation_from_angles(theta)
        for k, sl in enumerate(block_slices(d)):
            pert = theta.copy()
            later = np.arange(theta.size) >= sl.stop
            pert[later] = random_support_angles(rng, d)[later]
            # rows 0..k are fixed by blocks 0..k
            np.testing.assert_array_equal(rotation_from_angles(pert)[:k + 1], W[:k + 1])

    def test_rejects_out_of_support(self):
        with pytest.raises(InvalidAnglesError):
            rotation_from_angles([0.1, 0.2, 3.5])
        with pytest.raises(InvalidAnglesError):
            rotation_from_angles([0.1, np.nan, 0.2])
        W = rotation_from_angles([0.1, 0.2, 3.5], check=False)
        np.testing.assert_allclose(W @ W.T, np.eye(3), atol=1e-12)


class TestAnglesFromRotation:
    def test_identity(self):
        np.testing.assert_array_equal(angles_from_rotation(np.eye(5)), np.zeros(10))

    def test_quarter_turn(self):
        np.testing.assert_allclose(angles_from_rotation(np.array([[0.0, -1.0], [1.0, 0.0]])),
                                   [np.pi / 2], atol=1e-15)

    @pytest.mark.parametrize("d", [2, 3, 4])
    def test_round_trip_interior(self, d):
        rng = np.random.default_rng(100 + d)
        for _ in range(100):
            theta = random_support_angles(rng, d, margin=1e-3)
            back = angles_from_rotation(rotation_from_angles(theta))
            np.testing.assert_allclose(back, theta, atol=1e-8, rtol=0)

    def test_rejects_non_rotations(self):
        with pytest.raises(InvalidRotationError):
            angles_from_rotation(np.diag([1.0, -1.0]))
        with pytest.raises(InvalidRotationError):
            angles_from_rotation(np.array([[1.0, 0.1], [0.0, 1.0]]))
        with pytest.raises(InvalidRotationError):
            check_rotation(np.eye(3)[:2])

    def test_degenerate_gimbal_point(self):
        # middle angle at pi/2 leaves the first-row split non-unique
        W = rotation_from_angles([0.4, np.pi / 2, 0.9])
        theta = angles_from_rotation(W)
        assert in_support(theta)
        np.testing.assert_allclose(rotation_from_angles(theta), W, atol=1e-8)

    def test_signed_permutation_rotation(self):
        P = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        theta = angles_from_rotation(P)
        assert in_support(theta)
        np.testing.assert_allclose(rotation_from_angles(theta), P, atol=1e-8)


class TestWrapping:
    def test_wrap_keeps_rotation(self):
        theta = np.array([-0.3, 7.0, 12.5])
        np.testing.assert_allclose(rotation_from_angles(wrap_angles(theta), check=False),
                                   rotation_from_angles(theta, check=False), atol=1e-12)
        assert np.all((wrap_angles(theta) >= 0) & (wrap_angles(theta) < 2 * np.pi))

    def test_wrap_tiny_negative(self):
        assert wrap_angles(np.array([-1e-300]))[0] == 0.0

    @settings(max_examples=60, deadline=None)
    @given(st.integers(2, 5), st.integers(0, 2 ** 32 - 1))
    def test_canonical_angles_any_real(self, d, seed):
        rng = np.random.default_rng(seed)
        theta = rng.uniform(-20, 20, n_angles(d))
        canon = canonical_angles(theta)
        assert in_support(canon)
        np.testing.assert_allclose(rotation_from_angles(canon),
                                   rotation_from_angles(theta, check=False), atol=1e-8)
