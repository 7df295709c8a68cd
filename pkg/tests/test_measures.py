import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.distance import pdist

from mdmica.exceptions import DegenerateBandwidthError, InsufficientSampleError, ShapeError
from mdmica.measures import (
    GroupedSample,
    MeasureKind,
    dcov_sq,
    dcov_sq_terms,
    dhsic,
    evaluate,
    median_bandwidths,
    mdm_asym,
    mdm_comp_star,
    mdm_sym,
    shifted_sample,
)

from oracles import asym_oracle, comp_star_oracle, dcov_sq_triple, dhsic_oracle, sym_oracle

ALL = ("asym", "sym", "comp", "hsic")


def measure_abs(X, tag, bandwidth="median"):
    return abs(evaluate(X, MeasureKind(tag, bandwidth)))


class TestDcov:
    def test_two_point_example(self):
        X = np.array([[0.0, 0.0], [1.0, 1.0]])
        assert dcov_sq(X) == pytest.approx(0.25, abs=1e-15)
        assert dcov_sq_triple(X[:, :1], X[:, 1:]) == pytest.approx(0.25, abs=1e-15)

    def test_constant(self):
        assert dcov_sq(np.ones((7, 2))) == 0.0

    def test_triple_sum_oracle(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((12, 2))
        assert abs(dcov_sq(X) - dcov_sq_triple(X[:, :1], X[:, 1:])) < 1e-12

    def test_vector_blocks(self):
        rng = np.random.default_rng(1)
        X = rng.standard_normal((10, 5))
        groups = [(0, 3), (1, 2, 4)]
        expected = dcov_sq_triple(X[:, [0, 3]], X[:, [1, 2, 4]])
        assert abs(dcov_sq(X, groups) - expected) < 1e-12

    def test_needs_two_blocks(self):
        with pytest.raises(ShapeError):
            dcov_sq(np.random.default_rng(0).standard_normal((5, 3)))

    def test_needs_two_rows(self):
        with pytest.raises(InsufficientSampleError):
            dcov_sq(np.zeros((1, 2)))

    def test_scale_equivariance(self):
        rng = np.random.default_rng(2)
        X = rng.standard_normal((40, 2))
        a, c = -2.5, 0.3
        scaled = X * [a, c]
        np.testing.assert_allclose(dcov_sq(scaled), abs(a) * abs(c) * dcov_sq(X), rtol=1e-10)

    def test_bad_groups(self):
        with pytest.raises(ShapeError):
            GroupedSample(np.zeros((4, 3)), [(0,), (0, 1)])


class TestSumMeasures:
    @pytest.mark.parametrize("d", [3, 4])
    def test_asym_oracle(self, d):
        X = np.random.default_rng(d).standard_normal((12, d))
        assert abs(mdm_asym(X) - asym_oracle(X)) < 1e-12

    @pytest.mark.parametrize("d", [3, 4])
    def test_sym_oracle(self, d):
        X = np.random.default_rng(10 + d).standard_normal((12, d))
        assert abs(mdm_sym(X) - sym_oracle(X)) < 1e-12

    def test_d2_identities(self):
        X = np.random.default_rng(3).standard_normal((30, 2))
        assert abs(mdm_asym(X) - dcov_sq(X)) < 1e-12
        assert abs(mdm_sym(X) - 2 * dcov_sq(X)) < 1e-12

    def test_terms_are_dcov_of_splits(self):
        X = np.random.default_rng(4).standard_normal((11, 3))
        terms = dcov_sq_terms(X, symmetric=True)
        assert abs(terms[1] - dcov_sq_triple(X[:, [1]], X[:, [0, 2]])) < 1e-12

    @pytest.mark.parametrize("fn", [mdm_asym, mdm_sym, mdm_comp_star])
    def test_constant(self, fn):
        assert fn(np.full((6, 3), 2.5)) == 0.0


class TestCompStar:
    def test_shifted_rows(self):
        X = np.arange(12.0).reshape(4, 3)
        S = shifted_sample(X)
        np.testing.assert_array_equal(S[0], [X[0, 0], X[1, 1], X[2, 2]])
        np.testing.assert_array_equal(S[3], [X[3, 0], X[0, 1], X[1, 2]])

    def test_two_point_oracle(self):
        X = np.array([[0.0, 0.0], [1.0, 1.0]])
        assert abs(mdm_comp_star(X) - comp_star_oracle(X)) < 1e-12

    @pytest.mark.parametrize("seed", range(3))
    def test_random_oracle(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((13, 3))
        assert abs(mdm_comp_star(X) - comp_star_oracle(X)) < 1e-12

    def test_grouped_oracle(self):
        rng = np.random.default_rng(7)
        X = rng.standard_normal((9, 4))
        groups = [(0, 1), (2,), (3,)]
        assert abs(mdm_comp_star(X, groups) - comp_star_oracle(X, groups)) < 1e-12

    def test_cyclic_row_shift_invariance(self):
        # the shift pairs row k with rows k+j, so only cyclic row shifts keep it
        X = np.random.default_rng(8).standard_normal((25, 3))
        assert abs(mdm_comp_star(np.roll(X, 7, axis=0)) - mdm_comp_star(X)) < 1e-12

    def test_energy_distance_nonnegative(self):
        # an energy distance between two empirical laws; only round-off can
        # take it below zero, and it is reported unclamped
        rng = np.random.default_rng(9)
        values = [mdm_comp_star(rng.standard_normal((30, 2))) for _ in range(40)]
        assert min(values) > -1e-12


class TestDhsic:
    def test_literal_oracle(self):
        X = np.random.default_rng(0).standard_normal((10, 3))
        assert abs(dhsic(X, 1.0) - dhsic_oracle(X, 1.0)) < 1e-12

    def test_median_bandwidth(self):
        X = np.random.default_rng(1).standard_normal((15, 3))
        sig = median_bandwidths(X)
        for j in range(3):
            diffs = np.abs(X[:, j][:, None] - X[:, j][None, :])[np.triu_indices(15, 1)]
            assert sig[j] == np.median(diffs)
        assert abs(dhsic(X) - dhsic_oracle(X, sig)) < 1e-12

    def test_median_ignores_zero_distances(self):
        x = np.array([0.0, 0.0, 0.0, 1.0, 3.0])
        X = np.column_stack([x, np.arange(5.0)])
        # nonzero distances of x: 1, 1, 1, 3, 3, 3, 2
        assert median_bandwidths(X)[0] == 2.0

    def test_vector_block_median(self):
        X = np.random.default_rng(2).standard_normal((12, 3))
        sig = median_bandwidths(X, [(0, 1), (2,)])
        assert sig[0] == np.median(pdist(X[:, :2]))

    def test_constant_explicit_bandwidth(self):
        assert dhsic(np.ones((5, 3)), [1.0, 2.0, 0.5]) == 0.0

    def test_degenerate_bandwidth(self):
        X = np.column_stack([np.ones(6), np.arange(6.0)])
        with pytest.raises(DegenerateBandwidthError) as info:
            dhsic(X)
        assert info.value.component == 0

    @pytest.mark.parametrize("bw", [0.0, -1.0, np.inf, [1.0, 0.0]])
    def test_bad_bandwidths(self, bw):
        with pytest.raises(ValueError):
            MeasureKind("hsic", bw)


class TestMeasureKind:
    def test_dispatch(self):
        X = np.random.default_rng(3).standard_normal((20, 3))
        assert MeasureKind("asym")(X) == mdm_asym(X)
        assert MeasureKind("sym")(X) == mdm_sym(X)
        assert MeasureKind("comp")(X) == mdm_comp_star(X)
        assert MeasureKind("hsic", 0.7)(X) == dhsic(X, 0.7)

    def test_unknown(self):
        with pytest.raises(ValueError):
            MeasureKind("complete")


class TestInvariances:
    @pytest.mark.parametrize("tag", ["asym", "sym", "hsic"])
    def test_row_permutation(self, tag):
        rng = np.random.default_rng(11)
        X = rng.standard_normal((40, 3))
        perm = rng.permutation(40)
        assert abs(evaluate(X[perm], tag) - evaluate(X, tag)) < 1e-12

    @pytest.mark.parametrize("tag", ALL)
    def test_translation(self, tag):
        rng = np.random.default_rng(12)
        X = rng.standard_normal((40, 3))
        assert abs(evaluate(X + [3.0, -1.0, 0.5], tag) - evaluate(X, tag)) < 1e-12

    @pytest.mark.parametrize("tag", ALL)
    def test_deterministic(self, tag):
        X = np.random.default_rng(13).standard_normal((200, 3))
        assert evaluate(X, tag) == evaluate(X.copy(), tag)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 15), st.integers(2, 4), st.integers(0, 2 ** 32 - 1))
    def test_oracles_random_shapes(self, n, d, seed):
        X = np.random.default_rng(seed).standard_normal((n, d))
        assert abs(mdm_asym(X) - asym_oracle(X)) < 1e-12
        assert abs(mdm_sym(X) - sym_oracle(X)) < 1e-12
        assert abs(mdm_comp_star(X) - comp_star_oracle(X)) < 1e-12
        assert abs(dhsic(X, 0.8) - dhsic_oracle(X, 0.8)) < 1e-12

    @settings(max_examples=30, deadline=None)
    @given(st.integers(3, 30), st.integers(0, 2 ** 32 - 1))
    def test_nonnegative(self, n, seed):
        X = np.random.default_rng(seed).standard_normal((n, 3))
        assert mdm_asym(X) >= 0 and mdm_sym(X) >= 0 and dhsic(X, 1.0) >= 0


class TestStatisticalBehaviour:
    @pytest.mark.parametrize("tag", ALL)
    def test_detects_perfect_dependence(self, tag):
        rng = np.random.default_rng(20)
        x1, x2 = rng.standard_normal((2, 500))
        dep = measure_abs(np.column_stack([x1, x1]), tag)
        ind = measure_abs(np.column_stack([x1, x2]), tag)
        assert dep >= 10 * ind

    @pytest.mark.slow
    def test_consistency_under_independence(self):
        wins = dict.fromkeys(ALL, 0)
        for seed in range(50):
            X = np.random.default_rng(seed).standard_normal((4000, 3))
            for tag in ALL:
                wins[tag] += measure_abs(X, tag) < measure_abs(X[:250], tag)
        assert all(w >= 40 for w in wins.values()), wins
