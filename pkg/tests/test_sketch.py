import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levfp.sketch import (
    FeatureMatrix,
    LeverageProfile,
    SamplingDistribution,
    leverage_distribution,
    leverage_scores,
    norm_squared_distribution,
    orthonormal_column_basis,
    row_sample,
    top_t_features,
)


def test_basis_identity():
    basis, rank = orthonormal_column_basis(FeatureMatrix(np.eye(3)))
    assert rank == 3
    assert np.allclose(np.abs(basis) @ np.abs(basis).T, np.eye(3), atol=1e-12)


def test_basis_single_column():
    basis, rank = orthonormal_column_basis(FeatureMatrix(np.array([[1.0], [2.0], [2.0]])))
    assert rank == 1
    expected = np.array([[1 / 3], [2 / 3], [2 / 3]])
    assert np.allclose(np.abs(basis), expected, atol=1e-12)
    assert abs(float((basis.T @ basis)[0, 0]) - 1.0) < 1e-12


def test_basis_rank_deficient():
    a = FeatureMatrix(np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]]))
    _, rank = orthonormal_column_basis(a)
    assert rank == 1


def test_basis_orthonormality_random():
    rng = np.random.default_rng(0)
    a = FeatureMatrix(rng.standard_normal((40, 7)))
    basis, rank = orthonormal_column_basis(a)
    assert rank == 7
    assert np.max(np.abs(basis.T @ basis - np.eye(7))) < 1e-8


def test_basis_zero_matrix():
    with pytest.raises(ValueError, match="zero matrix"):
        orthonormal_column_basis(FeatureMatrix(np.zeros((3, 2))))


def test_leverage_identity():
    profile = leverage_scores(FeatureMatrix(np.eye(3)))
    assert np.allclose(profile.scores, [1.0, 1.0, 1.0])
    assert profile.rank == 3


def test_leverage_single_column():
    profile = leverage_scores(FeatureMatrix(np.array([[1.0], [2.0], [2.0]])))
    assert np.allclose(profile.scores, [1 / 9, 4 / 9, 4 / 9], atol=1e-12)
    assert profile.rank == 1


def test_leverage_zero_row():
    profile = leverage_scores(FeatureMatrix(np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])))
    assert np.allclose(profile.scores, [1.0, 1.0, 0.0], atol=1e-12)


def test_leverage_sum_equals_rank():
    rng = np.random.default_rng(1)
    for _ in range(10):
        a = FeatureMatrix(rng.standard_normal((25, 4)))
        profile = leverage_scores(a)
        assert abs(profile.scores.sum() - profile.rank) < 1e-6
        assert np.all(profile.scores <= 1 + 1e-8)
        assert np.all(profile.scores >= 0)


def test_leverage_scale_invariance():
    rng = np.random.default_rng(2)
    a = rng.standard_normal((15, 3))
    base = leverage_scores(FeatureMatrix(a)).scores
    for c in (2.0, -0.5, 1e-3):
        scaled = leverage_scores(FeatureMatrix(c * a)).scores
        assert np.max(np.abs(scaled - base)) < 1e-10


def test_leverage_rotation_invariance():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((20, 5))
    q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
    base = leverage_scores(FeatureMatrix(a)).scores
    rotated = leverage_scores(FeatureMatrix(a @ q)).scores
    assert np.max(np.abs(rotated - base)) < 1e-8


def test_leverage_svd_oracle():
    # independent oracle: scores from numpy's full thin SVD
    rng = np.random.default_rng(4)
    for _ in range(20):
        a = rng.standard_normal((30, 6))
        u, s, _ = np.linalg.svd(a, full_matrices=False)
        r = int(np.count_nonzero(s > s[0] * 30 * np.finfo(float).eps))
        oracle = np.sum(u[:, :r] ** 2, axis=1)
        scores = leverage_scores(FeatureMatrix(a)).scores
        assert np.max(np.abs(scores - oracle)) < 1e-8


def test_norm_squared_single_nonzero_row():
    d = norm_squared_distribution(FeatureMatrix(np.array([[3.0, 4.0], [0.0, 0.0]])))
    assert np.allclose(d.probabilities, [1.0, 0.0])


def test_norm_squared_symmetric():
    d = norm_squared_distribution(FeatureMatrix(np.eye(2)))
    assert np.allclose(d.probabilities, [0.5, 0.5])


def test_norm_squared_derived():
    a = FeatureMatrix(np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]))
    d = norm_squared_distribution(a)
    assert np.allclose(d.probabilities, [1 / 14, 2 / 7, 9 / 14], atol=1e-12)


def test_norm_squared_zero_matrix():
    with pytest.raises(ValueError, match="zero mass"):
        norm_squared_distribution(FeatureMatrix(np.zeros((2, 2))))


def test_leverage_distribution_identity():
    d = leverage_distribution(FeatureMatrix(np.eye(3)))
    assert np.allclose(d.probabilities, [1 / 3, 1 / 3, 1 / 3])


def test_leverage_distribution_single_column():
    d = leverage_distribution(FeatureMatrix(np.array([[1.0], [2.0], [2.0]])))
    assert np.allclose(d.probabilities, [1 / 9, 4 / 9, 4 / 9], atol=1e-12)


def test_leverage_distribution_zero_row():
    d = leverage_distribution(FeatureMatrix(np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])))
    assert np.allclose(d.probabilities, [0.5, 0.5, 0.0], atol=1e-12)


def test_row_sample_degenerate_distribution():
    a = FeatureMatrix(np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]))
    p = SamplingDistribution(np.array([1.0, 0.0, 0.0]))
    sk = row_sample(a, 4, p, seed=0)
    assert np.all(sk.source_rows == 0)
    assert np.allclose(sk.values, 0.5 * np.tile(a.values[0], (4, 1)))


def test_row_sample_rescaling():
    a = FeatureMatrix(np.eye(2))
    p = SamplingDistribution(np.array([0.5, 0.5]))
    sk = row_sample(a, 1, p, seed=1)
    assert np.allclose(np.abs(sk.values).max(), np.sqrt(2))


def test_row_sample_deterministic():
    a = FeatureMatrix(np.random.default_rng(5).standard_normal((10, 3)))
    p = norm_squared_distribution(a)
    s1 = row_sample(a, 6, p, seed=99)
    s2 = row_sample(a, 6, p, seed=99)
    assert np.array_equal(s1.values, s2.values)
    assert np.array_equal(s1.source_rows, s2.source_rows)


def test_row_sample_length_mismatch():
    a = FeatureMatrix(np.eye(3))
    p = SamplingDistribution(np.array([0.5, 0.5]))
    with pytest.raises(ValueError, match="length"):
        row_sample(a, 2, p, seed=0)


def test_row_sample_unbiased_small():
    # quick unbiasedness check; the acceptance suite runs the full version
    rng = np.random.default_rng(6)
    a = FeatureMatrix(rng.standard_normal((12, 4)))
    p = norm_squared_distribution(a)
    target = a.values.T @ a.values
    grams = np.array([row_sample(a, 6, p, seed=k).gram() for k in range(2000)])
    err = np.abs(grams.mean(axis=0) - target)
    se = grams.std(axis=0) / np.sqrt(len(grams))
    assert np.all(err <= 5 * se + 1e-12)


def test_top_t_sorting():
    profile = LeverageProfile(scores=np.array([0.5, 0.9, 0.6]), rank=2)
    assert list(top_t_features(profile, 2)) == [1, 2]


def test_top_t_tie_break():
    profile = LeverageProfile(scores=np.array([0.4, 0.4, 0.4, 0.8]), rank=2)
    assert list(top_t_features(profile, 3)) == [3, 0, 1]


def test_top_t_full():
    profile = leverage_scores(FeatureMatrix(np.random.default_rng(7).standard_normal((8, 3))))
    assert list(top_t_features(profile, 8)) == list(profile.ranking)


def test_top_t_budget_exceeds():
    profile = leverage_scores(FeatureMatrix(np.eye(3)))
    with pytest.raises(ValueError, match="budget exceeds"):
        top_t_features(profile, 4)


def test_top_t_nesting():
    profile = leverage_scores(
        FeatureMatrix(np.random.default_rng(8).standard_normal((30, 5)))
    )
    prev = []
    for t in (1, 3, 7, 15, 30):
        cur = list(top_t_features(profile, t))
        assert cur[: len(prev)] == prev
        prev = cur


@settings(max_examples=25, deadline=None)
@given(
    m=st.integers(min_value=2, max_value=20),
    n=st.integers(min_value=1, max_value=6),
    seed=st.integers(min_value=0, max_value=10_000),
)
def test_leverage_properties_random(m, n, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((m, n))
    profile = leverage_scores(FeatureMatrix(a))
    assert abs(profile.scores.sum() - profile.rank) < 1e-6
    assert np.all(profile.scores >= 0)
    assert np.all(profile.scores <= 1 + 1e-8)
    # ranking is a permutation sorting scores non-increasingly
    ordered = profile.scores[profile.ranking]
    assert np.all(np.diff(ordered) <= 1e-15)
