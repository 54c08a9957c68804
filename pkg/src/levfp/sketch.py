"""Row-subset selection for tall matrices.

Sampling distributions (norm-squared and leverage based), randomized
sketch construction with unbiased rescaling, and deterministic
top-t feature selection from leverage scores.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "FeatureMatrix",
    "SamplingDistribution",
    "SketchMatrix",
    "LeverageProfile",
    "orthonormal_column_basis",
    "leverage_scores",
    "norm_squared_distribution",
    "leverage_distribution",
    "row_sample",
    "top_t_features",
]

_PROB_SUM_TOL = 1e-10


def _as_matrix(values) -> np.ndarray:
    a = np.asarray(values, dtype=float)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError("expected a nonempty 2-D matrix")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    return a


@dataclass(frozen=True)
class FeatureMatrix:
    """Dense real matrix with features as rows and observations as columns."""

    values: np.ndarray

    def __post_init__(self):
        a = _as_matrix(self.values)
        a.setflags(write=False)
        object.__setattr__(self, "values", a)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class SamplingDistribution:
    """Probability vector over the rows of a FeatureMatrix."""

    probabilities: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        if p.ndim != 1 or p.size < 1:
            raise ValueError("probabilities must be a nonempty vector")
        if np.any(p < 0):
            raise ValueError("probabilities must be nonnegative")
        if abs(p.sum() - 1.0) > _PROB_SUM_TOL:
            raise ValueError("probabilities must sum to 1")
        p.setflags(write=False)
        object.__setattr__(self, "probabilities", p)

    def __len__(self) -> int:
        return self.probabilities.size


@dataclass(frozen=True)
class SketchMatrix:
    """Rescaled sampled rows; Gram matrix is an unbiased estimate of A^T A."""

    values: np.ndarray
    source_rows: np.ndarray

    def __post_init__(self):
        v = _as_matrix(self.values)
        rows = np.asarray(self.source_rows, dtype=int)
        if rows.ndim != 1 or rows.size != v.shape[0]:
            raise ValueError("source_rows length must match sketch row count")
        v.setflags(write=False)
        rows.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "source_rows", rows)

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    def gram(self) -> np.ndarray:
        return self.values.T @ self.values


@dataclass(frozen=True)
class LeverageProfile:
    """Per-row leverage scores, their descending ordering, and numerical rank.

    Scores are the squared row norms of an orthonormal column-space basis;
    they live in [0, 1] and sum to the rank. Ties in the ordering are broken
    by ascending row index.
    """

    scores: np.ndarray
    rank: int
    ranking: np.ndarray = field(init=False)

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=float)
        if s.ndim != 1 or s.size < 1:
            raise ValueError("scores must be a nonempty vector")
        if np.any(s < 0) or np.any(s > 1 + 1e-8):
            raise ValueError("leverage scores must lie in [0, 1]")
        if abs(s.sum() - self.rank) > 1e-6:
            raise ValueError("leverage scores must sum to the rank")
        # stable sort on negated scores: descending, ties by ascending index
        ranking = np.argsort(-s, kind="stable")
        s.setflags(write=False)
        ranking.setflags(write=False)
        object.__setattr__(self, "scores", s)
        object.__setattr__(self, "ranking", ranking)


def orthonormal_column_basis(a: FeatureMatrix) -> tuple[np.ndarray, int]:
    """Orthonormal basis U of the column space of A, plus its numerical rank.

    Singular values are kept when sigma > sigma_max * max(m, n) * eps.
    For tall matrices the basis is recovered from an eigendecomposition of
    the n x n Gram matrix A^T A (O(m n^2) instead of O(m^2 n)); otherwise a
    thin SVD is used directly.
    """
    A = a.values
    m, n = A.shape
    if not A.any():
        raise ValueError("zero matrix has no column basis")

    if m >= n:
        # Gram route: A^T A = V diag(sigma^2) V^T, U = A V / sigma
        gram = A.T @ A
        evals, V = np.linalg.eigh(gram)
        evals = evals[::-1]
        V = V[:, ::-1]
        sigma = np.sqrt(np.clip(evals, 0.0, None))
    else:
        U_full, sigma, _ = np.linalg.svd(A, full_matrices=False)

    tol = sigma[0] * max(m, n) * np.finfo(float).eps
    r = int(np.count_nonzero(sigma > tol))
    if r == 0:
        raise ValueError("zero matrix has no column basis")

    if m >= n:
        U = (A @ V[:, :r]) / sigma[:r]
        # one re-orthonormalization pass guards against Gram conditioning loss
        q, _ = np.linalg.qr(U)
        # keep column signs aligned with the unpolished basis
        signs = np.sign(np.sum(q * U, axis=0))
        signs[signs == 0] = 1.0
        U = q * signs
    else:
        U = U_full[:, :r]
    return U, r


def leverage_scores(a: FeatureMatrix) -> LeverageProfile:
    """Leverage score of row i: squared norm of row i of the basis U."""
    U, r = orthonormal_column_basis(a)
    scores = np.einsum("ij,ij->i", U, U)
    scores = np.clip(scores, 0.0, None)
    return LeverageProfile(scores=scores, rank=r)


def norm_squared_distribution(a: FeatureMatrix) -> SamplingDistribution:
    """Row-sampling probabilities proportional to squared row norms."""
    sq = np.einsum("ij,ij->i", a.values, a.values)
    total = sq.sum()
    if total <= 0:
        raise ValueError("cannot normalize zero mass")
    return SamplingDistribution(probabilities=sq / total)


def leverage_distribution(a: FeatureMatrix) -> SamplingDistribution:
    """Row-sampling probabilities proportional to leverage scores.

    Normalizes by the numerical rank, which equals the column count
    whenever A has full column rank.
    """
    profile = leverage_scores(a)
    total = profile.scores.sum()
    if total <= 0:
        raise ValueError("cannot normalize zero mass")
    return SamplingDistribution(probabilities=profile.scores / total)


def row_sample(
    a: FeatureMatrix, s: int, p: SamplingDistribution, seed: int
) -> SketchMatrix:
    """Sample s rows i.i.d. with replacement from P, rescaled by 1/sqrt(s*p_i).

    Deterministic for a given seed (PCG64 generator); the rescaling makes
    the sketch Gram matrix an unbiased estimator of A^T A.
    """
    if s < 1:
        raise ValueError("sample count must be positive")
    if len(p) != a.n_rows:
        raise ValueError("distribution length must match row count")
    rng = np.random.default_rng(seed)
    idx = rng.choice(a.n_rows, size=s, replace=True, p=p.probabilities)
    scale = 1.0 / np.sqrt(s * p.probabilities[idx])
    return SketchMatrix(values=a.values[idx] * scale[:, None], source_rows=idx)


def top_t_features(profile: LeverageProfile, t: int) -> np.ndarray:
    """Indices of the t rows with the largest leverage scores, descending."""
    m = profile.scores.size
    if t < 1:
        raise ValueError("budget must be positive")
    if t > m:
        raise ValueError("budget exceeds feature count")
    return profile.ranking[:t].copy()
