"""Significance machinery for feature and region enrichment.

Exact hypergeometric upper tails in log space, recurrence enrichment across
repeated feature selections, region over-representation among chosen edges,
empirical permutation p-values, and degree-based edge filtering for reports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .connectome import edge_regions

__all__ = [
    "EnrichmentResult",
    "NullAccuracyDistribution",
    "hypergeom_sf",
    "log_hypergeom_sf",
    "recurrent_features",
    "region_enrichment",
    "empirical_pvalue",
    "degree_filter",
]


@dataclass(frozen=True)
class EnrichmentResult:
    """Enrichment verdict for one item (feature or region index).

    `log10_p` carries the tail probability even when `p_value` underflows
    to 0.0 in double precision; threshold comparisons use the log domain.
    """

    item_id: int
    observed: int
    expected: float
    p_value: float
    log10_p: float
    passed: bool


@dataclass(frozen=True)
class NullAccuracyDistribution:
    """Observed accuracy against a null sample, with add-one empirical p."""

    samples: np.ndarray
    observed: float
    empirical_p: float


def _log_binom(n, k):
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


def log_hypergeom_sf(k: int, K: int, n: int, N: int) -> float:
    """log P[X >= k] for X hypergeometric(N, K, n), exact via log-gamma.

    Accumulates the tail in log space, so probabilities far below the
    double-precision underflow threshold remain meaningful.
    """
    if N < 0 or K < 0 or n < 0 or K > N or n > N:
        raise ValueError("require 0 <= K <= N and 0 <= n <= N")
    hi = min(K, n)
    if k < 0 or k > hi:
        raise ValueError("require 0 <= k <= min(K, n)")
    lo = max(0, n - (N - K))
    if k <= lo:
        return 0.0  # certain event
    ks = np.arange(k, hi + 1)
    log_terms = (
        _log_binom(K, ks) + _log_binom(N - K, n - ks) - _log_binom(N, n)
    )
    return float(logsumexp(log_terms))


def hypergeom_sf(k: int, K: int, n: int, N: int) -> float:
    """Exact upper-tail probability P[X >= k]; see log_hypergeom_sf."""
    return math.exp(log_hypergeom_sf(k, K, n, N))


def _log_binomial_sf(k: int, trials: int, log_p: float, log_q: float) -> float:
    """log P[X >= k] for X ~ Binomial(trials, p), with p given in log form."""
    if k <= 0:
        return 0.0
    ks = np.arange(k, trials + 1)
    log_terms = _log_binom(trials, ks) + ks * log_p + (trials - ks) * log_q
    return float(logsumexp(log_terms))


def _log_poisson_binomial_sf(k: int, log_ps: np.ndarray) -> float:
    """log P[X >= k] for a sum of independent Bernoullis, exact DP in log space."""
    if k <= 0:
        return 0.0
    b = log_ps.size
    log_qs = np.log1p(-np.exp(log_ps))
    # dp[j] = log P[first i trials produced j successes]
    dp = np.full(b + 1, -np.inf)
    dp[0] = 0.0
    for i in range(b):
        shifted = np.concatenate(([-np.inf], dp[:-1] + log_ps[i]))
        dp = np.logaddexp(dp + log_qs[i], shifted)
    return float(logsumexp(dp[k:]))


def recurrent_features(
    feature_sets: list[set[int]] | list[frozenset[int]],
    total_features: int,
    threshold: float,
) -> tuple[set[int], list[EnrichmentResult]]:
    """Features recurring across repeated selections more often than chance.

    Null model: each selection round draws its observed number of features
    uniformly without replacement, independently across rounds, so a given
    feature is included in round b with probability t_b / E. The recurrence
    count is binomial when all rounds share one size and Poisson-binomial
    otherwise. Features with tail probability below `threshold` are kept.

    Returns the kept feature set plus one EnrichmentResult per feature that
    appears in at least one round, sorted by ascending p then index.
    """
    if len(feature_sets) < 2:
        raise ValueError("need at least 2 feature sets")
    sizes = []
    counts: dict[int, int] = {}
    for fs in feature_sets:
        sizes.append(len(fs))
        for f in fs:
            if not 0 <= f < total_features:
                raise ValueError(f"feature index {f} out of range")
            counts[f] = counts.get(f, 0) + 1
    b = len(feature_sets)
    sizes_arr = np.asarray(sizes, dtype=float)
    expected = float(np.sum(sizes_arr / total_features))
    log_thresh = math.log(threshold)

    constant_size = len(set(sizes)) == 1
    if constant_size:
        log_p = math.log(sizes[0]) - math.log(total_features)
        log_q = math.log1p(-sizes[0] / total_features)
        sf_cache = {
            k: _log_binomial_sf(k, b, log_p, log_q)
            for k in set(counts.values())
        }
    else:
        log_ps = np.log(sizes_arr) - math.log(total_features)
        sf_cache = {
            k: _log_poisson_binomial_sf(k, log_ps)
            for k in set(counts.values())
        }

    results = []
    for f, k in counts.items():
        lp = sf_cache[k]
        results.append(
            EnrichmentResult(
                item_id=f,
                observed=k,
                expected=expected,
                p_value=math.exp(lp),
                log10_p=lp / math.log(10),
                passed=lp < log_thresh,
            )
        )
    results.sort(key=lambda r: (r.log10_p, r.item_id))
    kept = {r.item_id for r in results if r.passed}
    return kept, results


def region_enrichment(
    edges: set[int], region_count: int, threshold: float
) -> tuple[set[int], list[EnrichmentResult]]:
    """Regions over-represented among the chosen edges.

    For each region: population is all E = R(R-1)/2 edges, successes the
    R-1 edges incident to the region, draws the chosen edge set, observed
    the chosen edges touching the region; exact hypergeometric upper tail.
    """
    r_count = region_count
    n_edges_total = r_count * (r_count - 1) // 2
    incident = np.zeros(r_count, dtype=int)
    for e in edges:
        i, j = edge_regions(e, r_count)
        incident[i] += 1
        incident[j] += 1
    n = len(edges)
    big_k = r_count - 1
    log_thresh = math.log(threshold)
    results = []
    for r in range(r_count):
        k = int(incident[r])
        lp = log_hypergeom_sf(k, big_k, n, n_edges_total) if n > 0 else 0.0
        results.append(
            EnrichmentResult(
                item_id=r,
                observed=k,
                expected=n * big_k / n_edges_total,
                p_value=math.exp(lp),
                log10_p=lp / math.log(10),
                passed=lp < log_thresh,
            )
        )
    results.sort(key=lambda res: (res.log10_p, res.item_id))
    kept = {res.item_id for res in results if res.passed}
    return kept, results


def empirical_pvalue(observed: float, null_samples) -> NullAccuracyDistribution:
    """Add-one empirical p-value: (1 + #{null >= observed}) / (#null + 1).

    Accepts a raw sequence of null accuracies or any object with a
    `per_trial` attribute (e.g. a fingerprint TrialReport).
    """
    samples = np.asarray(getattr(null_samples, "per_trial", null_samples), dtype=float)
    if samples.size < 1:
        raise ValueError("need at least one null sample")
    p = (1 + int(np.count_nonzero(samples >= observed))) / (samples.size + 1)
    return NullAccuracyDistribution(
        samples=samples, observed=float(observed), empirical_p=p
    )


def degree_filter(edges: set[int], region_count: int, min_degree: int) -> set[int]:
    """Keep edges where at least one endpoint has degree >= min_degree.

    Degrees are computed over the input edge set itself.
    """
    degree = np.zeros(region_count, dtype=int)
    pairs = {}
    for e in edges:
        i, j = edge_regions(e, region_count)
        pairs[e] = (i, j)
        degree[i] += 1
        degree[j] += 1
    return {
        e
        for e, (i, j) in pairs.items()
        if degree[i] >= min_degree or degree[j] >= min_degree
    }
