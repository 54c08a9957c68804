"""Identification protocols.

Leverage-based feature selection on training data, cross-group
argmax-correlation matching, seeded split trials, random-feature null
trials, feature-count sweeps, PCA-denoising baselines, and task-level
identification.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import sketch
from .connectome import GroupMatrix
from .stats import recurrent_features

__all__ = [
    "MatchResult",
    "TrialReport",
    "SweepCurve",
    "select_features",
    "match_groups",
    "full_matrix_match",
    "split_trial",
    "random_feature_trial",
    "sweep_feature_count",
    "pca_denoise_match",
    "task_identification",
]


@dataclass(frozen=True)
class MatchResult:
    """Cross-group matching outcome.

    Rows of `similarity` are probe subjects (session 2), columns gallery
    subjects (session 1). A tied argmax never counts as correct.
    """

    similarity: np.ndarray
    predicted: np.ndarray
    correct_mask: np.ndarray
    accuracy_percent: float
    ties: int
    degenerate: tuple[str, ...] = ()


@dataclass(frozen=True)
class TrialReport:
    trials: int
    mean_accuracy: float
    std_accuracy: float
    per_trial: np.ndarray
    feature_budget: int
    seed: int
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        per = np.asarray(self.per_trial, dtype=float)
        if per.size != self.trials:
            raise ValueError("per_trial length must equal trials")
        if abs(per.mean() - self.mean_accuracy) > 1e-10:
            raise ValueError("mean_accuracy inconsistent with per_trial")
        if abs(per.std() - self.std_accuracy) > 1e-10:
            raise ValueError("std_accuracy inconsistent with per_trial")
        per.setflags(write=False)
        object.__setattr__(self, "per_trial", per)


def _report(per_trial, feature_budget: int, seed: int, notes=()) -> TrialReport:
    per = np.asarray(per_trial, dtype=float)
    return TrialReport(
        trials=per.size,
        mean_accuracy=float(per.mean()),
        std_accuracy=float(per.std()),
        per_trial=per,
        feature_budget=feature_budget,
        seed=seed,
        notes=tuple(notes),
    )


@dataclass(frozen=True)
class SweepCurve:
    budgets: np.ndarray
    accuracies: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.budgets, dtype=int)
        a = np.asarray(self.accuracies, dtype=float)
        if b.size != a.size:
            raise ValueError("budgets and accuracies must have equal length")
        if np.any(np.diff(b) <= 0):
            raise ValueError("budgets must be strictly ascending")
        b.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "budgets", b)
        object.__setattr__(self, "accuracies", a)


def _trial_rng(seed: int, trial: int) -> np.random.Generator:
    # documented derivation: one substream per (seed, trial index)
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(trial,)))


def select_features(g_train: GroupMatrix, t: int) -> np.ndarray:
    """Top-t leverage-score features of the features x subjects matrix.

    The group matrix is used raw (no mean-centering), mirroring leverage
    computation straight from an SVD of the stacked edge vectors.
    """
    a = sketch.FeatureMatrix(g_train.values.T)
    profile = sketch.leverage_scores(a)
    return sketch.top_t_features(profile, t)


def _pearson_rows(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Center and unit-normalize rows; returns (normalized, degenerate mask)."""
    c = x - x.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(c, axis=1)
    degenerate = norms == 0
    safe = np.where(degenerate, 1.0, norms)
    return c / safe[:, None], degenerate


def _match(values2, ids2, values1, ids1) -> MatchResult:
    p2, deg2 = _pearson_rows(values2)
    p1, deg1 = _pearson_rows(values1)
    sim = p2 @ p1.T
    diagnostics = [f"probe:{ids2[i]}" for i in np.flatnonzero(deg2)]
    diagnostics += [f"gallery:{ids1[i]}" for i in np.flatnonzero(deg1)]
    sim[deg2, :] = -np.inf
    sim[:, deg1] = -np.inf
    predicted = sim.argmax(axis=1)
    row_max = sim[np.arange(sim.shape[0]), predicted]
    tie_rows = (sim == row_max[:, None]).sum(axis=1) > 1
    correct = np.array(
        [
            (not tie_rows[r]) and ids1[predicted[r]] == ids2[r]
            for r in range(len(ids2))
        ]
    )
    return MatchResult(
        similarity=sim,
        predicted=predicted,
        correct_mask=correct,
        accuracy_percent=100.0 * correct.mean(),
        ties=int(tie_rows.sum()),
        degenerate=tuple(diagnostics),
    )


def match_groups(g1: GroupMatrix, g2: GroupMatrix, features) -> MatchResult:
    """Match each probe in g2 to its most correlated gallery subject in g1,
    restricted to the given feature indices."""
    feats = np.asarray(features, dtype=int)
    if feats.size < 2:
        raise ValueError("correlation needs >=2 features")
    if set(g1.subject_ids) != set(g2.subject_ids):
        raise ValueError("groups must cover the same subjects")
    if g1.n_edges != g2.n_edges:
        raise ValueError("groups must share the feature space")
    if feats.min() < 0 or feats.max() >= g1.n_edges:
        raise ValueError("feature index out of range")
    return _match(
        g2.values[:, feats], g2.subject_ids, g1.values[:, feats], g1.subject_ids
    )


def full_matrix_match(g1: GroupMatrix, g2: GroupMatrix) -> MatchResult:
    """Reference baseline: matching on the complete feature set."""
    return match_groups(g1, g2, np.arange(g1.n_edges))


def _split_sizes(n: int, train_fraction: float) -> int:
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie in (0, 1)")
    n_train = int(round(train_fraction * n))
    if n_train < 2 or n - n_train < 2:
        raise ValueError("split leaves fewer than 2 subjects on one side")
    return n_train


def split_trial(
    g1: GroupMatrix,
    g2: GroupMatrix,
    train_fraction: float,
    t: int,
    trials: int,
    seed: int,
) -> tuple[TrialReport, TrialReport]:
    """Repeated random subject splits; features re-selected per trial on the
    session-1 training rows, then reused unchanged for the held-out test set."""
    ids = np.array(g1.subject_ids)
    n_train = _split_sizes(ids.size, train_fraction)
    train_acc = np.empty(trials)
    test_acc = np.empty(trials)
    for trial in range(trials):
        rng = _trial_rng(seed, trial)
        perm = rng.permutation(ids.size)
        train_ids = ids[perm[:n_train]]
        test_ids = ids[perm[n_train:]]
        g1_train = g1.subset(train_ids)
        feats = select_features(g1_train, t)
        train_acc[trial] = match_groups(
            g1_train, g2.subset(train_ids), feats
        ).accuracy_percent
        test_acc[trial] = match_groups(
            g1.subset(test_ids), g2.subset(test_ids), feats
        ).accuracy_percent
    return _report(train_acc, t, seed), _report(test_acc, t, seed)


def random_feature_trial(
    g1: GroupMatrix, g2: GroupMatrix, t: int, trials: int, seed: int
) -> TrialReport:
    """Null distribution: t features drawn uniformly without replacement per
    trial, matched over the full subject set."""
    if t > g1.n_edges:
        raise ValueError("budget exceeds feature count")
    acc = np.empty(trials)
    for trial in range(trials):
        rng = _trial_rng(seed, trial)
        feats = rng.choice(g1.n_edges, size=t, replace=False)
        acc[trial] = match_groups(g1, g2, feats).accuracy_percent
    return _report(acc, t, seed)


def sweep_feature_count(
    g1: GroupMatrix, g2: GroupMatrix, budgets, trials: int, seed: int
) -> SweepCurve:
    """Mean test accuracy at 80/20 splits for each feature budget.

    The per-trial leverage ranking is computed once and sliced per budget
    (top-t sets are nested prefixes of the ranking).
    """
    budgets = np.asarray(budgets, dtype=int)
    if budgets.size < 1 or np.any(np.diff(budgets) <= 0):
        raise ValueError("budgets must be nonempty and strictly ascending")
    if budgets[0] < 2 or budgets[-1] > g1.n_edges:
        raise ValueError("budgets must lie in [2, feature count]")
    ids = np.array(g1.subject_ids)
    n_train = _split_sizes(ids.size, 0.8)
    acc = np.zeros((trials, budgets.size))
    for trial in range(trials):
        rng = _trial_rng(seed, trial)
        perm = rng.permutation(ids.size)
        train_ids = ids[perm[:n_train]]
        test_ids = ids[perm[n_train:]]
        profile = sketch.leverage_scores(
            sketch.FeatureMatrix(g1.subset(train_ids).values.T)
        )
        g1_test = g1.subset(test_ids)
        g2_test = g2.subset(test_ids)
        for bi, t in enumerate(budgets):
            feats = profile.ranking[:t]
            acc[trial, bi] = match_groups(g1_test, g2_test, feats).accuracy_percent
    return SweepCurve(budgets=budgets, accuracies=acc.mean(axis=0))


def pca_denoise_match(
    g1: GroupMatrix,
    g2: GroupMatrix,
    drop_leading: int,
    keep: int | None,
    *,
    train_subjects=None,
) -> tuple[float, float]:
    """Match after removing selected training principal components.

    Components come from the mean-centered training rows of g1. Both groups
    have components 1..drop_leading and everything beyond `keep` (None = all)
    subtracted from them; matching is Pearson correlation in the cleaned
    feature space. Held-out subjects reuse the training components. Returns
    (train accuracy, test accuracy); with no held-out subjects both equal the
    training accuracy.
    """
    ids = list(g1.subject_ids)
    if train_subjects is None:
        train_ids = ids
    else:
        train_ids = list(train_subjects)
    test_ids = [s for s in ids if s not in set(train_ids)]

    x_train = g1.subset(train_ids).values
    n = x_train.shape[0]
    if not 0 <= drop_leading < min(n, x_train.shape[1]):
        raise ValueError("drop_leading must be < min(n_subjects, n_features)")
    mu = x_train.mean(axis=0)
    centered = x_train - mu
    _, _svals, vt = np.linalg.svd(centered, full_matrices=False)
    available = vt.shape[0]
    n_keep = available if keep is None else min(keep, available)
    if n_keep <= drop_leading:
        raise ValueError("no principal components retained")
    removed = np.vstack([vt[:drop_leading], vt[n_keep:]])

    def clean(g: GroupMatrix, subject_ids) -> np.ndarray:
        x = g.subset(subject_ids).values
        if removed.size == 0:
            return x
        return x - (x - mu) @ removed.T @ removed

    train_res = _match(
        clean(g2, train_ids), tuple(train_ids), clean(g1, train_ids), tuple(train_ids)
    )
    if not test_ids:
        return train_res.accuracy_percent, train_res.accuracy_percent
    test_res = _match(
        clean(g2, test_ids), tuple(test_ids), clean(g1, test_ids), tuple(test_ids)
    )
    return train_res.accuracy_percent, test_res.accuracy_percent


def task_identification(
    per_subject_groups,
    train_fraction: float,
    t: int,
    pvalue_threshold: float,
    trials: int,
    seed: int,
) -> TrialReport:
    """Within-subject task matching on features that recur across the
    training subjects' per-subject leverage selections.

    Per trial: split subjects, take each training subject's top-t features
    from their first-encoding tasks x features matrix, keep features passing
    the recurrence enrichment threshold, then match tasks (second encoding
    against first) for every held-out subject on the kept features.
    """
    pairs = list(per_subject_groups)
    if not pairs:
        raise ValueError("need at least one subject")
    task_ids = pairs[0].lr.subject_ids
    n_edges = pairs[0].lr.n_edges
    for p in pairs:
        if p.lr.subject_ids != task_ids or p.rl.subject_ids != task_ids:
            raise ValueError("all subjects must share the task row ordering")
        if p.lr.n_edges != n_edges or p.rl.n_edges != n_edges:
            raise ValueError("all subjects must share the feature space")

    if len(task_ids) < 2:
        per = np.full(trials, 100.0)
        return _report(per, t, seed, notes=("degenerate: single task",))

    n = len(pairs)
    n_train = _split_sizes(n, train_fraction)
    acc = np.empty(trials)
    for trial in range(trials):
        rng = _trial_rng(seed, trial)
        perm = rng.permutation(n)
        train = [pairs[i] for i in perm[:n_train]]
        test = [pairs[i] for i in perm[n_train:]]
        feature_sets = [set(map(int, select_features(p.lr, t))) for p in train]
        kept, _results = recurrent_features(feature_sets, n_edges, pvalue_threshold)
        if len(kept) < 2:
            raise ValueError("threshold too strict")
        feats = np.array(sorted(kept))
        correct = 0
        total = 0
        for p in test:
            res = match_groups(p.lr, p.rl, feats)
            correct += int(res.correct_mask.sum())
            total += len(task_ids)
        acc[trial] = 100.0 * correct / total
    return _report(acc, t, seed)
