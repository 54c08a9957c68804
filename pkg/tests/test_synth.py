import numpy as np
import pytest

from levfp.connectome import edge_count
from levfp.synth import CLAMP, SynthConfig, generate_cohort, generate_task_cohort


def small_cfg(**kw):
    base = dict(n_subjects=8, n_regions=12, n_signature_edges=10, seed=3)
    base.update(kw)
    return SynthConfig(**base)


def test_config_defaults():
    cfg = SynthConfig()
    assert cfg.n_subjects == 50
    assert cfg.n_regions == 90
    assert cfg.n_signature_edges == 60
    assert cfg.n_edges == 4005


def test_config_validation():
    with pytest.raises(ValueError):
        SynthConfig(n_subjects=1)
    with pytest.raises(ValueError):
        SynthConfig(n_regions=1)
    with pytest.raises(ValueError):
        SynthConfig(n_regions=3, n_signature_edges=4)
    with pytest.raises(ValueError):
        SynthConfig(signature_strength=-0.1)


def test_cohort_shapes_and_key():
    cfg = small_cfg()
    cohort = generate_cohort(cfg)
    e = edge_count(cfg.n_regions)
    assert cohort.g1.values.shape == (8, e)
    assert cohort.g2.values.shape == (8, e)
    assert cohort.g1.subject_ids == cohort.g2.subject_ids
    assert len(cohort.signature_edges) == 10
    assert all(0 <= k < e for k in cohort.signature_edges)
    assert cohort.region_count == 12


def test_cohort_deterministic():
    a = generate_cohort(small_cfg())
    b = generate_cohort(small_cfg())
    assert np.array_equal(a.g1.values, b.g1.values)
    assert np.array_equal(a.g2.values, b.g2.values)
    assert a.signature_edges == b.signature_edges


def test_cohort_seed_sensitivity():
    a = generate_cohort(small_cfg(seed=1))
    b = generate_cohort(small_cfg(seed=2))
    assert not np.array_equal(a.g1.values, b.g1.values)


def test_cohort_clamped():
    cohort = generate_cohort(small_cfg(signature_strength=5.0, session_noise=5.0))
    assert np.max(np.abs(cohort.g1.values)) <= CLAMP
    assert np.max(np.abs(cohort.g2.values)) <= CLAMP


def test_noise_free_sessions_identical():
    cohort = generate_cohort(small_cfg(session_noise=0.0))
    assert np.array_equal(cohort.g1.values, cohort.g2.values)


def test_signature_confined_to_planted_edges():
    # with no noise and no common pattern, subjects differ only on planted edges
    cohort = generate_cohort(
        small_cfg(session_noise=0.0, common_strength=0.0)
    )
    diff = cohort.g1.values - cohort.g1.values[0][None, :]
    varying = set(np.flatnonzero(np.abs(diff).max(axis=0) > 0).tolist())
    assert varying == set(cohort.signature_edges)


def test_zero_signature_strength_identical_subjects():
    cohort = generate_cohort(
        small_cfg(signature_strength=0.0, session_noise=0.0, common_strength=0.0)
    )
    assert np.allclose(cohort.g1.values, cohort.g1.values[0][None, :])


def test_subject_id_padding():
    cohort = generate_cohort(small_cfg(n_subjects=12))
    assert cohort.g1.subject_ids[0] == "sub00"
    assert cohort.g1.subject_ids[11] == "sub11"


def test_task_cohort_structure():
    cfg = small_cfg(n_tasks=3, n_task_edges=8)
    cohort = generate_task_cohort(cfg)
    assert len(cohort.task_groups) == 8
    assert len(cohort.task_edges) == 3
    for pair in cohort.task_groups:
        assert pair.lr.values.shape == (3, cfg.n_edges)
        assert pair.rl.values.shape == (3, cfg.n_edges)
        assert pair.lr.subject_ids == ("task0", "task1", "task2")
    # tasks mutually disjoint and (budget allows) disjoint from the signature
    all_task = set()
    for s in cohort.task_edges:
        assert len(s) == 8
        assert not (s & all_task)
        all_task |= s
    assert not (all_task & cohort.signature_edges)


def test_task_cohort_requires_two_tasks():
    with pytest.raises(ValueError, match="at least 2 tasks"):
        generate_task_cohort(small_cfg(n_tasks=1))


def test_task_cohort_budget_exceeded():
    with pytest.raises(ValueError, match="exceed"):
        generate_task_cohort(
            SynthConfig(n_subjects=4, n_regions=5, n_signature_edges=2,
                        n_tasks=3, n_task_edges=5)
        )


def test_task_cohort_deterministic():
    cfg = small_cfg(n_tasks=2, n_task_edges=5)
    a = generate_task_cohort(cfg)
    b = generate_task_cohort(cfg)
    assert np.array_equal(a.task_groups[0].lr.values, b.task_groups[0].lr.values)
    assert a.task_edges == b.task_edges
    assert np.array_equal(a.g1.values, b.g1.values)


def test_task_effect_confined_to_planted_edges():
    cfg = small_cfg(n_tasks=2, n_task_edges=5, session_noise=0.0,
                    common_strength=0.0)
    cohort = generate_task_cohort(cfg)
    pair = cohort.task_groups[0]
    diff = np.abs(pair.lr.values[0] - pair.lr.values[1])
    varying = set(np.flatnonzero(diff > 0).tolist())
    assert varying <= (cohort.task_edges[0] | cohort.task_edges[1])
