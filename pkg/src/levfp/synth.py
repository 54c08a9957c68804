"""Synthetic two-session cohorts with a planted signature edge set.

Each edge value decomposes into a fixed baseline, a population-common
pattern, a per-subject signature confined to a planted edge subset, and
fresh per-session noise. The planted set is the answer key for recovery
and identification experiments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .connectome import GroupMatrix, edge_count

__all__ = ["SynthConfig", "TaskGroupPair", "SynthCohort", "generate_cohort", "generate_task_cohort"]

CLAMP = 0.999


@dataclass(frozen=True)
class SynthConfig:
    n_subjects: int = 50
    n_regions: int = 90
    n_signature_edges: int = 60
    signature_strength: float = 0.3
    common_strength: float = 0.3
    common_loading_sd: float = 0.0
    session_noise: float = 0.12
    n_tasks: int = 0
    task_strength: float = 0.25
    n_task_edges: int = 60
    seed: int = 0

    def __post_init__(self):
        if self.n_subjects < 2:
            raise ValueError("need at least 2 subjects")
        if self.n_regions < 2:
            raise ValueError("need at least 2 regions")
        if self.n_signature_edges > edge_count(self.n_regions):
            raise ValueError("signature edge count exceeds edge count")
        for name in ("signature_strength", "common_strength", "session_noise", "task_strength"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def n_edges(self) -> int:
        return edge_count(self.n_regions)


@dataclass(frozen=True)
class TaskGroupPair:
    """One subject's tasks x edges matrices for the two encodings."""

    subject_id: str
    lr: GroupMatrix
    rl: GroupMatrix


@dataclass(frozen=True)
class SynthCohort:
    g1: GroupMatrix
    g2: GroupMatrix
    signature_edges: frozenset[int]
    task_groups: tuple[TaskGroupPair, ...] = ()
    task_edges: tuple[frozenset[int], ...] = ()

    @property
    def region_count(self) -> int:
        return self.g1.region_count


def _subject_ids(n: int) -> tuple[str, ...]:
    width = len(str(n - 1))
    return tuple(f"sub{idx:0{width}d}" for idx in range(n))


def _base_components(cfg: SynthConfig, rng: np.random.Generator):
    e = cfg.n_edges
    baseline = rng.uniform(-0.3, 0.6, size=e)
    common = rng.standard_normal(e)
    signature_edges = rng.choice(e, size=cfg.n_signature_edges, replace=False)
    signature = rng.standard_normal((cfg.n_subjects, e))
    mask = np.zeros(e)
    mask[signature_edges] = 1.0
    return baseline, common, signature_edges, signature * mask


def generate_cohort(cfg: SynthConfig) -> SynthCohort:
    """Two-session cohort with per-subject signatures on planted edges.

    Edge value for subject p, session q:
        clamp(mu_e + sc*c_e + ss*1[e in S]*z_pe + sn*eta_pqe, -0.999, 0.999)
    with mu drawn once in (-0.3, 0.6), c and z standard normal drawn once
    (z shared across sessions), eta fresh per session. Deterministic in seed.
    """
    rng = np.random.default_rng(cfg.seed)
    baseline, common, signature_edges, signature = _base_components(cfg, rng)
    clean = baseline[None, :] + cfg.signature_strength * signature
    ids = _subject_ids(cfg.n_subjects)
    groups = []
    for _session in (1, 2):
        # amplitude jitter makes the common pattern a leading principal
        # component instead of a constant absorbed by the feature baseline
        loading = 1.0 + cfg.common_loading_sd * rng.standard_normal(cfg.n_subjects)
        noise = rng.standard_normal((cfg.n_subjects, cfg.n_edges))
        values = np.clip(
            clean
            + cfg.common_strength * loading[:, None] * common[None, :]
            + cfg.session_noise * noise,
            -CLAMP,
            CLAMP,
        )
        groups.append(
            GroupMatrix(subject_ids=ids, values=values, region_count=cfg.n_regions)
        )
    return SynthCohort(
        g1=groups[0],
        g2=groups[1],
        signature_edges=frozenset(int(k) for k in signature_edges),
    )


def generate_task_cohort(cfg: SynthConfig) -> SynthCohort:
    """Cohort plus per-subject tasks x edges matrices for two encodings.

    Each task adds task_strength * t_te on its own planted edge set, disjoint
    across tasks (and from the signature set) when the edge budget allows;
    the two encodings differ only by fresh session noise.
    """
    if cfg.n_tasks < 2:
        raise ValueError("need at least 2 tasks")
    total_planted = cfg.n_signature_edges + cfg.n_tasks * cfg.n_task_edges
    rng = np.random.default_rng(cfg.seed)
    baseline, common, signature_edges, signature = _base_components(cfg, rng)

    e = cfg.n_edges
    if total_planted <= e:
        pool = np.setdiff1d(np.arange(e), signature_edges)
        chosen = rng.choice(pool, size=cfg.n_tasks * cfg.n_task_edges, replace=False)
        task_edge_sets = [
            chosen[i * cfg.n_task_edges : (i + 1) * cfg.n_task_edges]
            for i in range(cfg.n_tasks)
        ]
    elif cfg.n_tasks * cfg.n_task_edges <= e:
        # overlap with signature is unavoidable; tasks stay mutually disjoint
        chosen = rng.choice(e, size=cfg.n_tasks * cfg.n_task_edges, replace=False)
        task_edge_sets = [
            chosen[i * cfg.n_task_edges : (i + 1) * cfg.n_task_edges]
            for i in range(cfg.n_tasks)
        ]
    else:
        raise ValueError("total planted task edges exceed edge count")

    task_pattern = np.zeros((cfg.n_tasks, e))
    for tau, edges in enumerate(task_edge_sets):
        task_pattern[tau, edges] = rng.standard_normal(edges.size)

    clean_subject = baseline[None, :] + cfg.signature_strength * signature

    ids = _subject_ids(cfg.n_subjects)
    task_ids = tuple(f"task{t}" for t in range(cfg.n_tasks))
    pairs = []
    for p, subject_id in enumerate(ids):
        clean_tasks = clean_subject[p][None, :] + cfg.task_strength * task_pattern
        encodings = []
        for _enc in ("LR", "RL"):
            loading = 1.0 + cfg.common_loading_sd * rng.standard_normal(cfg.n_tasks)
            noise = rng.standard_normal((cfg.n_tasks, e))
            values = np.clip(
                clean_tasks
                + cfg.common_strength * loading[:, None] * common[None, :]
                + cfg.session_noise * noise,
                -CLAMP,
                CLAMP,
            )
            encodings.append(
                GroupMatrix(
                    subject_ids=task_ids, values=values, region_count=cfg.n_regions
                )
            )
        pairs.append(TaskGroupPair(subject_id=subject_id, lr=encodings[0], rl=encodings[1]))

    # rest-style sessions generated alongside, sharing the same components
    groups = []
    for _session in (1, 2):
        loading = 1.0 + cfg.common_loading_sd * rng.standard_normal(cfg.n_subjects)
        noise = rng.standard_normal((cfg.n_subjects, e))
        values = np.clip(
            clean_subject
            + cfg.common_strength * loading[:, None] * common[None, :]
            + cfg.session_noise * noise,
            -CLAMP,
            CLAMP,
        )
        groups.append(
            GroupMatrix(subject_ids=ids, values=values, region_count=cfg.n_regions)
        )

    return SynthCohort(
        g1=groups[0],
        g2=groups[1],
        signature_edges=frozenset(int(k) for k in signature_edges),
        task_groups=tuple(pairs),
        task_edges=tuple(
            frozenset(int(k) for k in edges) for edges in task_edge_sets
        ),
    )
