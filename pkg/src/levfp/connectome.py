"""Connectome data model and preprocessing.

Region time series -> correlation matrix -> vectorized edge features ->
subjects-by-edges group matrices, plus parcellation metadata and the
canonical edge <-> region-pair indexing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "RegionTimeSeries",
    "ParcelRegion",
    "Parcellation",
    "CorrelationMatrix",
    "EdgeVector",
    "GroupMatrix",
    "zscore",
    "global_signal_regression",
    "bandpass",
    "correlation_matrix",
    "edge_index",
    "edge_regions",
    "edge_count",
    "vectorize_upper",
    "build_group_matrix",
    "restrict_to_regions",
]


@dataclass(frozen=True)
class RegionTimeSeries:
    """Per-subject regions x timepoints signal matrix."""

    subject_id: str
    signal: np.ndarray
    tr_seconds: float

    def __post_init__(self):
        sig = np.asarray(self.signal, dtype=float)
        if sig.ndim != 2 or sig.shape[0] < 2 or sig.shape[1] < 3:
            raise ValueError("signal must be R x T with R >= 2, T >= 3")
        if not np.all(np.isfinite(sig)):
            raise ValueError("signal entries must be finite")
        if self.tr_seconds <= 0:
            raise ValueError("tr_seconds must be positive")
        sig.setflags(write=False)
        object.__setattr__(self, "signal", sig)

    @property
    def n_regions(self) -> int:
        return self.signal.shape[0]

    @property
    def n_timepoints(self) -> int:
        return self.signal.shape[1]


@dataclass(frozen=True)
class ParcelRegion:
    index: int
    area_number: int
    name: str
    group_label: str


@dataclass(frozen=True)
class Parcellation:
    """Atlas metadata: one record per region, each tagged with a coarse group."""

    regions: tuple[ParcelRegion, ...]

    def __post_init__(self):
        regions = tuple(self.regions)
        if not regions:
            raise ValueError("parcellation must contain at least one region")
        for i, r in enumerate(regions):
            if r.index != i:
                raise ValueError("region indices must be contiguous from 0")
            if not r.name:
                raise ValueError(f"region {i} has an empty name")
        object.__setattr__(self, "regions", regions)

    @property
    def region_count(self) -> int:
        return len(self.regions)

    @property
    def group_labels(self) -> tuple[str, ...]:
        seen = dict.fromkeys(r.group_label for r in self.regions)
        return tuple(seen)


@dataclass(frozen=True)
class CorrelationMatrix:
    """Symmetric region x region Pearson correlation matrix, unit diagonal."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] < 2:
            raise ValueError("correlation matrix must be square, R >= 2")
        if np.max(np.abs(v - v.T)) > 1e-12:
            raise ValueError("correlation matrix must be symmetric")
        if np.max(np.abs(np.diag(v) - 1.0)) > 1e-12:
            raise ValueError("correlation matrix must have unit diagonal")
        if np.max(np.abs(v)) > 1 + 1e-12:
            raise ValueError("correlations must lie in [-1, 1]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def region_count(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class EdgeVector:
    """Strict upper triangle of a correlation matrix, row-major order."""

    values: np.ndarray
    region_count: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        expected = edge_count(self.region_count)
        if v.ndim != 1 or v.size != expected:
            raise ValueError(
                f"edge vector must have length {expected} for R={self.region_count}"
            )
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class GroupMatrix:
    """Subjects x edges matrix for one session."""

    subject_ids: tuple[str, ...]
    values: np.ndarray
    region_count: int

    def __post_init__(self):
        ids = tuple(self.subject_ids)
        if len(set(ids)) != len(ids):
            raise ValueError("subject ids must be unique")
        v = np.asarray(self.values, dtype=float)
        expected = edge_count(self.region_count)
        if v.ndim != 2 or v.shape != (len(ids), expected):
            raise ValueError("values must be n_subjects x n_edges")
        v.setflags(write=False)
        object.__setattr__(self, "subject_ids", ids)
        object.__setattr__(self, "values", v)

    @property
    def n_subjects(self) -> int:
        return len(self.subject_ids)

    @property
    def n_edges(self) -> int:
        return self.values.shape[1]

    def subset(self, subject_ids) -> "GroupMatrix":
        """Rows for the given subjects, in the given order."""
        pos = {s: i for i, s in enumerate(self.subject_ids)}
        idx = [pos[s] for s in subject_ids]
        return GroupMatrix(
            subject_ids=tuple(subject_ids),
            values=self.values[idx],
            region_count=self.region_count,
        )


def zscore(ts: RegionTimeSeries) -> RegionTimeSeries:
    """Standardize each region series to mean 0, sample (n-1) std 1."""
    sig = ts.signal
    mean = sig.mean(axis=1, keepdims=True)
    sd = sig.std(axis=1, ddof=1, keepdims=True)
    flat = np.flatnonzero(sd[:, 0] == 0)
    if flat.size:
        raise ValueError(f"region {flat[0]} has constant time series")
    return RegionTimeSeries(
        subject_id=ts.subject_id, signal=(sig - mean) / sd, tr_seconds=ts.tr_seconds
    )


def global_signal_regression(ts: RegionTimeSeries) -> RegionTimeSeries:
    """Regress the across-region mean series (with intercept) out of each region."""
    sig = ts.signal
    g = sig.mean(axis=0)
    if g.std() == 0:
        raise ValueError("global mean series has zero variance")
    design = np.column_stack([np.ones_like(g), g])
    coef, *_ = np.linalg.lstsq(design, sig.T, rcond=None)
    residual = sig - (design @ coef).T
    return RegionTimeSeries(
        subject_id=ts.subject_id, signal=residual, tr_seconds=ts.tr_seconds
    )


def bandpass(ts: RegionTimeSeries, low_hz: float, high_hz: float) -> RegionTimeSeries:
    """Ideal brick-wall bandpass: zero DFT bins with center frequency outside
    [low_hz, high_hz]; boundary bins are kept."""
    nyquist = 1.0 / (2.0 * ts.tr_seconds)
    if not (0 <= low_hz < high_hz <= nyquist):
        raise ValueError(
            f"band must satisfy 0 <= low < high <= Nyquist ({nyquist:.6g} Hz)"
        )
    t = ts.n_timepoints
    freqs = np.fft.rfftfreq(t, d=ts.tr_seconds)
    spectrum = np.fft.rfft(ts.signal, axis=1)
    keep = (freqs >= low_hz) & (freqs <= high_hz)
    spectrum[:, ~keep] = 0.0
    filtered = np.fft.irfft(spectrum, n=t, axis=1)
    return RegionTimeSeries(
        subject_id=ts.subject_id, signal=filtered, tr_seconds=ts.tr_seconds
    )


def correlation_matrix(ts: RegionTimeSeries) -> CorrelationMatrix:
    """Pearson correlation of every pair of region series."""
    sig = ts.signal
    sd = sig.std(axis=1)
    flat = np.flatnonzero(sd == 0)
    if flat.size:
        raise ValueError(f"region {flat[0]} has constant time series")
    c = np.corrcoef(sig)
    c = np.clip((c + c.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(c, 1.0)
    return CorrelationMatrix(values=c)


def edge_count(region_count: int) -> int:
    return region_count * (region_count - 1) // 2


def edge_index(i: int, j: int, region_count: int) -> int:
    """Edge id of region pair (i, j), row-major over the strict upper triangle."""
    if not (0 <= i < j < region_count):
        raise ValueError("require 0 <= i < j < R")
    return i * (2 * region_count - i - 1) // 2 + (j - i - 1)


def edge_regions(k: int, region_count: int) -> tuple[int, int]:
    """Region pair (i, j) of edge id k; exact inverse of edge_index."""
    if not (0 <= k < edge_count(region_count)):
        raise ValueError("edge id out of range")
    i = 0
    offset = 0
    while k >= offset + (region_count - i - 1):
        offset += region_count - i - 1
        i += 1
    j = i + 1 + (k - offset)
    return i, j


def vectorize_upper(c: CorrelationMatrix) -> EdgeVector:
    """Read off the strict upper triangle in row-major (canonical) order."""
    r = c.region_count
    iu = np.triu_indices(r, k=1)
    return EdgeVector(values=c.values[iu], region_count=r)


def build_group_matrix(edge_vectors) -> GroupMatrix:
    """Stack (subject_id, EdgeVector) pairs into a subjects x edges matrix."""
    items = list(edge_vectors)
    if not items:
        raise ValueError("need at least one subject")
    region_count = items[0][1].region_count
    ids = []
    rows = []
    for subject_id, ev in items:
        if ev.region_count != region_count:
            raise ValueError("all edge vectors must share region_count")
        ids.append(subject_id)
        rows.append(ev.values)
    return GroupMatrix(
        subject_ids=tuple(ids), values=np.vstack(rows), region_count=region_count
    )


def restrict_to_regions(g: GroupMatrix, regions) -> GroupMatrix:
    """Keep only edges with both endpoints in `regions`, re-indexed canonically."""
    kept = sorted(set(regions))
    q = len(kept)
    if q < 2:
        raise ValueError("need at least 2 regions")
    if kept[0] < 0 or kept[-1] >= g.region_count:
        raise ValueError("region index out of range")
    cols = [
        edge_index(kept[a], kept[b], g.region_count)
        for a in range(q)
        for b in range(a + 1, q)
    ]
    return GroupMatrix(
        subject_ids=g.subject_ids, values=g.values[:, cols], region_count=q
    )
