"""File formats and atomic persistence.

Group matrices travel as CSV (header ``subject_id,e0,e1,...``) with a JSON
sidecar manifest; parcellations as TSV; per-subject time series as CSV with
the region index in the first column; enrichment tables as TSV. All writes
go through a temp-file-plus-rename so partial files never appear.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import re
import tempfile
from pathlib import Path

import numpy as np

from .connectome import (
    GroupMatrix,
    ParcelRegion,
    Parcellation,
    RegionTimeSeries,
    edge_count,
)

__all__ = [
    "atomic_write_text",
    "content_digest",
    "write_group_matrix",
    "read_group_matrix",
    "write_parcellation",
    "read_parcellation",
    "read_timeseries_csv",
    "scan_timeseries_dir",
    "write_answer_key",
    "read_answer_key",
    "write_enrichment_tsv",
    "write_json",
]

EDGE_ORDERING = "row-major-upper"


def atomic_write_text(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def content_digest(path: Path) -> str:
    """64-bit content hash (blake2b), hex-encoded."""
    h = hashlib.blake2b(digest_size=8)
    h.update(Path(path).read_bytes())
    return h.hexdigest()


def _fmt(v: float) -> str:
    return repr(float(v))


def manifest_path(csv_path: Path) -> Path:
    csv_path = Path(csv_path)
    return csv_path.with_name(csv_path.stem + ".manifest.json")


def write_group_matrix(path: Path, g: GroupMatrix, source_session: str) -> None:
    header = ["subject_id"] + [f"e{k}" for k in range(g.n_edges)]
    lines = [",".join(header)]
    for sid, row in zip(g.subject_ids, g.values):
        lines.append(",".join([sid] + [_fmt(v) for v in row]))
    atomic_write_text(path, "\n".join(lines) + "\n")
    manifest = {
        "region_count": g.region_count,
        "edge_ordering": EDGE_ORDERING,
        "source_session": source_session,
    }
    atomic_write_text(manifest_path(path), json.dumps(manifest, indent=2) + "\n")


def read_group_matrix(path: Path) -> GroupMatrix:
    path = Path(path)
    manifest = json.loads(manifest_path(path).read_text())
    if manifest.get("edge_ordering") != EDGE_ORDERING:
        raise ValueError(f"{path}: unsupported edge ordering")
    region_count = int(manifest["region_count"])
    ids = []
    rows = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "subject_id":
            raise ValueError(f"{path}: missing subject_id header")
        if len(header) - 1 != edge_count(region_count):
            raise ValueError(f"{path}: edge count does not match region_count")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: wrong field count")
            ids.append(row[0])
            try:
                rows.append([float(v) for v in row[1:]])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return GroupMatrix(
        subject_ids=tuple(ids), values=np.array(rows), region_count=region_count
    )


def write_parcellation(path: Path, parc: Parcellation) -> None:
    lines = ["index\tarea_number\tname\tgroup_label"]
    for r in parc.regions:
        lines.append(f"{r.index}\t{r.area_number}\t{r.name}\t{r.group_label}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_parcellation(path: Path) -> Parcellation:
    path = Path(path)
    regions = []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh, delimiter="\t")
        required = {"index", "area_number", "name", "group_label"}
        if not required.issubset(reader.fieldnames or ()):
            raise ValueError(f"{path}: parcellation needs columns {sorted(required)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                regions.append(
                    ParcelRegion(
                        index=int(row["index"]),
                        area_number=int(row["area_number"]),
                        name=row["name"],
                        group_label=row["group_label"],
                    )
                )
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    regions.sort(key=lambda r: r.index)
    return Parcellation(regions=tuple(regions))


def read_timeseries_csv(path: Path, subject_id: str, tr_seconds: float) -> RegionTimeSeries:
    """CSV with the region index in column 0 and timepoints after it."""
    path = Path(path)
    entries = {}
    width = None
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row:
                continue
            try:
                region = int(row[0])
                values = [float(v) for v in row[1:]]
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise ValueError(f"{path}:{lineno}: inconsistent timepoint count")
            if region in entries:
                raise ValueError(f"{path}:{lineno}: duplicate region {region}")
            entries[region] = values
    if not entries:
        raise ValueError(f"{path}: empty time-series file")
    if sorted(entries) != list(range(len(entries))):
        raise ValueError(f"{path}: region indices must be contiguous from 0")
    signal = np.array([entries[r] for r in range(len(entries))])
    return RegionTimeSeries(subject_id=subject_id, signal=signal, tr_seconds=tr_seconds)


_TS_NAME = re.compile(r"^(?P<subject>.+)_session(?P<session>[12])\.csv$")


def scan_timeseries_dir(directory: Path) -> dict[str, dict[str, Path]]:
    """Map session -> {subject_id -> file} for files named <subject>_session<1|2>.csv."""
    sessions: dict[str, dict[str, Path]] = {"1": {}, "2": {}}
    for path in sorted(Path(directory).glob("*.csv")):
        m = _TS_NAME.match(path.name)
        if not m:
            raise ValueError(
                f"{path}: expected file name <subject>_session<1|2>.csv"
            )
        sessions[m.group("session")][m.group("subject")] = path
    return sessions


def write_answer_key(path: Path, signature_edges, per_task_edges=()) -> None:
    payload = {
        "signature_edges": sorted(int(e) for e in signature_edges),
        "per_task_edges": [sorted(int(e) for e in s) for s in per_task_edges],
    }
    atomic_write_text(path, json.dumps(payload, indent=2) + "\n")


def read_answer_key(path: Path) -> tuple[set[int], list[set[int]]]:
    payload = json.loads(Path(path).read_text())
    return (
        set(payload["signature_edges"]),
        [set(s) for s in payload.get("per_task_edges", [])],
    )


def write_enrichment_tsv(path: Path, results) -> None:
    lines = ["item_id\tobserved\texpected\tlog10_p\tpassed"]
    for r in results:
        lines.append(
            f"{r.item_id}\t{r.observed}\t{_fmt(r.expected)}\t{_fmt(r.log10_p)}\t{int(r.passed)}"
        )
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_json(path: Path, payload) -> None:
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")
