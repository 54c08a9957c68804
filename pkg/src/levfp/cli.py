"""Command-line driver for reproducible fingerprinting runs.

Every command is deterministic given its inputs, flags, and seed; report
files are byte-identical across reruns (the run manifest additionally
records wall-clock timestamps). Exit codes: 0 success, 1 usage, 2 data,
3 numeric failure; failures emit a JSON error object on stderr.
"""

from __future__ import annotations

import datetime
import functools
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__, fingerprint as fp, io as lio, stats, synth
from .connectome import (
    GroupMatrix,
    bandpass,
    build_group_matrix,
    correlation_matrix,
    edge_regions,
    global_signal_regression,
    restrict_to_regions,
    vectorize_upper,
    zscore,
)

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class DataError(Exception):
    """Malformed or inconsistent input files."""


def _fail(kind: str, message: str, code: int):
    sys.stderr.write(
        json.dumps({"error": kind, "message": message, "exit_code": code}) + "\n"
    )
    raise SystemExit(code)


def command_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.UsageError as exc:
            _fail("usage", str(exc), EXIT_USAGE)
        except DataError as exc:
            _fail("data", str(exc), EXIT_DATA)
        except (OSError, json.JSONDecodeError) as exc:
            _fail("data", str(exc), EXIT_DATA)
        except (ValueError, np.linalg.LinAlgError) as exc:
            _fail("numeric", str(exc), EXIT_NUMERIC)

    return wrapper


class RunManifest:
    """Provenance record written next to every command's reports."""

    def __init__(self, command: str, config: dict, seed: int | None, inputs):
        self.command = command
        self.config = config
        self.seed = seed
        self.inputs = [Path(p) for p in inputs]
        self.started = datetime.datetime.now(datetime.timezone.utc).isoformat()

    def write(self, out_dir: Path) -> Path:
        payload = {
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "tool_version": __version__,
            "input_digests": {
                p.name: lio.content_digest(p) for p in self.inputs
            },
            "started": self.started,
            "finished": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        }
        path = Path(out_dir) / "run_manifest.json"
        lio.write_json(path, payload)
        return path


MANIFEST_REF = {"manifest": "run_manifest.json"}


def _load_group(path) -> GroupMatrix:
    try:
        return lio.read_group_matrix(Path(path))
    except ValueError as exc:
        raise DataError(str(exc)) from None


def _report_stats(report: fp.TrialReport) -> dict:
    return {
        "trials": report.trials,
        "mean_accuracy": report.mean_accuracy,
        "std_accuracy": report.std_accuracy,
        "feature_budget": report.feature_budget,
        "seed": report.seed,
        "per_trial": list(report.per_trial),
        "notes": list(report.notes),
    }


@click.group()
@click.version_option(version=__version__)
def main():
    """Leverage-score connectome fingerprinting toolkit."""


@main.command("synth")
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--subjects", default=50, show_default=True)
@click.option("--regions", default=90, show_default=True)
@click.option("--signature-edges", default=60, show_default=True)
@click.option("--signature-strength", default=0.3, show_default=True)
@click.option("--common-strength", default=0.3, show_default=True)
@click.option("--common-loading-sd", default=0.0, show_default=True)
@click.option("--session-noise", default=0.12, show_default=True)
@click.option("--tasks", "n_tasks", default=0, show_default=True)
@click.option("--task-strength", default=0.25, show_default=True)
@click.option("--task-edges", default=60, show_default=True)
@click.option("--seed", default=0, show_default=True)
@command_errors
def cmd_synth(out_dir, subjects, regions, signature_edges, signature_strength,
              common_strength, common_loading_sd, session_noise, n_tasks,
              task_strength, task_edges, seed):
    """Generate a synthetic cohort with a planted signature answer key."""
    config = {
        "n_subjects": subjects,
        "n_regions": regions,
        "n_signature_edges": signature_edges,
        "signature_strength": signature_strength,
        "common_strength": common_strength,
        "common_loading_sd": common_loading_sd,
        "session_noise": session_noise,
        "n_tasks": n_tasks,
        "task_strength": task_strength,
        "n_task_edges": task_edges,
        "seed": seed,
    }
    cfg = synth.SynthConfig(**config)
    cohort = (
        synth.generate_task_cohort(cfg) if n_tasks >= 2 else synth.generate_cohort(cfg)
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    lio.write_group_matrix(out_dir / "g1.csv", cohort.g1, source_session="1")
    lio.write_group_matrix(out_dir / "g2.csv", cohort.g2, source_session="2")
    lio.write_answer_key(
        out_dir / "answer_key.json", cohort.signature_edges, cohort.task_edges
    )
    if cohort.task_groups:
        task_dir = out_dir / "tasks"
        for pair in cohort.task_groups:
            lio.write_group_matrix(
                task_dir / f"{pair.subject_id}_LR.csv", pair.lr, source_session="LR"
            )
            lio.write_group_matrix(
                task_dir / f"{pair.subject_id}_RL.csv", pair.rl, source_session="RL"
            )
    RunManifest("synth", config, seed, []).write(out_dir)
    click.echo(f"wrote cohort to {out_dir}")


@main.command("ingest")
@click.option("--timeseries-dir", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--parcellation", "parcellation_file",
              type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--gsr/--no-gsr", default=True, show_default=True,
              help="Global signal regression (resting-state default: on).")
@click.option("--bandpass", "band", default="0.008,0.1", show_default=True,
              help="Bandpass cutoffs lo,hi in Hz; 'off' to disable.")
@click.option("--tr", default=0.72, show_default=True, help="Sampling interval in seconds.")
@command_errors
def cmd_ingest(timeseries_dir, parcellation_file, out_dir, gsr, band, tr):
    """Preprocess per-subject time series into per-session group matrices."""
    if band == "off":
        cutoffs = None
    else:
        try:
            lo, hi = (float(v) for v in band.split(","))
        except ValueError:
            raise click.UsageError("--bandpass expects 'lo,hi' or 'off'")
        cutoffs = (lo, hi)

    try:
        parc = lio.read_parcellation(parcellation_file)
        sessions = lio.scan_timeseries_dir(timeseries_dir)
    except ValueError as exc:
        raise DataError(str(exc)) from None

    out_dir.mkdir(parents=True, exist_ok=True)
    for session, files in sorted(sessions.items()):
        if not files:
            continue
        vectors = []
        for subject, path in sorted(files.items()):
            try:
                ts = lio.read_timeseries_csv(path, subject, tr)
            except ValueError as exc:
                raise DataError(str(exc)) from None
            if ts.n_regions != parc.region_count:
                raise DataError(
                    f"{path}: {ts.n_regions} regions but parcellation has "
                    f"{parc.region_count}"
                )
            try:
                ts = zscore(ts)
                if gsr:
                    ts = global_signal_regression(ts)
                if cutoffs is not None:
                    ts = bandpass(ts, *cutoffs)
                vectors.append((subject, vectorize_upper(correlation_matrix(ts))))
            except ValueError as exc:
                raise ValueError(f"subject {subject}: {exc}") from None
        g = build_group_matrix(vectors)
        lio.write_group_matrix(out_dir / f"g{session}.csv", g, source_session=session)
    config = {"gsr": gsr, "bandpass": band, "tr": tr}
    RunManifest(
        "ingest", config, None, [parcellation_file]
    ).write(out_dir)
    click.echo(f"wrote group matrices to {out_dir}")


@main.command("fingerprint")
@click.argument("g1_file", type=click.Path(exists=True, path_type=Path))
@click.argument("g2_file", type=click.Path(exists=True, path_type=Path))
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--t", default=100, show_default=True, help="Feature budget.")
@click.option("--split", default=0.8, show_default=True, help="Training fraction.")
@click.option("--trials", default=1000, show_default=True)
@click.option("--null-trials", default=10000, show_default=True,
              help="Random-feature null trials for the empirical p-value.")
@click.option("--seed", default=0, show_default=True)
@command_errors
def cmd_fingerprint(g1_file, g2_file, out_dir, t, split, trials, null_trials, seed):
    """Leverage-selected identification vs the random-feature null."""
    g1 = _load_group(g1_file)
    g2 = _load_group(g2_file)
    if t < 2 or t > g1.n_edges:
        raise click.UsageError("--t must lie in [2, feature count]")
    train, test = fp.split_trial(g1, g2, split, t, trials, seed)
    null = fp.random_feature_trial(g1, g2, t, null_trials, seed + 1)
    dist = stats.empirical_pvalue(test.mean_accuracy, null)
    report = {
        "leverage_train": _report_stats(train),
        "leverage_test": _report_stats(test),
        "random_features": _report_stats(null),
        "empirical_p": dist.empirical_p,
        **MANIFEST_REF,
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    lio.write_json(out_dir / "fingerprint_report.json", report)
    RunManifest(
        "fingerprint",
        {"t": t, "split": split, "trials": trials, "null_trials": null_trials},
        seed,
        [g1_file, g2_file],
    ).write(out_dir)
    click.echo(
        f"leverage test {test.mean_accuracy:.2f}% vs random "
        f"{null.mean_accuracy:.2f}% (p={dist.empirical_p:.2e})"
    )


@main.command("sweep")
@click.argument("g1_file", type=click.Path(exists=True, path_type=Path))
@click.argument("g2_file", type=click.Path(exists=True, path_type=Path))
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--t-min", default=10, show_default=True)
@click.option("--t-max", default=200, show_default=True)
@click.option("--step", default=10, show_default=True)
@click.option("--trials", default=50, show_default=True)
@click.option("--seed", default=0, show_default=True)
@command_errors
def cmd_sweep(g1_file, g2_file, out_dir, t_min, t_max, step, trials, seed):
    """Test accuracy as a function of feature budget, plus the plateau point."""
    g1 = _load_group(g1_file)
    g2 = _load_group(g2_file)
    if t_min < 2 or step < 1:
        raise click.UsageError("--t-min must be >= 2 and --step >= 1")
    budgets = list(range(t_min, min(t_max, g1.n_edges) + 1, step)) or [t_min]
    curve = fp.sweep_feature_count(g1, g2, budgets, trials, seed)
    peak = float(curve.accuracies.max())
    reaching = curve.budgets[curve.accuracies >= 0.95 * peak]
    plateau_t = int(reaching[0])
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = ["budget,mean_test_accuracy"]
    for b, a in zip(curve.budgets, curve.accuracies):
        lines.append(f"{b},{a!r}")
    lio.atomic_write_text(out_dir / "sweep_curve.csv", "\n".join(lines) + "\n")
    summary = {
        "budgets": [int(b) for b in curve.budgets],
        "accuracies": [float(a) for a in curve.accuracies],
        "max_accuracy": peak,
        "plateau_t_95pct": plateau_t,
        **MANIFEST_REF,
    }
    lio.write_json(out_dir / "sweep_summary.json", summary)
    RunManifest(
        "sweep",
        {"t_min": t_min, "t_max": t_max, "step": step, "trials": trials},
        seed,
        [g1_file, g2_file],
    ).write(out_dir)
    click.echo(f"plateau at t={plateau_t} (max accuracy {peak:.2f}%)")


@main.command("enrich")
@click.argument("g1_file", type=click.Path(exists=True, path_type=Path))
@click.argument("g2_file", type=click.Path(exists=True, path_type=Path))
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--t", default=100, show_default=True)
@click.option("--trials", default=1000, show_default=True)
@click.option("--subset-fraction", default=0.8, show_default=True)
@click.option("--feature-pvalue", default=1e-20, show_default=True)
@click.option("--region-pvalue", default=1e-20, show_default=True)
@click.option("--min-degree", default=30, show_default=True)
@click.option("--seed", default=0, show_default=True)
@command_errors
def cmd_enrich(g1_file, g2_file, out_dir, t, trials, subset_fraction,
               feature_pvalue, region_pvalue, min_degree, seed):
    """High-confidence recurring edges and over-represented regions."""
    g1 = _load_group(g1_file)
    g2 = _load_group(g2_file)
    if t < 2 or t > g1.n_edges:
        raise click.UsageError("--t must lie in [2, feature count]")
    ids = np.array(g1.subject_ids)
    n_sub = max(2, int(round(subset_fraction * ids.size)))
    feature_sets = []
    for trial in range(trials):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(trial,))
        )
        subset = ids[rng.permutation(ids.size)[:n_sub]]
        feats = fp.select_features(g1.subset(subset), t)
        feature_sets.append(set(map(int, feats)))
    kept_edges, feature_results = stats.recurrent_features(
        feature_sets, g1.n_edges, feature_pvalue
    )
    kept_regions, region_results = stats.region_enrichment(
        kept_edges, g1.region_count, region_pvalue
    )
    plot_edges = stats.degree_filter(kept_edges, g1.region_count, min_degree)

    out_dir.mkdir(parents=True, exist_ok=True)
    passed_features = [r for r in feature_results if r.passed]
    lio.write_enrichment_tsv(out_dir / "features.tsv", passed_features)
    lio.write_enrichment_tsv(out_dir / "regions.tsv", region_results)
    lines = ["edge_id\tregion_i\tregion_j"]
    for e in sorted(plot_edges):
        i, j = edge_regions(e, g1.region_count)
        lines.append(f"{e}\t{i}\t{j}")
    lio.atomic_write_text(out_dir / "plot_edges.tsv", "\n".join(lines) + "\n")
    summary = {
        "high_confidence_edges": sorted(kept_edges),
        "enriched_regions": sorted(kept_regions),
        "plot_edges": sorted(plot_edges),
        **MANIFEST_REF,
    }
    if g2.n_subjects and len(kept_edges) >= 2:
        summary["match_accuracy_on_edges"] = fp.match_groups(
            g1, g2, sorted(kept_edges)
        ).accuracy_percent
    lio.write_json(out_dir / "enrich_summary.json", summary)
    RunManifest(
        "enrich",
        {
            "t": t,
            "trials": trials,
            "subset_fraction": subset_fraction,
            "feature_pvalue": feature_pvalue,
            "region_pvalue": region_pvalue,
            "min_degree": min_degree,
        },
        seed,
        [g1_file, g2_file],
    ).write(out_dir)
    if not kept_edges:
        click.echo("warning: no features passed the threshold", err=True)
    click.echo(
        f"{len(kept_edges)} high-confidence edges, "
        f"{len(kept_regions)} enriched regions"
    )


@main.command("restrict-eval")
@click.argument("g1_file", type=click.Path(exists=True, path_type=Path))
@click.argument("g2_file", type=click.Path(exists=True, path_type=Path))
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--regions", "region_list", required=True,
              help="Comma-separated region indices.")
@click.option("--random-trials", default=1000, show_default=True,
              help="Random same-size region sets for the baseline mean.")
@click.option("--seed", default=0, show_default=True)
@command_errors
def cmd_restrict_eval(g1_file, g2_file, out_dir, region_list, random_trials, seed):
    """Identification accuracy in a region-restricted feature space."""
    g1 = _load_group(g1_file)
    g2 = _load_group(g2_file)
    try:
        regions = sorted({int(v) for v in region_list.split(",")})
    except ValueError:
        raise click.UsageError("--regions expects comma-separated integers")
    if len(regions) < 2:
        raise click.UsageError("need at least 2 regions")
    if regions[0] < 0 or regions[-1] >= g1.region_count:
        raise click.UsageError("region index out of range")
    restricted = fp.full_matrix_match(
        restrict_to_regions(g1, regions), restrict_to_regions(g2, regions)
    )
    random_acc = []
    for trial in range(random_trials):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(trial,))
        )
        pick = sorted(rng.choice(g1.region_count, size=len(regions), replace=False))
        random_acc.append(
            fp.full_matrix_match(
                restrict_to_regions(g1, pick), restrict_to_regions(g2, pick)
            ).accuracy_percent
        )
    report = {
        "regions": regions,
        "restricted_accuracy": restricted.accuracy_percent,
        "random_region_trials": random_trials,
        "random_region_mean": float(np.mean(random_acc)) if random_acc else None,
        "random_region_std": float(np.std(random_acc)) if random_acc else None,
        **MANIFEST_REF,
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    lio.write_json(out_dir / "restrict_report.json", report)
    RunManifest(
        "restrict-eval",
        {"regions": regions, "random_trials": random_trials},
        seed,
        [g1_file, g2_file],
    ).write(out_dir)
    click.echo(f"restricted accuracy {restricted.accuracy_percent:.2f}%")


@main.command("baseline")
@click.argument("g1_file", type=click.Path(exists=True, path_type=Path))
@click.argument("g2_file", type=click.Path(exists=True, path_type=Path))
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--drop", "drop_list", default="0,1,10,20", show_default=True,
              help="Comma-separated drop_leading settings.")
@click.option("--keep", default=None, type=int, help="Last component kept (default all).")
@click.option("--t", default=100, show_default=True,
              help="Feature budget for the leverage-selection row.")
@click.option("--split", default=0.8, show_default=True)
@click.option("--trials", default=100, show_default=True)
@click.option("--seed", default=0, show_default=True)
@command_errors
def cmd_baseline(g1_file, g2_file, out_dir, drop_list, keep, t, split, trials, seed):
    """Training/test accuracy table: full matrix, PCA-denoised, leverage features."""
    g1 = _load_group(g1_file)
    g2 = _load_group(g2_file)
    try:
        drops = [int(v) for v in drop_list.split(",")]
    except ValueError:
        raise click.UsageError("--drop expects comma-separated integers")

    ids = np.array(g1.subject_ids)
    n_train = int(round(split * ids.size))
    if n_train < 2 or ids.size - n_train < 2:
        raise click.UsageError("split leaves fewer than 2 subjects on one side")

    rows = []
    full_train = np.empty(trials)
    full_test = np.empty(trials)
    pca = {d: (np.empty(trials), np.empty(trials)) for d in drops}
    for trial in range(trials):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(trial,))
        )
        perm = rng.permutation(ids.size)
        train_ids = list(ids[perm[:n_train]])
        test_ids = list(ids[perm[n_train:]])
        full_train[trial] = fp.full_matrix_match(
            g1.subset(train_ids), g2.subset(train_ids)
        ).accuracy_percent
        full_test[trial] = fp.full_matrix_match(
            g1.subset(test_ids), g2.subset(test_ids)
        ).accuracy_percent
        for d in drops:
            tr_acc, te_acc = fp.pca_denoise_match(
                g1, g2, d, keep, train_subjects=train_ids
            )
            pca[d][0][trial] = tr_acc
            pca[d][1][trial] = te_acc

    def row(label, train_vals, test_vals):
        return {
            "method": label,
            "train_mean": float(np.mean(train_vals)),
            "train_std": float(np.std(train_vals)),
            "test_mean": float(np.mean(test_vals)),
            "test_std": float(np.std(test_vals)),
        }

    rows.append(row("full_matrix", full_train, full_test))
    for d in drops:
        rows.append(row(f"pca_drop_{d}", pca[d][0], pca[d][1]))
    lev_train, lev_test = fp.split_trial(g1, g2, split, t, trials, seed)
    rows.append(row("principal_features", lev_train.per_trial, lev_test.per_trial))

    out_dir.mkdir(parents=True, exist_ok=True)
    lines = ["method,train_mean,train_std,test_mean,test_std"]
    for r in rows:
        lines.append(
            f"{r['method']},{r['train_mean']!r},{r['train_std']!r},"
            f"{r['test_mean']!r},{r['test_std']!r}"
        )
    lio.atomic_write_text(out_dir / "baseline_table.csv", "\n".join(lines) + "\n")
    lio.write_json(out_dir / "baseline_table.json", {"rows": rows, **MANIFEST_REF})
    RunManifest(
        "baseline",
        {"drop": drops, "keep": keep, "t": t, "split": split, "trials": trials},
        seed,
        [g1_file, g2_file],
    ).write(out_dir)
    click.echo(f"wrote baseline table with {len(rows)} rows")


@main.command("tasks")
@click.argument("task_dir", type=click.Path(exists=True, path_type=Path))
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--t", default=100, show_default=True)
@click.option("--threshold", default=1e-10, show_default=True,
              help="Recurrence p-value threshold for feature aggregation.")
@click.option("--split", default=0.8, show_default=True)
@click.option("--trials", default=100, show_default=True)
@click.option("--seed", default=0, show_default=True)
@command_errors
def cmd_tasks(task_dir, out_dir, t, threshold, split, trials, seed):
    """Task identification with recurrence-aggregated features."""
    pairs = []
    lr_files = sorted(Path(task_dir).glob("*_LR.csv"))
    if not lr_files:
        raise DataError(f"{task_dir}: no <subject>_LR.csv files found")
    for lr_path in lr_files:
        subject = lr_path.name[: -len("_LR.csv")]
        rl_path = lr_path.with_name(f"{subject}_RL.csv")
        if not rl_path.exists():
            raise DataError(f"{rl_path}: missing RL counterpart")
        pairs.append(
            synth.TaskGroupPair(
                subject_id=subject,
                lr=_load_group(lr_path),
                rl=_load_group(rl_path),
            )
        )
    n_tasks = len(pairs[0].lr.subject_ids)
    if n_tasks < 2:
        click.echo("warning: single task, identification is degenerate", err=True)
    report = fp.task_identification(pairs, split, t, threshold, trials, seed)

    # full-feature reference: match every subject's tasks on all edges
    full = [
        fp.full_matrix_match(p.lr, p.rl).accuracy_percent for p in pairs
    ]

    # per-task edge localization over random subject subsets
    n_edges = pairs[0].lr.n_edges
    per_task_edges = {}
    if len(pairs) >= 3 and n_tasks >= 2:
        n_sub = max(2, int(round(split * len(pairs))))
        for ti, task_id in enumerate(pairs[0].lr.subject_ids):
            stacked = GroupMatrix(
                subject_ids=tuple(p.subject_id for p in pairs),
                values=np.vstack([p.lr.values[ti] for p in pairs]),
                region_count=pairs[0].lr.region_count,
            )
            sets = []
            for trial in range(min(trials, 200)):
                rng = np.random.default_rng(
                    np.random.SeedSequence(entropy=seed, spawn_key=(ti, trial))
                )
                subset = [
                    stacked.subject_ids[i]
                    for i in rng.permutation(len(pairs))[:n_sub]
                ]
                sets.append(
                    set(map(int, fp.select_features(stacked.subset(subset), min(t, n_edges))))
                )
            kept, _ = stats.recurrent_features(sets, n_edges, threshold)
            per_task_edges[task_id] = sorted(kept)

    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "aggregated_features": _report_stats(report),
        "full_feature_mean": float(np.mean(full)),
        "per_task_edges": per_task_edges,
        **MANIFEST_REF,
    }
    lio.write_json(out_dir / "task_report.json", payload)
    RunManifest(
        "tasks",
        {"t": t, "threshold": threshold, "split": split, "trials": trials},
        seed,
        [],
    ).write(out_dir)
    click.echo(
        f"aggregated {report.mean_accuracy:.2f}% vs full {np.mean(full):.2f}%"
    )


if __name__ == "__main__":
    main()
