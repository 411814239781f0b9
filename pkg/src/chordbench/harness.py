"""Cross-validation planning, experiment orchestration, and reporting.

An experiment trains a recognizer on the training split of one or more
datasets and scores its predictions on the validation split of each
evaluation dataset, for every fold of a shared fold plan.  Fold assignment
is by song, so multiple performances of the same song always share a fold.
Completed folds are persisted as ``fold_<i>/scores.csv`` under the
experiment directory and are not recomputed on rerun.

Summary scores are duration-weighted within a fold and reported as
``mean +/- std`` over folds, in percent.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .annotations import normalize, read_lab
from .features import load_wav, cqt, log_amplitude, zscore_apply, zscore_fit, window_slices, align_labels
from .labeler import LabelerConfig, SequenceExample, predict_track, train
from .metrics import TrackScore, aggregate_fold, evaluate_pair
from .templates import default_templates, fold_to_chroma, template_predict
from .features import frames_to_track
from .synth import read_manifest

DEFAULT_METRICS = ("root", "majmin", "ccm")
DEFAULT_QUOTA = 192


class HarnessError(ValueError):
    """Raised for invalid experiment setups."""


@dataclass(frozen=True)
class SongEntry:
    song_id: str
    performance_id: str | None = None
    dataset: str = ""
    audio_path: str = ""
    label_path: str = ""

    @property
    def key(self):
        return (self.song_id, self.performance_id)


@dataclass(frozen=True)
class FoldPlan:
    fold_of_song: dict
    k: int
    seed: int

    def fold_of(self, entry: SongEntry) -> int:
        return self.fold_of_song[entry.song_id]


def make_folds(songs, seed, k: int = 6) -> FoldPlan:
    """Assign songs to ``k`` folds, keeping same-song performances together.

    Songs are canonically sorted before the seeded shuffle, so the plan does
    not depend on input order; fold sizes differ by at most one song.
    """
    song_ids = sorted({e.song_id for e in songs})
    if len(song_ids) < k:
        raise HarnessError(f"need at least {k} distinct songs, got {len(song_ids)}")
    rng = np.random.Generator(np.random.PCG64(seed))
    order = rng.permutation(len(song_ids))
    assignment = {song_ids[int(j)]: i % k for i, j in enumerate(order)}
    return FoldPlan(assignment, k, seed)


def balance_datasets(datasets: dict, seed, quota: int = DEFAULT_QUOTA) -> dict:
    """Bring every dataset to ``quota`` entries.

    Larger datasets are subsampled deterministically; smaller ones are
    repeated whole-number times, topped up with a seeded sample of the
    remainder.  A dataset already at quota passes through unchanged.
    """
    out = {}
    for name in sorted(datasets):
        entries = sorted(datasets[name], key=lambda e: (e.song_id, str(e.performance_id)))
        if not entries:
            raise HarnessError(f"dataset {name!r} is empty")
        rng = np.random.Generator(np.random.PCG64([seed, _name_entropy(name)]))
        n = len(entries)
        if n == quota:
            out[name] = list(datasets[name])
        elif n > quota:
            picked = rng.permutation(n)[:quota]
            out[name] = [entries[int(i)] for i in sorted(picked)]
        else:
            reps = quota // n
            remainder = quota - reps * n
            balanced = entries * reps
            extra = rng.permutation(n)[:remainder]
            balanced += [entries[int(i)] for i in sorted(extra)]
            out[name] = balanced
    return out


def _name_entropy(name: str) -> int:
    return int.from_bytes(name.encode("utf-8")[:8].ljust(8, b"\0"), "little")


@dataclass(frozen=True)
class ExperimentConfig:
    id: int
    train_datasets: tuple
    model: str
    eval_datasets: tuple
    balance: bool = False
    seed: int = 0
    balance_quota: int | None = None
    model_params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "train_datasets", tuple(self.train_datasets))
        object.__setattr__(self, "eval_datasets", tuple(self.eval_datasets))
        if self.model not in ("template", "labeler"):
            raise HarnessError(f"unknown model {self.model!r}")
        if self.model != "template" and not self.train_datasets:
            raise HarnessError("trainable model requires training datasets")


class TemplateRunner:
    """Training-free baseline: log-CQT fold plus triad template matching."""

    def __init__(self):
        self._cache = {}
        self.templates = default_templates()

    def _chroma(self, entry: SongEntry):
        if entry.audio_path not in self._cache:
            feats = log_amplitude(cqt(load_wav(entry.audio_path)))
            self._cache[entry.audio_path] = fold_to_chroma(feats)
        return self._cache[entry.audio_path]

    def fit(self, train_entries, seed):
        def predictor(entry: SongEntry):
            chroma = self._chroma(entry)
            classes = template_predict(chroma, self.templates)
            return frames_to_track(classes, chroma.hop_samples,
                                   chroma.sample_rate_hz, entry.song_id)
        return predictor


class LabelerRunner:
    """Trains the self-attention labeler on folded-chroma windows."""

    def __init__(self, model_dim=32, n_layers=1, n_heads=4, lr=3e-3,
                 batch_size=8, max_epochs=30, patience=5,
                 window_frames=108, window_stride=54):
        self.model_dim = model_dim
        self.n_layers = n_layers
        self.n_heads = n_heads
        self.lr = lr
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.window_frames = window_frames
        self.window_stride = window_stride
        self._cache = {}

    def _features_and_labels(self, entry: SongEntry):
        if entry.audio_path not in self._cache:
            feats = fold_to_chroma(log_amplitude(cqt(load_wav(entry.audio_path))))
            track = normalize(read_lab(entry.label_path))
            labels = align_labels(track, feats)
            self._cache[entry.audio_path] = (feats, labels)
        return self._cache[entry.audio_path]

    def fit(self, train_entries, seed):
        feats_list = [self._features_and_labels(e)[0] for e in train_entries]
        stats = zscore_fit(feats_list)
        items = []
        for entry in train_entries:
            feats, labels = self._features_and_labels(entry)
            normed = zscore_apply(feats, stats)
            for window in window_slices(normed, self.window_frames,
                                        self.window_stride):
                targets = np.zeros(window.matrix.n_frames, dtype=np.int64)
                mask = np.zeros(window.matrix.n_frames, dtype=bool)
                n = window.valid_frames
                targets[:n] = labels[window.start_frame:window.start_frame + n]
                mask[:n] = True
                items.append(SequenceExample(window.matrix.values, targets, mask))
        config = LabelerConfig(input_dim=12, model_dim=self.model_dim,
                               n_layers=self.n_layers, n_heads=self.n_heads,
                               context_frames=self.window_frames, seed=seed)
        params, _report = train(config, items, lr=self.lr,
                                batch_size=self.batch_size,
                                max_epochs=self.max_epochs,
                                patience=self.patience)

        def predictor(entry: SongEntry):
            feats, _ = self._features_and_labels(entry)
            normed = zscore_apply(feats, stats)
            return predict_track(params, config, normed, entry.song_id)
        return predictor


def make_runner(config: ExperimentConfig):
    if config.model == "template":
        return TemplateRunner()
    return LabelerRunner(**config.model_params)


def experiment_seed(config_seed: int, fold: int) -> int:
    ss = np.random.SeedSequence(entropy=config_seed, spawn_key=(fold,))
    return int(ss.generate_state(1, np.uint64)[0] % (2 ** 31))


def run_experiment(config: ExperimentConfig, fold_plan: FoldPlan, corpus: dict,
                   out_dir, runner=None, metrics=DEFAULT_METRICS) -> list:
    """Run one experiment across all folds; returns summary rows.

    ``corpus`` maps dataset name to its song entries.  Folds with an
    existing ``scores.csv`` are loaded instead of recomputed, so interrupted
    runs resume where they stopped.
    """
    for name in set(config.train_datasets) | set(config.eval_datasets):
        if name not in corpus:
            raise HarnessError(f"experiment {config.id}: unknown dataset {name!r}")
    if runner is None:
        runner = make_runner(config)
    exp_dir = os.path.join(out_dir, f"exp_{config.id}")
    all_rows = []
    for fold in range(fold_plan.k):
        fold_dir = os.path.join(exp_dir, f"fold_{fold}")
        scores_path = os.path.join(fold_dir, "scores.csv")
        if os.path.exists(scores_path):
            all_rows.extend(_read_fold_scores(scores_path))
            continue
        try:
            rows = _run_fold(config, fold_plan, corpus, fold, runner, metrics)
        except Exception as exc:
            raise RuntimeError(
                f"experiment {config.id}, fold {fold}: {exc}") from exc
        os.makedirs(fold_dir, exist_ok=True)
        _write_fold_scores(scores_path, rows)
        all_rows.extend(rows)
    summary = summarize(config, all_rows, fold_plan.k, metrics)
    return summary


def _run_fold(config, fold_plan, corpus, fold, runner, metrics):
    train_by_dataset = {
        name: [e for e in corpus[name] if fold_plan.fold_of(e) != fold]
        for name in config.train_datasets}
    if config.balance and len(config.train_datasets) > 1:
        quota = config.balance_quota
        if quota is None:
            quota = min(len(v) for v in train_by_dataset.values())
        train_by_dataset = balance_datasets(train_by_dataset,
                                            seed=config.seed, quota=quota)
    train_entries = [e for name in config.train_datasets
                     for e in train_by_dataset[name]]
    predictor = runner.fit(train_entries, experiment_seed(config.seed, fold))
    rows = []
    for name in config.eval_datasets:
        for entry in corpus[name]:
            if fold_plan.fold_of(entry) != fold:
                continue
            reference = normalize(read_lab(entry.label_path))
            predicted = predictor(entry)
            scored = evaluate_pair(reference, predicted, metrics)
            for metric in metrics:
                ts = scored[metric]
                rows.append({"fold": fold, "dataset": name,
                             "song_id": entry.song_id,
                             "metric": metric, "score": ts.value,
                             "duration_s": ts.total_duration_s})
    return rows


_FOLD_FIELDS = ["fold", "dataset", "song_id", "metric", "score", "duration_s"]


def _write_fold_scores(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=_FOLD_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow({**row, "score": repr(float(row["score"])),
                             "duration_s": repr(float(row["duration_s"]))})


def _read_fold_scores(path):
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rows.append({"fold": int(row["fold"]), "dataset": row["dataset"],
                         "song_id": row["song_id"], "metric": row["metric"],
                         "score": float(row["score"]),
                         "duration_s": float(row["duration_s"])})
    return rows


def summarize(config, rows, k, metrics=DEFAULT_METRICS,
              duration_weighted: bool = True) -> list:
    """Fold-level aggregation and percent-scale mean/std over folds."""
    summary = []
    for dataset in config.eval_datasets:
        for metric in metrics:
            fold_scores = []
            for fold in range(k):
                picked = [TrackScore(r["score"], r["duration_s"]) for r in rows
                          if r["fold"] == fold and r["dataset"] == dataset
                          and r["metric"] == metric]
                if picked:
                    fold_scores.append(aggregate_fold(picked, duration_weighted))
            values = 100.0 * np.array(fold_scores)
            summary.append({"experiment": config.id, "dataset": dataset,
                            "metric": metric,
                            "mean": float(values.mean()),
                            "std": float(values.std(ddof=1)) if len(values) > 1 else 0.0,
                            "folds": len(values)})
    return summary


_SUMMARY_FIELDS = ["experiment", "dataset", "metric", "mean", "std", "folds"]


def emit_report(rows, csv_path, text_path=None) -> None:
    """Write summary rows as CSV plus an aligned text table.

    The text table has one row per experiment and one column per
    (dataset, metric) pair; each cell shows ``mean +/- std`` in percent and
    the largest mean in each column is marked with ``*``.
    """
    if not rows:
        raise HarnessError("no summary rows to report")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=_SUMMARY_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow({**row, "mean": repr(row["mean"]),
                             "std": repr(row["std"])})
    if text_path is None:
        return
    experiments = sorted({r["experiment"] for r in rows})
    columns = []
    for row in rows:
        col = (row["dataset"], row["metric"])
        if col not in columns:
            columns.append(col)
    cells = {(r["experiment"], (r["dataset"], r["metric"])): r for r in rows}
    col_max = {col: max(cells[(e, col)]["mean"] for e in experiments
                        if (e, col) in cells)
               for col in columns}
    headers = ["exp"] + [f"{d}/{m}" for d, m in columns]
    lines = []
    for e in experiments:
        line = [str(e)]
        for col in columns:
            row = cells.get((e, col))
            if row is None:
                line.append("-")
                continue
            mark = "*" if row["mean"] == col_max[col] else " "
            line.append(f"{row['mean']:.2f} ± {row['std']:.2f}{mark}")
        lines.append(line)
    widths = [max(len(headers[i]), max(len(l[i]) for l in lines))
              for i in range(len(headers))]
    with open(text_path, "w") as fh:
        fh.write("  ".join(h.ljust(w) for h, w in zip(headers, widths)) + "\n")
        fh.write("  ".join("-" * w for w in widths) + "\n")
        for line in lines:
            fh.write("  ".join(c.ljust(w) for c, w in zip(line, widths)) + "\n")


def read_summary_csv(path) -> list:
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rows.append({"experiment": int(row["experiment"]),
                         "dataset": row["dataset"], "metric": row["metric"],
                         "mean": float(row["mean"]), "std": float(row["std"]),
                         "folds": int(row["folds"])})
    return rows


def load_corpus(data_root, datasets: dict) -> dict:
    """Load song entries from per-dataset manifests.

    ``datasets`` maps dataset name to its directory under ``data_root``;
    each directory must contain ``manifest.jsonl`` (audio paths relative to
    the directory, labels alongside with a .lab extension).
    """
    corpus = {}
    for name, subdir in datasets.items():
        base = os.path.join(data_root, subdir)
        manifest = os.path.join(base, "manifest.jsonl")
        entries = []
        for item in read_manifest(manifest):
            audio = os.path.join(base, item["path"])
            label = os.path.splitext(audio)[0] + ".lab"
            entries.append(SongEntry(song_id=f"{name}/{item['id']}",
                                     dataset=name, audio_path=audio,
                                     label_path=label))
        corpus[name] = entries
    return corpus


def load_experiments(path):
    """Read an experiments config file (format in docs/experiments.md)."""
    with open(path) as fh:
        data = json.load(fh)
    datasets = data.get("datasets", {})
    experiments = []
    for item in data.get("experiments", []):
        experiments.append(ExperimentConfig(
            id=int(item["id"]),
            train_datasets=tuple(item.get("train_datasets", ())),
            model=item["model"],
            eval_datasets=tuple(item["eval_datasets"]),
            balance=bool(item.get("balance", False)),
            seed=int(item.get("seed", 0)),
            balance_quota=item.get("balance_quota"),
            model_params=item.get("model_params", {})))
    return datasets, experiments


def default_experiments(seed: int = 7) -> dict:
    """A small experiment matrix over two synthetic datasets.

    Experiment 0 is the training-free template baseline; 1-3 train the
    labeler on each dataset and on their balanced union, all evaluated on
    both datasets.
    """
    evals = ["synthA", "synthB"]
    return {
        "datasets": {"synthA": "synthA", "synthB": "synthB"},
        "experiments": [
            {"id": 0, "model": "template", "train_datasets": [],
             "eval_datasets": evals, "seed": seed},
            {"id": 1, "model": "labeler", "train_datasets": ["synthA"],
             "eval_datasets": evals, "seed": seed},
            {"id": 2, "model": "labeler", "train_datasets": ["synthB"],
             "eval_datasets": evals, "seed": seed},
            {"id": 3, "model": "labeler", "train_datasets": ["synthA", "synthB"],
             "eval_datasets": evals, "balance": True, "seed": seed},
        ],
    }
