import os

import numpy as np
import pytest

from chordbench.annotations import normalize, read_lab
from chordbench.harness import (ExperimentConfig, HarnessError,
                                SongEntry, balance_datasets,
                                default_experiments, emit_report,
                                load_corpus, load_experiments, make_folds,
                                read_summary_csv, run_experiment, summarize)


def songs_with_performances(n_songs, n_perf=2, dataset="d"):
    return [SongEntry(song_id=f"song{i:03d}", performance_id=f"p{j}",
                      dataset=dataset)
            for i in range(n_songs) for j in range(n_perf)]


class TestMakeFolds:
    def test_pairing_constraint_and_balance(self):
        entries = songs_with_performances(24, 2)
        plan = make_folds(entries, seed=5)
        by_song = {}
        for e in entries:
            by_song.setdefault(e.song_id, set()).add(plan.fold_of(e))
        assert all(len(folds) == 1 for folds in by_song.values())
        sizes = np.bincount([plan.fold_of_song[s] for s in by_song], minlength=6)
        assert np.all(sizes == 4)

    def test_six_songs_one_per_fold(self):
        entries = songs_with_performances(6, 1)
        plan = make_folds(entries, seed=1)
        assert sorted(plan.fold_of_song.values()) == list(range(6))

    def test_input_order_invariance(self):
        entries = songs_with_performances(13, 2)
        plan_a = make_folds(entries, seed=9)
        plan_b = make_folds(list(reversed(entries)), seed=9)
        assert plan_a.fold_of_song == plan_b.fold_of_song

    def test_too_few_songs(self):
        with pytest.raises(HarnessError):
            make_folds(songs_with_performances(5), seed=0)

    def test_folds_partition_songs(self):
        entries = songs_with_performances(20, 2)
        plan = make_folds(entries, seed=3)
        assert set(plan.fold_of_song) == {e.song_id for e in entries}
        assert set(plan.fold_of_song.values()) <= set(range(6))


class TestBalanceDatasets:
    def entries(self, n, dataset):
        return [SongEntry(song_id=f"{dataset}{i:05d}", dataset=dataset)
                for i in range(n)]

    def test_paper_scheme(self):
        datasets = {"big": self.entries(3000, "big"),
                    "mid": self.entries(739, "mid"),
                    "small": self.entries(48, "small")}
        balanced = balance_datasets(datasets, seed=4, quota=192)
        assert all(len(v) == 192 for v in balanced.values())
        small_counts = {}
        for e in balanced["small"]:
            small_counts[e.song_id] = small_counts.get(e.song_id, 0) + 1
        assert all(c == 4 for c in small_counts.values())

    def test_at_quota_unchanged(self):
        datasets = {"exact": self.entries(192, "exact")}
        balanced = balance_datasets(datasets, seed=4, quota=192)
        assert balanced["exact"] == datasets["exact"]

    def test_subsample_is_deterministic(self):
        datasets = {"big": self.entries(500, "big")}
        a = balance_datasets(datasets, seed=8, quota=100)
        b = balance_datasets(datasets, seed=8, quota=100)
        assert a == b
        c = balance_datasets(datasets, seed=9, quota=100)
        assert a != c

    def test_non_divisible_topup(self):
        datasets = {"odd": self.entries(50, "odd")}
        balanced = balance_datasets(datasets, seed=2, quota=192)
        assert len(balanced["odd"]) == 192
        counts = {}
        for e in balanced["odd"]:
            counts[e.song_id] = counts.get(e.song_id, 0) + 1
        assert set(counts.values()) <= {3, 4}

    def test_empty_dataset_error(self):
        with pytest.raises(HarnessError):
            balance_datasets({"empty": []}, seed=0)


class EchoRunner:
    """Perfect predictor: returns the reference annotation."""

    def __init__(self):
        self.fit_calls = 0

    def fit(self, train_entries, seed):
        self.fit_calls += 1

        def predictor(entry):
            return normalize(read_lab(entry.label_path))
        return predictor


@pytest.fixture()
def corpus(tiny_dataset):
    out, _ = tiny_dataset
    return load_corpus(os.path.dirname(out), {"tiny": os.path.basename(out)})


class TestRunExperiment:
    def config(self, **kw):
        base = dict(id=0, train_datasets=(), model="template",
                    eval_datasets=("tiny",), seed=7)
        base.update(kw)
        return ExperimentConfig(**base)

    def test_row_accounting(self, corpus, tmp_path):
        plan = make_folds(corpus["tiny"], seed=0)
        summary = run_experiment(self.config(), plan, corpus, tmp_path)
        # one row per (dataset, metric)
        assert len(summary) == 3
        assert all(row["folds"] == 6 for row in summary)
        for fold in range(6):
            assert os.path.exists(tmp_path / "exp_0" / f"fold_{fold}" / "scores.csv")

    def test_perfect_predictor_scores_100(self, corpus, tmp_path):
        plan = make_folds(corpus["tiny"], seed=0)
        summary = run_experiment(self.config(), plan, corpus, tmp_path,
                                 runner=EchoRunner())
        for row in summary:
            assert row["mean"] == pytest.approx(100.0)
            assert row["std"] == pytest.approx(0.0)

    def test_resumable_skips_completed_folds(self, corpus, tmp_path):
        plan = make_folds(corpus["tiny"], seed=0)
        runner = EchoRunner()
        first = run_experiment(self.config(), plan, corpus, tmp_path, runner=runner)
        assert runner.fit_calls == 6
        second = run_experiment(self.config(), plan, corpus, tmp_path, runner=runner)
        assert runner.fit_calls == 6  # nothing recomputed
        assert first == second

    def test_summary_matches_hand_computation(self, corpus, tmp_path):
        from chordbench.harness import _read_fold_scores
        plan = make_folds(corpus["tiny"], seed=0)
        config = self.config()
        summary = run_experiment(config, plan, corpus, tmp_path)
        rows = []
        for fold in range(6):
            rows.extend(_read_fold_scores(
                tmp_path / "exp_0" / f"fold_{fold}" / "scores.csv"))
        for metric in ("root", "majmin", "ccm"):
            fold_values = []
            for fold in range(6):
                picked = [r for r in rows
                          if r["fold"] == fold and r["metric"] == metric]
                num = sum(r["score"] * r["duration_s"] for r in picked)
                den = sum(r["duration_s"] for r in picked)
                fold_values.append(100.0 * num / den)
            expected_mean = float(np.mean(fold_values))
            expected_std = float(np.std(fold_values, ddof=1))
            row = next(r for r in summary if r["metric"] == metric)
            assert row["mean"] == pytest.approx(expected_mean, abs=1e-9)
            assert row["std"] == pytest.approx(expected_std, abs=1e-9)

    def test_rerun_from_scratch_is_bit_exact(self, corpus, tmp_path):
        plan = make_folds(corpus["tiny"], seed=0)
        first = run_experiment(self.config(), plan, corpus, tmp_path / "a")
        second = run_experiment(self.config(), plan, corpus, tmp_path / "b")
        assert first == second
        for fold in range(6):
            a = (tmp_path / "a" / "exp_0" / f"fold_{fold}" / "scores.csv").read_bytes()
            b = (tmp_path / "b" / "exp_0" / f"fold_{fold}" / "scores.csv").read_bytes()
            assert a == b

    def test_unknown_dataset_error(self, corpus, tmp_path):
        plan = make_folds(corpus["tiny"], seed=0)
        with pytest.raises(HarnessError, match="unknown dataset"):
            run_experiment(self.config(eval_datasets=("missing",)), plan,
                           corpus, tmp_path)

    def test_trainable_model_requires_train_data(self):
        with pytest.raises(HarnessError):
            ExperimentConfig(id=1, train_datasets=(), model="labeler",
                             eval_datasets=("tiny",))


class TestReport:
    def rows(self):
        return [
            {"experiment": 0, "dataset": "a", "metric": "root",
             "mean": 91.2345, "std": 1.5, "folds": 6},
            {"experiment": 0, "dataset": "a", "metric": "ccm",
             "mean": 95.0, "std": 0.5, "folds": 6},
            {"experiment": 1, "dataset": "a", "metric": "root",
             "mean": 93.5, "std": 2.0, "folds": 6},
            {"experiment": 1, "dataset": "a", "metric": "ccm",
             "mean": 94.0, "std": 0.25, "folds": 6},
        ]

    def test_csv_round_trip_exact(self, tmp_path):
        p = tmp_path / "summary.csv"
        emit_report(self.rows(), p)
        assert read_summary_csv(p) == self.rows()

    def test_one_marked_cell_per_column(self, tmp_path):
        csv_p = tmp_path / "summary.csv"
        txt_p = tmp_path / "summary.txt"
        emit_report(self.rows(), csv_p, txt_p)
        text = txt_p.read_text()
        assert text.count("*") == 2
        lines = text.splitlines()
        assert "a/root" in lines[0] and "a/ccm" in lines[0]
        assert "93.50 ± 2.00*" in text   # experiment 1 wins root
        assert "95.00 ± 0.50*" in text   # experiment 0 wins ccm

    def test_empty_error(self, tmp_path):
        with pytest.raises(HarnessError):
            emit_report([], tmp_path / "x.csv")


class TestExperimentsConfig:
    def test_default_matrix_loads(self, tmp_path):
        import json
        p = tmp_path / "experiments.json"
        p.write_text(json.dumps(default_experiments()))
        datasets, experiments = load_experiments(p)
        assert set(datasets) == {"synthA", "synthB"}
        assert [e.id for e in experiments] == [0, 1, 2, 3]
        assert experiments[0].model == "template"
        assert experiments[3].balance
        assert experiments[3].train_datasets == ("synthA", "synthB")


def test_summarize_uniform_flag(corpus, tmp_path):
    plan = make_folds(corpus["tiny"], seed=0)
    config = ExperimentConfig(id=0, train_datasets=(), model="template",
                              eval_datasets=("tiny",), seed=7)
    run_experiment(config, plan, corpus, tmp_path, runner=EchoRunner())
    from chordbench.harness import _read_fold_scores
    rows = []
    for fold in range(6):
        rows.extend(_read_fold_scores(
            tmp_path / "exp_0" / f"fold_{fold}" / "scores.csv"))
    weighted = summarize(config, rows, 6)
    uniform = summarize(config, rows, 6, duration_weighted=False)
    assert all(r["mean"] == pytest.approx(100.0) for r in weighted + uniform)
