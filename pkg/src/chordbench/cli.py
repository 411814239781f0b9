"""Command-line entry points (``chordbench <subcommand>``).

Thin wrappers over the library: convert, eval, stats, extract, synth,
train, predict, and xval.  Run ``chordbench <subcommand> --help`` for the
flags of each.
"""

from __future__ import annotations

import argparse
import csv
import glob
import json
import os
import sys

import numpy as np

from . import annotations, checkpoint, features, harness, labeler, metrics, stats, synth, templates
from .labels import transpose


def _lab_files(directory):
    return sorted(glob.glob(os.path.join(directory, "*.lab")))


def cmd_convert(args):
    readers = {
        "lab": annotations.read_lab,
        "csv": lambda p: annotations.read_winterreise_csv(p, notation=args.notation),
        "arff": annotations.read_aam_arff,
    }
    track = readers[args.src_format](args.infile)
    if args.dst_format != "lab":
        raise SystemExit(f"unsupported output format {args.dst_format!r}")
    annotations.write_lab(track, args.outfile)
    print(f"wrote {args.outfile} ({len(track)} segments)")


def cmd_eval(args):
    names = [m.strip() for m in args.metrics.split(",") if m.strip()]
    for name in names:
        if name not in metrics.METRICS:
            raise SystemExit(f"unknown metric {name!r}")
    rows = []
    for ref_path in _lab_files(args.ref):
        song_id = os.path.splitext(os.path.basename(ref_path))[0]
        pred_path = os.path.join(args.pred, song_id + ".lab")
        if not os.path.exists(pred_path):
            raise SystemExit(f"no prediction for {song_id!r} in {args.pred}")
        reference = annotations.normalize(annotations.read_lab(ref_path))
        predicted = annotations.read_lab(pred_path)
        scored = metrics.evaluate_pair(reference, predicted, names)
        for name in names:
            ts = scored[name]
            rows.append([song_id, name, repr(ts.value), repr(ts.total_duration_s)])
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["song_id", "metric", "score", "duration_s"])
        writer.writerows(rows)
    print(f"wrote {args.out} ({len(rows)} rows)")


def cmd_stats(args):
    tracks = [annotations.read_lab(p) for p in _lab_files(args.indir)]
    if not tracks:
        raise SystemExit(f"no .lab files in {args.indir}")
    if args.occurrences:
        counts = stats.chord_occurrences(tracks)
        stats.export_histogram_csv(counts, args.occurrences, drop_n=args.drop_n)
        print(f"wrote {args.occurrences}")
    if args.transitions:
        matrix = stats.chord_transitions(tracks, skip_n=args.skip_n_transitions)
        stats.export_transitions_csv(matrix, args.transitions, drop_n=args.drop_n)
        print(f"wrote {args.transitions}")


def _parse_shift_range(text):
    lo, hi = text.split("..")
    lo, hi = int(lo), int(hi)
    if lo > hi:
        raise SystemExit(f"bad shift range {text!r}")
    return range(lo, hi + 1)


def cmd_extract(args):
    shifts = _parse_shift_range(args.aug) if args.aug else [0]
    os.makedirs(args.out, exist_ok=True)
    wavs = sorted(glob.glob(os.path.join(args.indir, "*.wav")))
    if not wavs:
        raise SystemExit(f"no .wav files in {args.indir}")
    for wav_path in wavs:
        stem = os.path.splitext(os.path.basename(wav_path))[0]
        lab_path = os.path.join(args.labels, stem + ".lab")
        track = annotations.normalize(annotations.read_lab(lab_path))
        logcqt = features.log_amplitude(features.cqt(features.load_wav(wav_path)))
        for k in shifts:
            shifted = features.pitch_shift_cqt(logcqt, k)
            shifted_track = annotations.SegmentTrack(
                tuple(annotations.TimedSegment(s.start_s, s.end_s,
                                               transpose(s.label, k))
                      for s in track), track.source_id)
            labels = features.align_labels(shifted_track, shifted)
            out_path = os.path.join(args.out, f"{stem}.shift{k:+d}.cbf")
            features.write_feature_cache(out_path, shifted, labels)
        print(f"{stem}: {len(shifts)} shift(s)")
    print(f"wrote caches to {args.out}")


def cmd_synth(args):
    if args.model == "pop":
        model = synth.default_pop_model()
    elif args.model == "uniform":
        model = synth.uniform_model()
    else:
        matrix = stats.read_transitions_csv(args.model)
        histogram = (stats.read_histogram_csv(args.hist) if args.hist
                     else matrix.sum(axis=1))
        model = synth.model_from_stats(matrix, histogram)
    spec = synth.SynthSpec(n_tracks=args.n, track_length_s=args.length,
                           seed=args.seed)
    entries = synth.emit_dataset(spec, model, args.out)
    print(f"wrote {len(entries)} tracks to {args.out}")


def _load_cached_items(data_dir):
    paths = sorted(glob.glob(os.path.join(data_dir, "*.cbf")))
    if not paths:
        raise SystemExit(f"no .cbf feature caches in {data_dir}")
    pairs = []
    for path in paths:
        matrix, labels = features.read_feature_cache(path)
        if labels is None:
            raise SystemExit(f"{path}: cache has no labels; re-run extract")
        pairs.append((matrix, labels))
    return pairs


def cmd_train(args):
    with open(args.config) as fh:
        cfg = json.load(fh)
    pairs = _load_cached_items(args.data)
    stats_ = features.zscore_fit([m for m, _ in pairs])
    items = []
    for matrix, labels in pairs:
        normed = features.zscore_apply(matrix, stats_)
        for window in features.window_slices(normed):
            targets = np.zeros(window.matrix.n_frames, dtype=np.int64)
            mask = np.zeros(window.matrix.n_frames, dtype=bool)
            n = window.valid_frames
            targets[:n] = labels[window.start_frame:window.start_frame + n]
            mask[:n] = True
            items.append(labeler.SequenceExample(window.matrix.values, targets, mask))
    config = labeler.LabelerConfig(
        input_dim=pairs[0][0].n_bins,
        model_dim=cfg.get("model_dim", 64),
        n_layers=cfg.get("n_layers", 2),
        n_heads=cfg.get("n_heads", 4),
        context_frames=features.WINDOW_FRAMES,
        seed=cfg.get("seed", 0))
    rng = np.random.Generator(np.random.PCG64(config.seed))
    order = rng.permutation(len(items))
    n_val = max(1, int(len(items) * cfg.get("val_fraction", 0.1)))
    val_items = [items[int(i)] for i in order[:n_val]]
    train_items = [items[int(i)] for i in order[n_val:]]
    params, report = labeler.train(
        config, train_items, val_items,
        lr=cfg.get("lr", 1e-3), batch_size=cfg.get("batch_size", 8),
        max_epochs=cfg.get("max_epochs", 50), patience=cfg.get("patience", 5))
    extra = {"mean": float(stats_.mean), "std": float(stats_.std),
             "bin_kind": pairs[0][0].bin_kind,
             "hop_samples": pairs[0][0].hop_samples,
             "sample_rate_hz": pairs[0][0].sample_rate_hz}
    checkpoint.save_checkpoint(args.out, config, params, extra)
    print(f"trained {report.epochs_run} epochs, "
          f"final loss {report.losses[-1]:.4f}, "
          f"train accuracy {report.accuracies[-1]:.3f}")
    print(f"wrote {args.out}")


def _features_for_predict(path, config, extra):
    if path.endswith(".cbf"):
        matrix, _ = features.read_feature_cache(path)
        return matrix
    logcqt = features.log_amplitude(features.cqt(features.load_wav(path)))
    if config.input_dim == 12:
        return templates.fold_to_chroma(logcqt)
    return logcqt


def cmd_predict(args):
    os.makedirs(args.out, exist_ok=True)
    inputs = sorted(glob.glob(os.path.join(args.indir, "*.wav")))
    cached = sorted(glob.glob(os.path.join(args.indir, "*.shift+0.cbf")))
    if not inputs and cached:
        inputs = cached
    if not inputs:
        raise SystemExit(f"no .wav or .shift+0.cbf inputs in {args.indir}")
    if args.model == "template":
        tmpl = templates.default_templates()
        for path in inputs:
            stem = os.path.splitext(os.path.basename(path))[0].split(".shift")[0]
            logcqt = features.log_amplitude(features.cqt(features.load_wav(path))) \
                if path.endswith(".wav") else features.read_feature_cache(path)[0]
            chroma = templates.fold_to_chroma(logcqt)
            classes = templates.template_predict(chroma, tmpl)
            track = features.frames_to_track(classes, chroma.hop_samples,
                                             chroma.sample_rate_hz, stem)
            annotations.write_lab(track, os.path.join(args.out, stem + ".lab"))
        print(f"wrote {len(inputs)} predictions to {args.out}")
        return
    config, params, extra = checkpoint.load_checkpoint(args.model)
    stats_ = features.NormStats(extra["mean"], extra["std"])
    for path in inputs:
        stem = os.path.splitext(os.path.basename(path))[0].split(".shift")[0]
        matrix = _features_for_predict(path, config, extra)
        normed = features.zscore_apply(matrix, stats_)
        track = labeler.predict_track(params, config, normed, stem)
        annotations.write_lab(track, os.path.join(args.out, stem + ".lab"))
    print(f"wrote {len(inputs)} predictions to {args.out}")


def cmd_xval(args):
    datasets, experiments = harness.load_experiments(args.experiments)
    corpus = harness.load_corpus(args.data_root, datasets)
    every_entry = [e for entries in corpus.values() for e in entries]
    plan = harness.make_folds(every_entry, seed=args.fold_seed, k=args.folds)
    os.makedirs(args.out, exist_ok=True)
    summary = []
    for config in experiments:
        rows = harness.run_experiment(config, plan, corpus, args.out)
        summary.extend(rows)
        for row in rows:
            print(f"exp {row['experiment']} {row['dataset']:>8} "
                  f"{row['metric']:>6}: {row['mean']:.2f} ± {row['std']:.2f}")
    harness.emit_report(summary, os.path.join(args.out, "summary.csv"),
                        os.path.join(args.out, "summary.txt"))
    print(f"wrote {os.path.join(args.out, 'summary.csv')}")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="chordbench",
        description="Chord recognition experiment toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="convert annotation formats to .lab")
    p.add_argument("--from", dest="src_format", required=True,
                   choices=["lab", "csv", "arff"])
    p.add_argument("--to", dest="dst_format", default="lab", choices=["lab"])
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", dest="outfile", required=True)
    p.add_argument("--notation", default="shorthand",
                   choices=["shorthand", "majmin"],
                   help="label column for CSV input")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("eval", help="score predictions against references")
    p.add_argument("--ref", required=True, help="directory of reference .lab files")
    p.add_argument("--pred", required=True, help="directory of predicted .lab files")
    p.add_argument("--metrics", default="root,majmin,mirex,ccm")
    p.add_argument("--out", required=True, help="output scores CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stats", help="occurrence and transition statistics")
    p.add_argument("--in", dest="indir", required=True)
    p.add_argument("--occurrences", help="output histogram CSV")
    p.add_argument("--transitions", help="output transition matrix CSV")
    p.add_argument("--drop-n", action="store_true",
                   help="omit the no-chord bin from the exports")
    p.add_argument("--skip-n-transitions", action="store_true",
                   help="count changes through silence as chord-to-chord")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("extract", help="extract log-CQT feature caches")
    p.add_argument("--in", dest="indir", required=True, help="WAV directory")
    p.add_argument("--labels", required=True, help=".lab directory")
    p.add_argument("--aug", help="semitone shift range, e.g. --aug=-5..6")
    p.add_argument("--out", required=True, help="cache directory")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--n", type=int, default=48, help="number of tracks")
    p.add_argument("--len", dest="length", type=float, default=60.0,
                   help="track length in seconds")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", required=True)
    p.add_argument("--model", default="pop",
                   help="'pop', 'uniform', or a transition-matrix CSV")
    p.add_argument("--hist", help="occurrence histogram CSV for the start distribution")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the sequence labeler")
    p.add_argument("--config", required=True, help="JSON hyperparameter file")
    p.add_argument("--data", required=True, help="feature cache directory")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict chord tracks")
    p.add_argument("--model", required=True,
                   help="checkpoint path, or 'template' for the baseline")
    p.add_argument("--in", dest="indir", required=True,
                   help="directory of .wav files or feature caches")
    p.add_argument("--out", required=True, help="output .lab directory")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("xval", help="run a cross-validation experiment matrix")
    p.add_argument("--experiments", required=True, help="experiments JSON file")
    p.add_argument("--data-root", required=True)
    p.add_argument("--out", required=True, help="results directory")
    p.add_argument("--folds", type=int, default=6)
    p.add_argument("--fold-seed", type=int, default=0)
    p.set_defaults(func=cmd_xval)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
