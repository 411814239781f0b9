"""Synthetic chord-annotated audio datasets.

A Markov progression model over the 25-class vocabulary drives segment
sampling; each segment is rendered as an additive sum of sines at the
chord's pitch classes across the configured octaves, with short linear
fades at the boundaries.  Annotation boundaries are quantized to sample
boundaries, so the emitted .lab files are exact.

Randomness comes from numpy's PCG64 generator seeded per track, which makes
dataset generation a pure function of (spec, model): regenerating with the
same inputs reproduces every file byte for byte.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .annotations import SegmentTrack, TimedSegment, normalize, write_lab
from .features import AudioBuffer, save_wav
from .labels import (N_MAJMIN_CLASSES, NOCHORD_CLASS, majmin_label,
                     pitch_class_set)

ROW_SUM_TOL = 1e-9
FADE_S = 0.010
PEAK_LEVEL = 0.9
DEFAULT_DURATION_RANGE = (1.0, 4.0)


class SynthError(ValueError):
    """Raised for invalid progression models or synthesis specs."""


@dataclass(frozen=True)
class ProgressionModel:
    """Markov chord progression model over the 25-class vocabulary."""

    transition: np.ndarray
    initial: np.ndarray
    duration_s: tuple = DEFAULT_DURATION_RANGE

    def __post_init__(self):
        t = np.asarray(self.transition, dtype=np.float64)
        p = np.asarray(self.initial, dtype=np.float64)
        if t.shape != (N_MAJMIN_CLASSES, N_MAJMIN_CLASSES):
            raise SynthError(f"transition matrix has shape {t.shape}")
        if p.shape != (N_MAJMIN_CLASSES,):
            raise SynthError(f"initial distribution has shape {p.shape}")
        if np.any(np.abs(t.sum(axis=1) - 1.0) > ROW_SUM_TOL):
            raise SynthError("transition rows must sum to 1")
        if np.any(np.diag(t) != 0.0):
            raise SynthError("self-transitions are not allowed")
        if abs(p.sum() - 1.0) > ROW_SUM_TOL:
            raise SynthError("initial distribution must sum to 1")
        if not self.duration_s[0] > 0 or not self.duration_s[1] >= self.duration_s[0]:
            raise SynthError(f"bad duration range {self.duration_s}")
        object.__setattr__(self, "transition", t)
        object.__setattr__(self, "initial", p)


@dataclass(frozen=True)
class SynthSpec:
    """Declarative description of one synthetic dataset."""

    n_tracks: int
    track_length_s: float
    sample_rate_hz: int = 22050
    octaves: tuple = (3, 4)
    seed: int = 0

    def __post_init__(self):
        if self.n_tracks < 1:
            raise SynthError("n_tracks must be at least 1")
        if self.track_length_s < 10:
            raise SynthError("track_length_s must be at least 10 s")


def model_from_stats(matrix: np.ndarray, histogram: np.ndarray,
                     duration_s: tuple = DEFAULT_DURATION_RANGE,
                     smoothing: float = 0.1) -> ProgressionModel:
    """Build a progression model from transition counts and occurrences.

    Rows are normalized with additive smoothing on the off-diagonal entries,
    so unseen rows fall back to a uniform choice over the other 24 classes.
    The initial distribution is proportional to the occurrence histogram
    (uniform when the histogram is empty).
    """
    counts = np.asarray(matrix, dtype=np.float64)
    if counts.shape != (N_MAJMIN_CLASSES, N_MAJMIN_CLASSES):
        raise SynthError(f"transition counts have shape {counts.shape}")
    if not np.any(counts):
        raise SynthError("all-zero transition matrix")
    smoothed = counts + smoothing
    np.fill_diagonal(smoothed, 0.0)
    transition = smoothed / smoothed.sum(axis=1, keepdims=True)

    occ = np.asarray(histogram, dtype=np.float64)
    if occ.shape != (N_MAJMIN_CLASSES,):
        raise SynthError(f"histogram has shape {occ.shape}")
    initial = occ / occ.sum() if occ.sum() > 0 else np.full(N_MAJMIN_CLASSES,
                                                            1.0 / N_MAJMIN_CLASSES)
    return ProgressionModel(transition, initial, duration_s)


def uniform_model(duration_s: tuple = DEFAULT_DURATION_RANGE) -> ProgressionModel:
    """Uniform transitions to every other class; uniform start."""
    t = np.full((N_MAJMIN_CLASSES, N_MAJMIN_CLASSES),
                1.0 / (N_MAJMIN_CLASSES - 1))
    np.fill_diagonal(t, 0.0)
    p = np.full(N_MAJMIN_CLASSES, 1.0 / N_MAJMIN_CLASSES)
    return ProgressionModel(t, p, duration_s)


# Root movements favored by common progressions (semitones up, weight).
_POP_ROOT_WEIGHTS = {5: 4.0, 7: 4.0, 2: 2.0, 9: 2.0, 10: 1.0, 3: 1.0, 4: 0.5, 8: 0.5}
_POP_SAME_FAMILY = 1.0
_POP_CROSS_FAMILY = 0.5
# matches the uniform model's silence rate, so the two differ only in
# progression structure
_POP_TO_N = 1.0


def default_pop_model(duration_s: tuple = DEFAULT_DURATION_RANGE) -> ProgressionModel:
    """A progression model skewed toward fourth/fifth root movement.

    Stands in for the statistics of popular-music corpora: strong diagonal
    bands at the most common root distances, light traffic to and from the
    no-chord state.
    """
    weights = np.zeros((N_MAJMIN_CLASSES, N_MAJMIN_CLASSES))
    for a in range(24):
        root_a, fam_a = a % 12, a // 12
        for b in range(24):
            if a == b:
                continue
            root_b, fam_b = b % 12, b // 12
            w = _POP_ROOT_WEIGHTS.get((root_b - root_a) % 12, 0.1)
            w *= _POP_SAME_FAMILY if fam_a == fam_b else _POP_CROSS_FAMILY
            weights[a, b] = w
        weights[a, NOCHORD_CLASS] = _POP_TO_N
    weights[NOCHORD_CLASS, :24] = 1.0
    transition = weights / weights.sum(axis=1, keepdims=True)
    initial = np.zeros(N_MAJMIN_CLASSES)
    initial[:12] = 2.0  # start on a major chord more often than a minor one
    initial[12:24] = 1.0
    initial /= initial.sum()
    return ProgressionModel(transition, initial, duration_s)


def sample_progression(model: ProgressionModel, length_s: float,
                       seed) -> SegmentTrack:
    """Sample one chord progression of the given length.

    Chord durations are uniform in the model's range; the final segment is
    truncated at ``length_s``.  Deterministic given the seed.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    lo, hi = model.duration_s
    segments = []
    state = int(rng.choice(N_MAJMIN_CLASSES, p=model.initial))
    t = 0.0
    while t < length_s:
        dur = float(rng.uniform(lo, hi))
        end = min(t + dur, length_s)
        segments.append(TimedSegment(t, end, majmin_label(state)))
        t = end
        state = int(rng.choice(N_MAJMIN_CLASSES, p=model.transition[state]))
    return SegmentTrack(tuple(segments), source_id=f"synth-{seed}")


def _pitch_frequency(pitch_class: int, octave: int) -> float:
    midi = 12 * (octave + 1) + pitch_class
    return 440.0 * 2.0 ** ((midi - 69) / 12.0)


def quantize_track(track: SegmentTrack, sample_rate_hz: int) -> SegmentTrack:
    """Snap segment boundaries to exact sample boundaries."""
    out = []
    for seg in track:
        s = round(seg.start_s * sample_rate_hz)
        e = round(seg.end_s * sample_rate_hz)
        if e > s:
            out.append(TimedSegment(s / sample_rate_hz, e / sample_rate_hz,
                                    seg.label))
    return SegmentTrack(tuple(out), track.source_id)


def render_audio(track: SegmentTrack, spec: SynthSpec) -> AudioBuffer:
    """Render a progression as additive sine synthesis.

    Every pitch class of each chord sounds in every configured octave with
    equal amplitude; segments get a 10 ms linear fade at both ends and the
    whole track is peak-normalized to 0.9.  No-chord renders silence.
    """
    sr = spec.sample_rate_hz
    fmax = max((_pitch_frequency(11, o) for o in spec.octaves), default=0.0)
    if sr < 1000 or fmax >= sr / 2:
        raise SynthError(
            f"unsupported sample rate {sr} Hz for octaves {spec.octaves}")
    q = quantize_track(track, sr)
    n_total = round(q.end_s * sr) if q.segments else round(track.end_s * sr)
    buf = np.zeros(n_total, dtype=np.float64)
    fade_n = round(FADE_S * sr)
    for seg in q:
        pcs = pitch_class_set(seg.label)
        if not pcs:
            continue
        i0 = round(seg.start_s * sr)
        i1 = round(seg.end_s * sr)
        n = i1 - i0
        t = np.arange(n) / sr
        wave = np.zeros(n)
        for pc in sorted(pcs):
            for octave in spec.octaves:
                wave += np.sin(2.0 * np.pi * _pitch_frequency(pc, octave) * t)
        m = min(fade_n, n // 2)
        if m > 0:
            ramp = np.linspace(0.0, 1.0, m, endpoint=False)
            wave[:m] *= ramp
            wave[n - m:] *= ramp[::-1]
        buf[i0:i1] = wave
    peak = np.abs(buf).max()
    if peak > 0:
        buf *= PEAK_LEVEL / peak
    return AudioBuffer(buf, sr)


def track_seed(spec_seed: int, index: int) -> int:
    """Stable per-track seed derived from the dataset seed."""
    ss = np.random.SeedSequence(entropy=spec_seed, spawn_key=(index,))
    return int(ss.generate_state(1, np.uint64)[0])


def emit_dataset(spec: SynthSpec, model: ProgressionModel, out_dir) -> list:
    """Generate WAV + .lab pairs and a JSON-lines manifest.

    Returns the manifest entries (id, path, duration, seed).  Regeneration
    with the same spec and model is byte-identical.
    """
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for i in range(spec.n_tracks):
        seed = track_seed(spec.seed, i)
        track_id = f"synth_{i:04d}"
        progression = sample_progression(model, spec.track_length_s, seed)
        quantized = normalize(quantize_track(progression, spec.sample_rate_hz))
        audio = render_audio(quantized, spec)
        wav_name = f"{track_id}.wav"
        lab_name = f"{track_id}.lab"
        save_wav(os.path.join(out_dir, wav_name), audio)
        write_lab(quantized, os.path.join(out_dir, lab_name))
        entries.append({
            "id": track_id,
            "path": wav_name,
            "duration": round(audio.duration_s, 6),
            "seed": seed,
        })
    with open(os.path.join(out_dir, "manifest.jsonl"), "w") as fh:
        for entry in entries:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
    return entries


def read_manifest(path) -> list:
    """Read a JSON-lines dataset manifest."""
    entries = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                entries.append(json.loads(line))
    return entries
