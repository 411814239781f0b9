import numpy as np
import pytest

from chordbench.annotations import SegmentTrack, TimedSegment
from chordbench.features import (AudioBuffer, FeatureError, FeatureMatrix,
                                 HOP, LOG_EPS, LOG_FLOOR, N_BINS, SAMPLE_RATE,
                                 align_labels, cqt, frames_to_track,
                                 ht_sequences, load_wav, log_amplitude,
                                 min_cqt_samples, pitch_shift_chroma,
                                 pitch_shift_cqt, read_chroma_file,
                                 read_feature_cache, save_wav, window_slices,
                                 write_feature_cache, zscore_apply, zscore_fit)
from chordbench.labels import parse_harte


def sine(freq_hz, seconds=2.0, amplitude=1.0):
    t = np.arange(int(seconds * SAMPLE_RATE)) / SAMPLE_RATE
    return AudioBuffer(amplitude * np.sin(2 * np.pi * freq_hz * t), SAMPLE_RATE)


def interior_frames(n_samples, n_frames):
    half = min_cqt_samples() // 2
    lo = int(np.ceil(half / HOP))
    hi = min(n_frames - 1, (n_samples - half) // HOP)
    return lo, hi


def matrix(values, kind="cqt_log", hop=HOP, rate=SAMPLE_RATE):
    return FeatureMatrix(np.asarray(values, dtype=np.float64), hop, rate, kind)


class TestCqt:
    def test_reference_sine_bin(self):
        audio = sine(440.0)
        fm = cqt(audio)
        lo, hi = interior_frames(len(audio.samples), fm.n_frames)
        assert np.all(fm.values[lo:hi + 1].argmax(axis=1) == 90)

    def test_fmin_sine_bin(self):
        audio = sine(32.7032)
        fm = cqt(audio)
        lo, hi = interior_frames(len(audio.samples), fm.n_frames)
        assert np.all(fm.values[lo:hi + 1].argmax(axis=1) == 0)

    def test_silence_is_zero(self):
        fm = cqt(AudioBuffer(np.zeros(2 * SAMPLE_RATE), SAMPLE_RATE))
        assert fm.values.max() == 0.0

    def test_shape_and_metadata(self):
        fm = cqt(sine(220.0))
        assert fm.n_bins == N_BINS
        assert fm.n_frames == 1 + (2 * SAMPLE_RATE) // HOP
        assert fm.bin_kind == "cqt_mag"

    def test_linearity(self):
        quiet = cqt(sine(440.0, amplitude=0.25))
        loud = cqt(sine(440.0, amplitude=0.5))
        assert np.allclose(loud.values, 2.0 * quiet.values, rtol=1e-9, atol=1e-15)

    def test_rejects_wrong_rate(self):
        with pytest.raises(FeatureError, match="resample"):
            cqt(AudioBuffer(np.zeros(44100), 44100))

    def test_rejects_short_audio(self):
        with pytest.raises(FeatureError, match="at least"):
            cqt(AudioBuffer(np.zeros(min_cqt_samples() - 1), SAMPLE_RATE))


class TestLogAmplitude:
    def test_zero_magnitude_floor(self):
        fm = log_amplitude(matrix(np.zeros((3, N_BINS)), kind="cqt_mag"))
        assert np.allclose(fm.values, np.log(LOG_EPS))

    def test_unit_magnitude_near_zero(self):
        fm = log_amplitude(matrix(np.ones((2, N_BINS)), kind="cqt_mag"))
        assert np.allclose(fm.values, np.log(1.0 + LOG_EPS))
        assert abs(fm.values[0, 0]) < 2e-6

    def test_monotone(self):
        values = np.linspace(0, 2, 10)[None, :].repeat(2, axis=0)
        fm = log_amplitude(matrix(values, kind="cqt_mag"))
        assert np.all(np.diff(fm.values[0]) > 0)

    def test_requires_magnitude_input(self):
        with pytest.raises(FeatureError):
            log_amplitude(matrix(np.zeros((2, N_BINS)), kind="cqt_log"))


class TestZscore:
    def test_two_values(self):
        fm = matrix(np.array([[0.0, 2.0]]))
        stats = zscore_fit([fm])
        assert stats.mean == pytest.approx(1.0)
        assert stats.std == pytest.approx(1.0)

    def test_constant_error(self):
        with pytest.raises(FeatureError, match="variance"):
            zscore_fit([matrix(np.ones((4, 3)))])

    def test_matches_two_pass_oracle(self):
        rng = np.random.Generator(np.random.PCG64(31))
        mats = [matrix(rng.standard_normal((int(rng.integers(5, 40)), 6)) * 3 + 1)
                for _ in range(8)]
        stats = zscore_fit(mats)
        flat = np.concatenate([m.values.ravel() for m in mats])
        mean = flat.sum() / flat.size
        var = ((flat - mean) ** 2).sum() / flat.size
        assert stats.mean == pytest.approx(mean, abs=1e-9)
        assert stats.std == pytest.approx(np.sqrt(var), abs=1e-9)

    def test_self_normalization(self):
        rng = np.random.Generator(np.random.PCG64(32))
        mats = [matrix(rng.standard_normal((20, 4)) * 5 - 2) for _ in range(4)]
        stats = zscore_fit(mats)
        normed = np.concatenate([zscore_apply(m, stats).values.ravel()
                                 for m in mats])
        assert abs(normed.mean()) < 1e-9
        assert abs(normed.std() - 1.0) < 1e-9

    def test_identity_stats(self):
        fm = matrix(np.arange(6.0).reshape(2, 3))
        from chordbench.features import NormStats
        out = zscore_apply(fm, NormStats(0.0, 1.0))
        assert np.array_equal(out.values, fm.values)

    def test_per_bin(self):
        rng = np.random.Generator(np.random.PCG64(33))
        mats = [matrix(rng.standard_normal((30, 3)) * np.array([1.0, 5.0, 0.1]))
                for _ in range(3)]
        stats = zscore_fit(mats, per_bin=True)
        assert stats.std.shape == (3,)
        normed = np.concatenate([zscore_apply(m, stats).values for m in mats])
        assert np.allclose(normed.mean(axis=0), 0.0, atol=1e-9)
        assert np.allclose(normed.std(axis=0), 1.0, atol=1e-9)


class TestWindowSlices:
    def test_exact_tiling(self):
        fm = matrix(np.arange(216 * 2.0).reshape(216, 2))
        windows = window_slices(fm)
        assert [w.start_frame for w in windows] == [0, 54, 108]
        assert all(w.valid_frames == 108 for w in windows)
        assert not windows[-1].padded

    def test_single_window(self):
        windows = window_slices(matrix(np.zeros((108, 2))))
        assert len(windows) == 1

    def test_padded_window(self):
        windows = window_slices(matrix(np.ones((100, 2))))
        assert len(windows) == 1
        w = windows[0]
        assert w.valid_frames == 100 and w.padded
        assert w.matrix.n_frames == 108
        assert np.all(w.matrix.values[100:] == 0.0)

    def test_tail_coverage(self):
        windows = window_slices(matrix(np.zeros((217, 2))))
        assert [w.start_frame for w in windows] == [0, 54, 108, 162]
        assert windows[-1].valid_frames == 55

    def test_reassembly(self):
        rng = np.random.Generator(np.random.PCG64(34))
        fm = matrix(rng.standard_normal((200, 3)))
        windows = window_slices(fm)
        rebuilt = np.full_like(fm.values, np.nan)
        for w in windows:
            rebuilt[w.start_frame:w.start_frame + w.valid_frames] = \
                w.matrix.values[:w.valid_frames]
        assert np.array_equal(rebuilt, fm.values)

    def test_empty_error(self):
        with pytest.raises(FeatureError):
            window_slices(matrix(np.zeros((0, 2))))


class TestPitchShiftCqt:
    def test_identity_shift(self):
        fm = matrix(np.random.default_rng(0).standard_normal((5, N_BINS)))
        assert np.array_equal(pitch_shift_cqt(fm, 0).values, fm.values)

    def test_sine_shift(self):
        feats = log_amplitude(cqt(sine(440.0)))
        shifted = pitch_shift_cqt(feats, 1)
        lo, hi = interior_frames(2 * SAMPLE_RATE, feats.n_frames)
        assert np.all(shifted.values[lo:hi + 1].argmax(axis=1) == 92)

    def test_round_trip_interior_bins(self):
        rng = np.random.Generator(np.random.PCG64(35))
        fm = matrix(rng.standard_normal((4, N_BINS)))
        back = pitch_shift_cqt(pitch_shift_cqt(fm, -5), 5)
        assert np.array_equal(back.values[:, 10:], fm.values[:, 10:])
        assert np.all(back.values[:, :10] == LOG_FLOOR)

    def test_range_check(self):
        fm = matrix(np.zeros((2, N_BINS)))
        with pytest.raises(FeatureError):
            pitch_shift_cqt(fm, -6)
        with pytest.raises(FeatureError):
            pitch_shift_cqt(fm, 7)

    def test_vacated_bins_floor(self):
        fm = matrix(np.ones((2, N_BINS)))
        shifted = pitch_shift_cqt(fm, 3)
        assert np.all(shifted.values[:, :6] == LOG_FLOOR)


class TestAlignLabels:
    def test_constant_track(self):
        track = SegmentTrack((TimedSegment(0.0, 10.5, parse_harte("C:maj")),), "t")
        fm = matrix(np.zeros((108, 2)))
        classes = align_labels(track, fm)
        assert np.all(classes == 0)

    def test_boundary_goes_to_later_segment(self):
        period = HOP / SAMPLE_RATE
        boundary = 1.5 * period  # center of frame 1
        track = SegmentTrack((TimedSegment(0.0, boundary, parse_harte("C:maj")),
                              TimedSegment(boundary, 1.0, parse_harte("G:maj"))), "t")
        classes = align_labels(track, matrix(np.zeros((4, 2))))
        assert classes[1] == 7  # frame center == boundary -> later segment

    def test_tail_is_nochord(self):
        track = SegmentTrack((TimedSegment(0.0, 0.2, parse_harte("C:maj")),), "t")
        classes = align_labels(track, matrix(np.zeros((20, 2))))
        assert classes[0] == 0
        assert np.all(classes[5:] == 24)


class TestFramesToTrack:
    def test_constant_sequence(self):
        t = frames_to_track(np.zeros(10, dtype=int), HOP, SAMPLE_RATE, "p")
        assert len(t) == 1
        assert t.segments[0].start_s == 0.0
        assert t.segments[0].end_s == pytest.approx(10 * HOP / SAMPLE_RATE)

    def test_alternating(self):
        classes = np.array([0, 7, 0, 7])
        t = frames_to_track(classes, HOP, SAMPLE_RATE, "p")
        assert len(t) == 4

    def test_round_trip_with_align(self):
        rng = np.random.Generator(np.random.PCG64(36))
        period = HOP / SAMPLE_RATE
        classes = rng.integers(0, 25, 50)
        t = frames_to_track(classes, HOP, SAMPLE_RATE, "p")
        back = align_labels(t, matrix(np.zeros((50, 2)), hop=HOP))
        # merging equal neighbours preserves the frame labels exactly
        assert np.array_equal(back, classes)
        assert t.end_s == pytest.approx(50 * period)


class TestChromaFile:
    def write(self, tmp_path, rows, delim=","):
        p = tmp_path / "c.csv"
        p.write_text("\n".join(delim.join(str(v) for v in row) for row in rows))
        return p

    def rows(self, n, dt=0.046439909):
        rng = np.random.Generator(np.random.PCG64(37))
        return [[i * dt] + list(rng.random(24)) for i in range(n)]

    def test_read_infers_hop(self, tmp_path):
        p = self.write(tmp_path, self.rows(40))
        fm = read_chroma_file(p)
        assert fm.bin_kind == "chroma24"
        assert fm.n_bins == 24
        assert fm.hop_samples == 1024  # 0.04644 s at 22050 Hz

    def test_single_row_error(self, tmp_path):
        p = self.write(tmp_path, self.rows(1))
        with pytest.raises(FeatureError, match="two rows"):
            read_chroma_file(p)

    def test_non_uniform_error(self, tmp_path):
        rows = self.rows(5)
        rows[3][0] += 0.01
        p = self.write(tmp_path, rows)
        with pytest.raises(FeatureError, match="uniform"):
            read_chroma_file(p)

    def test_wrong_field_count(self, tmp_path):
        p = self.write(tmp_path, [[0.0] + [0.1] * 23])
        with pytest.raises(FeatureError, match="25 fields"):
            read_chroma_file(p)

    def test_whitespace_delimited(self, tmp_path):
        p = self.write(tmp_path, self.rows(5), delim=" ")
        assert read_chroma_file(p).n_frames == 5


class TestHtSequences:
    def chroma(self, n_frames, fill=None):
        rng = np.random.Generator(np.random.PCG64(38))
        values = rng.random((n_frames, 24)) if fill is None else \
            np.full((n_frames, 24), fill)
        return matrix(values, kind="chroma24", hop=1024)

    def test_500_frames_single_sequence(self):
        seqs = ht_sequences(self.chroma(500))
        assert len(seqs) == 1
        seq, centers = seqs[0]
        assert seq.n_frames == 100
        assert np.array_equal(centers, np.arange(0, 500, 5))

    def test_sequence_time_span(self):
        seq, _ = ht_sequences(self.chroma(500))[0]
        span = 100 * seq.frame_period_s
        assert span == pytest.approx(23.2, abs=0.1)

    def test_constant_input(self):
        seq, _ = ht_sequences(self.chroma(200, fill=0.5))[0]
        assert np.allclose(seq.values[:40], 0.5)

    def test_centers_arithmetic(self):
        for seq, centers in ht_sequences(self.chroma(730)):
            valid = centers[centers >= 0]
            assert np.all(np.diff(valid) == 5)

    def test_too_short(self):
        with pytest.raises(FeatureError):
            ht_sequences(self.chroma(4))

    def test_padding_flagged(self):
        seqs = ht_sequences(self.chroma(520))  # 104 segments -> 2 sequences
        assert len(seqs) == 2
        _, centers = seqs[1]
        assert np.sum(centers >= 0) == 4
        assert np.all(centers[4:] == -1)


class TestPitchShiftChroma:
    def chroma(self, values):
        return matrix(values, kind="chroma24", hop=1024)

    def test_full_rotation_identity(self):
        rng = np.random.Generator(np.random.PCG64(39))
        fm = self.chroma(rng.random((6, 24)))
        assert np.allclose(pitch_shift_chroma(fm, 12).values, fm.values)

    def test_moves_energy_up(self):
        values = np.zeros((1, 24))
        values[0, 0] = 1.0   # treble C
        values[0, 12] = 1.0  # bass C
        out = pitch_shift_chroma(self.chroma(values), 1)
        assert out.values[0, 1] == 1.0 and out.values[0, 13] == 1.0
        assert out.values[0, 0] == 0.0 and out.values[0, 12] == 0.0

    def test_composition(self):
        rng = np.random.Generator(np.random.PCG64(40))
        fm = self.chroma(rng.random((4, 24)))
        a = pitch_shift_chroma(pitch_shift_chroma(fm, 3), 7)
        b = pitch_shift_chroma(fm, 10)
        assert np.allclose(a.values, b.values)


class TestCacheAndWav:
    def test_cache_round_trip(self, tmp_path):
        rng = np.random.Generator(np.random.PCG64(41))
        fm = matrix(rng.standard_normal((30, 12)).astype(np.float32))
        labels = rng.integers(0, 25, 30)
        p = tmp_path / "x.cbf"
        write_feature_cache(p, fm, labels)
        back, back_labels = read_feature_cache(p)
        assert back.bin_kind == fm.bin_kind
        assert back.hop_samples == fm.hop_samples
        assert np.allclose(back.values, fm.values, atol=1e-6)
        assert np.array_equal(back_labels, labels)

    def test_cache_without_labels(self, tmp_path):
        fm = matrix(np.zeros((4, 2), dtype=np.float32))
        p = tmp_path / "x.cbf"
        write_feature_cache(p, fm)
        _, labels = read_feature_cache(p)
        assert labels is None

    def test_cache_bad_magic(self, tmp_path):
        p = tmp_path / "x.cbf"
        p.write_bytes(b"NOPE" + b"\0" * 32)
        with pytest.raises(FeatureError):
            read_feature_cache(p)

    def test_wav_round_trip(self, tmp_path):
        rng = np.random.Generator(np.random.PCG64(42))
        audio = AudioBuffer(rng.uniform(-0.9, 0.9, 4000), SAMPLE_RATE)
        p = tmp_path / "x.wav"
        save_wav(p, audio)
        back = load_wav(p)
        assert back.sample_rate_hz == SAMPLE_RATE
        assert np.allclose(back.samples, audio.samples, atol=1.0 / 32000)

    def test_wav_stereo_downmix(self, tmp_path):
        from scipy.io import wavfile
        p = tmp_path / "s.wav"
        left = np.full(1000, 8000, dtype=np.int16)
        right = np.zeros(1000, dtype=np.int16)
        wavfile.write(p, SAMPLE_RATE, np.stack([left, right], axis=1))
        audio = load_wav(p)
        assert audio.samples.ndim == 1
        assert audio.samples[0] == pytest.approx(4000 / 32768)
