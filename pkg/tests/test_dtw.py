import itertools

import numpy as np
import pytest

from pronlearn.audio import MelConfig, MelSpectrogram, Waveform, mel_spectrogram
from pronlearn.dtw import (
    DtwError,
    absolute,
    dtw,
    dtw_detect,
    euclidean,
    fast_dtw,
    sqeuclidean,
    validate_path,
)


def all_monotone_paths(n, m):
    """Every warp path from (0,0) to (n-1,m-1) with steps {(1,0),(0,1),(1,1)}."""
    def extend(path):
        i, j = path[-1]
        if (i, j) == (n - 1, m - 1):
            yield tuple(path)
            return
        for di, dj in ((1, 1), (1, 0), (0, 1)):
            ni, nj = i + di, j + dj
            if ni < n and nj < m:
                yield from extend(path + [(ni, nj)])
    return list(extend([(0, 0)]))


def brute_force_cost(a, b, dist):
    best = np.inf
    for path in all_monotone_paths(len(a), len(b)):
        cost = sum(dist(a[i], b[j]) for i, j in path)
        best = min(best, cost)
    return best


class TestExactDtw:
    def test_identical_inputs_diagonal(self):
        a = np.random.default_rng(0).standard_normal((5, 3))
        r = dtw(a, a, sqeuclidean)
        assert r.cost == 0.0
        assert r.path == tuple((i, i) for i in range(5))

    def test_single_vs_three(self):
        r = dtw(np.array([0.0]), np.array([0.0, 1.0, 2.0]), absolute)
        assert r.cost == 3.0
        assert r.path == ((0, 0), (0, 1), (0, 2))

    def test_matches_bruteforce_random(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            n, m = rng.integers(1, 7, size=2)
            a = rng.standard_normal((n, 2))
            b = rng.standard_normal((m, 2))
            r = dtw(a, b, euclidean)
            expected = brute_force_cost(a, b, euclidean)
            assert r.cost == pytest.approx(expected, abs=1e-9)
            assert validate_path(r.path, n, m)

    def test_cost_equals_path_sum(self):
        rng = np.random.default_rng(6)
        a, b = rng.standard_normal((8, 3)), rng.standard_normal((6, 3))
        r = dtw(a, b, euclidean)
        path_sum = sum(euclidean(a[i], b[j]) for i, j in r.path)
        assert r.cost == pytest.approx(path_sum, abs=1e-9)

    def test_symmetric_for_symmetric_dist(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            a, b = rng.standard_normal((6, 2)), rng.standard_normal((9, 2))
            assert dtw(a, b, euclidean).cost == pytest.approx(
                dtw(b, a, euclidean).cost, abs=1e-9)

    def test_self_distance_zero(self):
        rng = np.random.default_rng(8)
        a = rng.standard_normal((7, 4))
        assert dtw(a, a, euclidean).cost == 0.0

    def test_empty_rejected(self):
        with pytest.raises(DtwError):
            dtw(np.zeros((0, 2)), np.zeros((3, 2)), euclidean)


class TestFastDtw:
    def test_equals_exact_with_large_radius(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            n, m = rng.integers(4, 21, size=2)
            a, b = rng.standard_normal((n, 3)), rng.standard_normal((m, 3))
            exact = dtw(a, b, euclidean)
            approx = fast_dtw(a, b, radius=int(max(n, m)), dist=euclidean)
            assert approx.cost == exact.cost

    def test_identical_inputs_zero(self):
        a = np.random.default_rng(10).standard_normal((30, 4))
        for radius in (0, 1, 2):
            assert fast_dtw(a, a, radius=radius).cost == 0.0

    def test_never_below_exact(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            n, m = rng.integers(8, 40, size=2)
            a, b = rng.standard_normal((n, 2)), rng.standard_normal((m, 2))
            approx = fast_dtw(a, b, radius=1, dist=euclidean)
            exact = dtw(a, b, euclidean)
            assert approx.cost >= exact.cost - 1e-12
            assert validate_path(approx.path, n, m)

    def test_cost_equals_path_sum(self):
        rng = np.random.default_rng(12)
        a, b = rng.standard_normal((25, 3)), rng.standard_normal((31, 3))
        r = fast_dtw(a, b, radius=2, dist=euclidean)
        path_sum = sum(euclidean(a[i], b[j]) for i, j in r.path)
        assert r.cost == pytest.approx(path_sum, abs=1e-9)

    def test_negative_radius_rejected(self):
        with pytest.raises(DtwError):
            fast_dtw(np.zeros((3, 1)), np.zeros((3, 1)), radius=-1)


def tone_mel(freqs, seed=0, rate=16000, dur_per=0.1):
    rng = np.random.default_rng(seed)
    parts = []
    for f in freqs:
        t = np.arange(int(dur_per * rate)) / rate
        parts.append(0.4 * np.sin(2 * np.pi * f * t + rng.uniform(0, np.pi)))
    return mel_spectrogram(Waveform(np.concatenate(parts), rate))


class TestDtwDetect:
    def test_identical_spectrograms(self):
        mel = tone_mel([400, 800])
        v = dtw_detect(mel, mel, threshold=0.5)
        assert v.score == 0.0 and not v.mispronounced

    def test_score_above_threshold_flags(self):
        a = tone_mel([400, 800], seed=1)
        b = tone_mel([2000, 3000], seed=2)
        v = dtw_detect(a, b, threshold=0.0)
        assert v.score > 0 and v.mispronounced

    def test_mel_count_mismatch(self):
        a = tone_mel([400])
        cfg = MelConfig(n_mels=20)
        b = MelSpectrogram(np.zeros((20, 10)), cfg)
        with pytest.raises(DtwError):
            dtw_detect(a, b, 0.1)

    def test_per_step_normalization_stable_under_duplication(self):
        a = tone_mel([500, 900], seed=3)
        b = tone_mel([500, 950], seed=4)
        base = dtw_detect(a, b, 1.0).score
        dup_a = MelSpectrogram(np.repeat(a.data, 2, axis=1), a.config)
        dup_b = MelSpectrogram(np.repeat(b.data, 2, axis=1), b.config)
        doubled = dtw_detect(dup_a, dup_b, 1.0).score
        assert abs(doubled - base) / base < 0.10
