import numpy as np
import pytest

from pronlearn.phonemes import (
    DetectionVerdict,
    Phoneset,
    PhonemeSequence,
    PhonesetError,
    SymbolMapping,
    levenshtein,
    load_mapping,
    load_phoneset,
    normalized_distance,
    p2p_detect,
    save_mapping,
    save_phoneset,
)

ASR = Phoneset("asr-test", "en-US", "ASR", tuple("kaitsnpbdg"))
TTS = Phoneset("tts-test", "en-US", "TTS", tuple("KAITSNPBDG"))


def seq(symbols, ps=ASR):
    return PhonemeSequence.from_symbols(ps, list(symbols))


def brute_force_edit_distance(a, b, max_edits=4):
    """Independent oracle: breadth-first search over single-edit neighborhoods."""
    alphabet = sorted(set(a) | set(b))
    frontier = {tuple(a)}
    target = tuple(b)
    if target in frontier:
        return 0
    seen = set(frontier)
    for depth in range(1, max_edits + 1):
        nxt = set()
        for s in frontier:
            for i in range(len(s)):
                nxt.add(s[:i] + s[i + 1:])  # deletion
                for c in alphabet:
                    nxt.add(s[:i] + (c,) + s[i + 1:])  # substitution
            for i in range(len(s) + 1):
                for c in alphabet:
                    nxt.add(s[:i] + (c,) + s[i:])  # insertion
        if target in nxt:
            return depth
        frontier = nxt - seen
        seen |= nxt
    raise AssertionError("oracle depth exhausted")


class TestPhoneset:
    def test_rejects_duplicates(self):
        with pytest.raises(PhonesetError):
            Phoneset("x", "en-US", "ASR", ("a", "a"))

    def test_rejects_empty(self):
        with pytest.raises(PhonesetError):
            Phoneset("x", "en-US", "ASR", ())

    def test_rejects_bad_kind(self):
        with pytest.raises(PhonesetError):
            Phoneset("x", "en-US", "XXX", ("a",))

    def test_sequence_index_validation(self):
        with pytest.raises(PhonesetError):
            PhonemeSequence(ASR, (99,))


class TestLevenshtein:
    def test_identity(self):
        s = seq("kats")
        assert levenshtein(s, s) == 0

    def test_all_insertions(self):
        assert levenshtein(seq(""), seq("kat")) == 3

    def test_single_substitution_vs_bruteforce(self):
        a, b = seq("kat"), seq("kit")
        assert brute_force_edit_distance(a.items, b.items) == 1
        assert levenshtein(a, b) == 1

    def test_random_vs_bruteforce(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            a = PhonemeSequence(ASR, tuple(rng.integers(0, 4, size=rng.integers(0, 5))))
            b = PhonemeSequence(ASR, tuple(rng.integers(0, 4, size=rng.integers(0, 5))))
            assert levenshtein(a, b) == brute_force_edit_distance(a.items, b.items)

    def test_cross_phoneset_rejected(self):
        with pytest.raises(PhonesetError):
            levenshtein(seq("kat"), seq("KAT", TTS))

    def test_metric_properties(self):
        rng = np.random.default_rng(11)
        seqs = [PhonemeSequence(ASR, tuple(rng.integers(0, 8, size=rng.integers(0, 11))))
                for _ in range(60)]
        for _ in range(300):
            a, b, c = (seqs[i] for i in rng.integers(0, len(seqs), size=3))
            dab = levenshtein(a, b)
            assert dab >= 0
            assert (dab == 0) == (a.items == b.items)
            assert dab == levenshtein(b, a)
            assert dab <= levenshtein(a, c) + levenshtein(c, b)
            assert dab <= max(len(a), len(b))
            assert dab >= abs(len(a) - len(b))


class TestNormalizedDistance:
    def test_identical(self):
        s = seq("kats")
        assert normalized_distance(s, s) == 0.0

    def test_disjoint_equal_length(self):
        assert normalized_distance(seq("kaits"), seq("npbdg")) == 1.0

    def test_one_of_three(self):
        assert normalized_distance(seq("kat"), seq("kit")) == pytest.approx(1 / 3)

    def test_both_empty(self):
        assert normalized_distance(seq(""), seq("")) == 0.0


class TestP2PDetect:
    def test_identical_not_flagged(self):
        s = seq("kats")
        v = p2p_detect(s, s, 0.2)
        assert not v.mispronounced and v.score == 0.0

    def test_full_distance_flagged(self):
        v = p2p_detect(seq("kaits"), seq("npbdg"), 0.2)
        assert v.score == 1.0 and v.mispronounced

    def test_boundary_case(self):
        v = p2p_detect(seq("kat"), seq("kit"), 0.3)
        assert v.mispronounced  # 1/3 > 0.3

    def test_threshold_monotonicity(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            a = PhonemeSequence(ASR, tuple(rng.integers(0, 6, size=rng.integers(1, 8))))
            b = PhonemeSequence(ASR, tuple(rng.integers(0, 6, size=rng.integers(1, 8))))
            t1, t2 = sorted(rng.uniform(0, 1, size=2))
            v1, v2 = p2p_detect(a, b, t1), p2p_detect(a, b, t2)
            # raising the threshold never flips false -> true
            assert not (not v1.mispronounced and v2.mispronounced)

    def test_cross_phoneset_requires_mapping(self):
        with pytest.raises(PhonesetError):
            p2p_detect(seq("kat"), seq("KAT", TTS), 0.2)

    def test_cross_phoneset_with_mapping(self):
        mapping = SymbolMapping(TTS, ASR, {u: u.lower() for u in TTS.symbols})
        v = p2p_detect(seq("kat"), seq("KAT", TTS), 0.2, mapping)
        assert v.score == 0.0 and not v.mispronounced

    def test_verdict_invariant(self):
        v = DetectionVerdict(score=0.5, threshold=0.5)
        assert not v.mispronounced  # strictly greater than


class TestFileFormats:
    def test_phoneset_roundtrip(self, tmp_path):
        p = tmp_path / "asr.txt"
        save_phoneset(ASR, p)
        loaded = load_phoneset(p)
        assert loaded == ASR

    def test_phoneset_header_required(self, tmp_path):
        p = tmp_path / "bad.txt"
        p.write_text("a\nb\n")
        with pytest.raises(PhonesetError):
            load_phoneset(p)

    def test_mapping_roundtrip(self, tmp_path):
        mapping = SymbolMapping(TTS, ASR, {u: u.lower() for u in TTS.symbols})
        p = tmp_path / "map.tsv"
        save_mapping(mapping, p)
        loaded = load_mapping(p, TTS, ASR)
        assert loaded.table == mapping.table
