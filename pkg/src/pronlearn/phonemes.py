"""Phoneme inventories, phoneme sequences, edit distance, and the P2P detector.

ASR and TTS subsystems carry separate, locale-specific phonesets, so two
sequences are only directly comparable when they reference the same
inventory.  Cross-inventory comparison goes through a declared symbol
mapping (TTS symbol -> nearest ASR symbol).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path


class PhonesetError(ValueError):
    """Invalid phoneset definition or mismatched phoneset pairing."""


@dataclass(frozen=True)
class Phoneset:
    """A finite ordered inventory of phoneme symbols for one locale and subsystem."""

    id: str
    locale: str
    kind: str  # "ASR" or "TTS"
    symbols: tuple[str, ...]

    def __post_init__(self):
        if self.kind not in ("ASR", "TTS"):
            raise PhonesetError(f"phoneset kind must be ASR or TTS, got {self.kind!r}")
        if not self.symbols:
            raise PhonesetError("phoneset inventory must be non-empty")
        if len(set(self.symbols)) != len(self.symbols):
            raise PhonesetError(f"duplicate symbols in phoneset {self.id!r}")
        object.__setattr__(self, "symbols", tuple(self.symbols))

    def __len__(self) -> int:
        return len(self.symbols)

    def index(self, symbol: str) -> int:
        try:
            return self.symbols.index(symbol)
        except ValueError:
            raise PhonesetError(f"symbol {symbol!r} not in phoneset {self.id!r}") from None


@dataclass(frozen=True)
class PhonemeSequence:
    """Ordered symbol indices into one phoneset.

    May be empty only as an explicit degenerate input.
    """

    phoneset: Phoneset
    items: tuple[int, ...]

    def __post_init__(self):
        items = tuple(int(i) for i in self.items)
        for i in items:
            if not 0 <= i < len(self.phoneset):
                raise PhonesetError(
                    f"index {i} out of range for phoneset {self.phoneset.id!r}"
                )
        object.__setattr__(self, "items", items)

    @classmethod
    def from_symbols(cls, phoneset: Phoneset, symbols) -> "PhonemeSequence":
        return cls(phoneset, tuple(phoneset.index(s) for s in symbols))

    def symbols(self) -> tuple[str, ...]:
        return tuple(self.phoneset.symbols[i] for i in self.items)

    def __len__(self) -> int:
        return len(self.items)


@dataclass(frozen=True)
class DetectionVerdict:
    """Outcome of one stage-1 dissimilarity check."""

    score: float
    threshold: float
    mispronounced: bool = field(init=False)

    def __post_init__(self):
        if self.score < 0 or self.threshold < 0:
            raise ValueError("score and threshold must be non-negative")
        object.__setattr__(self, "mispronounced", self.score > self.threshold)


@dataclass(frozen=True)
class SymbolMapping:
    """Declared mapping from one phoneset's symbols to another's (TTS -> ASR)."""

    source: Phoneset
    target: Phoneset
    table: dict[str, str]

    def __post_init__(self):
        for src, dst in self.table.items():
            if src not in self.source.symbols:
                raise PhonesetError(f"mapping source symbol {src!r} not in {self.source.id!r}")
            if dst not in self.target.symbols:
                raise PhonesetError(f"mapping target symbol {dst!r} not in {self.target.id!r}")

    def apply(self, seq: PhonemeSequence) -> PhonemeSequence:
        """Translate a sequence over the source phoneset into the target phoneset."""
        if seq.phoneset.id != self.source.id:
            raise PhonesetError(
                f"sequence phoneset {seq.phoneset.id!r} does not match mapping source {self.source.id!r}"
            )
        out = []
        for sym in seq.symbols():
            if sym not in self.table:
                raise PhonesetError(f"no mapping declared for symbol {sym!r}")
            out.append(self.table[sym])
        return PhonemeSequence.from_symbols(self.target, out)


def levenshtein(a: PhonemeSequence, b: PhonemeSequence) -> int:
    """Minimum number of unit-cost insertions, deletions, substitutions turning a into b.

    Both sequences must reference the same phoneset; cross-phoneset input
    must be translated through a SymbolMapping first.
    """
    if a.phoneset.id != b.phoneset.id:
        raise PhonesetError(
            f"cannot compare sequences over phonesets {a.phoneset.id!r} and {b.phoneset.id!r} "
            "without a declared symbol mapping"
        )
    xs, ys = a.items, b.items
    if len(xs) < len(ys):
        xs, ys = ys, xs
    if not ys:
        return len(xs)
    prev = list(range(len(ys) + 1))
    for i, cx in enumerate(xs):
        cur = [i + 1]
        for j, cy in enumerate(ys):
            cur.append(min(prev[j + 1] + 1, cur[j] + 1, prev[j] + (cx != cy)))
        prev = cur
    return prev[-1]


def normalized_distance(a: PhonemeSequence, b: PhonemeSequence) -> float:
    """Length-normalized edit distance in [0, 1]; both empty -> 0."""
    denom = max(len(a), len(b))
    if denom == 0:
        return 0.0
    return levenshtein(a, b) / denom


def p2p_detect(
    asr: PhonemeSequence,
    tts: PhonemeSequence,
    threshold: float,
    mapping: SymbolMapping | None = None,
) -> DetectionVerdict:
    """Phoneme-to-phoneme comparison: flag a mispronunciation when the
    normalized edit distance between the user's ASR phonemes and the TTS
    phonemes exceeds the threshold.

    When the sequences live in different phonesets a declared TTS->ASR
    mapping is required; identical phonesets compare directly.
    """
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    if asr.phoneset.id == tts.phoneset.id:
        score = normalized_distance(asr, tts)
    else:
        if mapping is None:
            raise PhonesetError(
                f"phonesets {asr.phoneset.id!r} and {tts.phoneset.id!r} differ; "
                "a declared symbol mapping is required"
            )
        score = normalized_distance(asr, mapping.apply(tts))
    return DetectionVerdict(score=score, threshold=threshold)


def load_phoneset(path: str | Path) -> Phoneset:
    """Load a phoneset from a UTF-8 text file.

    Format: header line ``#phoneset <id> <locale> <ASR|TTS>`` followed by one
    symbol per line.  Blank lines are ignored.
    """
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("#phoneset"):
        raise PhonesetError(f"{path}: missing '#phoneset' header line")
    parts = lines[0].split()
    if len(parts) != 4:
        raise PhonesetError(f"{path}: header must be '#phoneset <id> <locale> <ASR|TTS>'")
    _, pid, locale, kind = parts
    symbols = [ln.strip() for ln in lines[1:] if ln.strip()]
    return Phoneset(id=pid, locale=locale, kind=kind, symbols=tuple(symbols))


def save_phoneset(ps: Phoneset, path: str | Path) -> None:
    text = f"#phoneset {ps.id} {ps.locale} {ps.kind}\n" + "\n".join(ps.symbols) + "\n"
    Path(path).write_text(text, encoding="utf-8")


def load_mapping(path: str | Path, source: Phoneset, target: Phoneset) -> SymbolMapping:
    """Load a two-column tab-separated symbol mapping (source<TAB>target)."""
    table = {}
    for ln in Path(path).read_text(encoding="utf-8").splitlines():
        ln = ln.strip()
        if not ln or ln.startswith("#"):
            continue
        cols = ln.split("\t")
        if len(cols) != 2:
            raise PhonesetError(f"{path}: expected two tab-separated columns, got {ln!r}")
        table[cols[0]] = cols[1]
    return SymbolMapping(source=source, target=target, table=table)


def save_mapping(mapping: SymbolMapping, path: str | Path) -> None:
    lines = [f"{src}\t{dst}" for src, dst in mapping.table.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
