"""Multi-phoneme sequence-to-sequence model translating ASR phoneme sequences
into TTS phoneme sequences.

An LSTM encoder with multi-head self-attention reads the source; an LSTM
decoder with encoder/decoder multi-head attention emits the target with
teacher forcing.  The per-symbol input embedding tables it learns are the
dense phoneme representations used downstream: they place confusable symbols
(and cross-phoneset correspondents) near each other.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .checkpoint import read_checkpoint, write_checkpoint
from .layers import Dense, LSTMCell, MultiHeadAttention, ParameterSet, uniform_init
from .optim import Adam
from .phonemes import Phoneset, PhonemeSequence, PhonesetError


@dataclass(frozen=True)
class Seq2SeqConfig:
    hidden_dim: int = 100
    embed_dim: int = 64
    n_heads: int = 2
    max_len: int = 32
    lr: float = 1e-3
    batch_size: int = 16
    epochs: int = 60
    seed: int = 0


@dataclass(frozen=True)
class EmbeddingTable:
    """Per-symbol dense vectors for one phoneset (plus begin/end marker rows)."""

    phoneset_id: str
    vectors: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float64)
        if not np.all(np.isfinite(v)):
            raise ValueError("embedding table contains non-finite vectors")
        object.__setattr__(self, "vectors", v)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def embed_sequence(table: EmbeddingTable, seq: PhonemeSequence) -> np.ndarray:
    """Row i is the embedding of symbol i of ``seq``; shape (len, E)."""
    if seq.phoneset.id != table.phoneset_id:
        raise PhonesetError(
            f"sequence phoneset {seq.phoneset.id!r} does not match table {table.phoneset_id!r}")
    if not len(seq):
        return np.zeros((0, table.dim))
    return table.vectors[list(seq.items)].copy()


class Seq2SeqModel:
    def __init__(self, src_phoneset: Phoneset, tgt_phoneset: Phoneset,
                 config: Seq2SeqConfig):
        self.src_phoneset = src_phoneset
        self.tgt_phoneset = tgt_phoneset
        self.config = config
        self.train_log: list[float] = []
        rng = np.random.default_rng(config.seed)
        e, h = config.embed_dim, config.hidden_dim
        self.src_vocab = len(src_phoneset) + 2   # symbols + BOS + EOS markers
        self.tgt_vocab = len(tgt_phoneset) + 2
        self.bos = len(tgt_phoneset)
        self.eos = len(tgt_phoneset) + 1
        self.params = ParameterSet()
        self.src_embed = self.params.add(
            "src_embed", uniform_init(rng, (self.src_vocab, e), self.src_vocab, e))
        self.tgt_embed = self.params.add(
            "tgt_embed", uniform_init(rng, (self.tgt_vocab, e), self.tgt_vocab, e))
        self.encoder = LSTMCell(rng, e, h, name="enc")
        self.self_attn = MultiHeadAttention(rng, h, config.n_heads, name="self_attn")
        self.decoder = LSTMCell(rng, e, h, name="dec")
        self.cross_attn = MultiHeadAttention(rng, h, config.n_heads, name="cross_attn")
        self.combine = Dense(rng, 2 * h, h, name="combine")
        self.out_proj = Dense(rng, h, self.tgt_vocab, name="out_proj")
        for part in (self.encoder, self.self_attn, self.decoder, self.cross_attn,
                     self.combine, self.out_proj):
            self.params.merge("m", part.params)

    def encode(self, src: PhonemeSequence) -> tuple[Tensor, tuple[Tensor, Tensor]]:
        """Encoder memory (T, H) after self-attention, plus the final LSTM state."""
        emb = ad.take(self.src_embed, list(src.items))
        state = self.encoder.init_state(1)
        hs = []
        for t in range(len(src)):
            h, c = self.encoder.step(ad.narrow(emb, 0, t, 1), state)
            state = (h, c)
            hs.append(h)
        enc = ad.concat(hs, axis=0)
        memory = ad.add(enc, self.self_attn(enc, enc, enc))
        return memory, state

    def _decode_step(self, symbol: int, state, memory: Tensor) -> tuple[Tensor, tuple]:
        emb = ad.take(self.tgt_embed, [symbol])
        h, c = self.decoder.step(emb, state)
        ctx = self.cross_attn(h, memory, memory)
        combined = ad.tanh(self.combine(ad.concat([h, ctx], axis=1)))
        return self.out_proj(combined), (h, c)

    def sequence_loss(self, src: PhonemeSequence, tgt: PhonemeSequence) -> Tensor:
        """Teacher-forced mean cross-entropy over target symbols plus EOS."""
        memory, state = self.encode(src)
        inputs = [self.bos] + list(tgt.items)
        targets = list(tgt.items) + [self.eos]
        losses = []
        for sym_in, sym_out in zip(inputs, targets):
            logits, state = self._decode_step(sym_in, state, memory)
            probs = ad.softmax(logits)
            losses.append(ad.cross_entropy(probs, [sym_out]))
        return ad.tmean(ad.concat(losses, axis=0))

    def decode(self, src: PhonemeSequence) -> PhonemeSequence:
        """Greedy argmax decoding until the end marker or max length."""
        if src.phoneset.id != self.src_phoneset.id:
            raise PhonesetError(f"expected source phoneset {self.src_phoneset.id!r}")
        with ad.no_grad():
            memory, state = self.encode(src)
            out: list[int] = []
            sym = self.bos
            for _ in range(self.config.max_len):
                logits, state = self._decode_step(sym, state, memory)
                sym = int(np.argmax(logits.data[0]))
                if sym == self.eos:
                    break
                if sym < len(self.tgt_phoneset):
                    out.append(sym)
                else:
                    break  # BOS re-emitted: treat as end
        return PhonemeSequence(self.tgt_phoneset, tuple(out))

    def save(self, path: str | Path) -> None:
        meta = {
            "kind": "seq2seq",
            "config": asdict(self.config),
            "src_phoneset": _phoneset_meta(self.src_phoneset),
            "tgt_phoneset": _phoneset_meta(self.tgt_phoneset),
            "train_log": self.train_log,
        }
        write_checkpoint(path, self.params.state_dict(), meta)

    @classmethod
    def load(cls, path: str | Path) -> "Seq2SeqModel":
        tensors, meta = read_checkpoint(path)
        if meta.get("kind") != "seq2seq":
            raise ValueError(f"{path}: not a seq2seq checkpoint")
        model = cls(_phoneset_from_meta(meta["src_phoneset"]),
                    _phoneset_from_meta(meta["tgt_phoneset"]),
                    Seq2SeqConfig(**meta["config"]))
        model.params.load_state_dict(tensors)
        model.train_log = list(meta.get("train_log", []))
        return model


def _phoneset_meta(ps: Phoneset) -> dict:
    return {"id": ps.id, "locale": ps.locale, "kind": ps.kind, "symbols": list(ps.symbols)}


def _phoneset_from_meta(meta: dict) -> Phoneset:
    return Phoneset(meta["id"], meta["locale"], meta["kind"], tuple(meta["symbols"]))


def train_seq2seq(corpus, config: Seq2SeqConfig | None = None) -> Seq2SeqModel:
    """Fit the translation model on (ASR sequence, TTS sequence) pairs.

    Raises on an empty corpus or any sequence over the configured max length.
    """
    config = config or Seq2SeqConfig()
    pairs = list(corpus)
    if not pairs:
        raise ValueError("training corpus is empty")
    for src, tgt in pairs:
        if len(src) > config.max_len or len(tgt) > config.max_len:
            raise ValueError(f"sequence length exceeds max_len={config.max_len}")
    model = Seq2SeqModel(pairs[0][0].phoneset, pairs[0][1].phoneset, config)
    opt = Adam(model.params, lr=config.lr)
    rng = np.random.default_rng(config.seed + 1)
    for _ in range(config.epochs):
        order = rng.permutation(len(pairs))
        epoch_loss = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            opt.zero_grad()
            for i in batch:
                src, tgt = pairs[i]
                loss = ad.mul(model.sequence_loss(src, tgt), 1.0 / len(batch))
                loss.backward()
                epoch_loss += loss.item() * len(batch)
            opt.step()
        model.train_log.append(epoch_loss / len(pairs))
    if not np.isfinite(model.train_log).all():
        raise FloatingPointError("training diverged: non-finite loss")
    return model


def extract_embeddings(model: Seq2SeqModel) -> tuple[EmbeddingTable, EmbeddingTable]:
    """The learned source (ASR) and target (TTS) symbol embedding tables."""
    return (EmbeddingTable(model.src_phoneset.id, model.src_embed.data.copy()),
            EmbeddingTable(model.tgt_phoneset.id, model.tgt_embed.data.copy()))


def load_pair_corpus(path: str | Path, src_ps: Phoneset, tgt_ps: Phoneset):
    """One pair per line: ``asr_seq<TAB>tts_seq``, symbols space-separated."""
    pairs = []
    for ln in Path(path).read_text(encoding="utf-8").splitlines():
        if not ln.strip():
            continue
        src_text, tgt_text = ln.split("\t")
        pairs.append((PhonemeSequence.from_symbols(src_ps, src_text.split()),
                      PhonemeSequence.from_symbols(tgt_ps, tgt_text.split())))
    return pairs


def save_pair_corpus(path: str | Path, pairs) -> None:
    lines = [" ".join(src.symbols()) + "\t" + " ".join(tgt.symbols())
             for src, tgt in pairs]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
