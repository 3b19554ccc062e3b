"""Phonetic encoder: pinyin tokens -> GRU per character -> transformer
layers over characters, pretrained to recover characters from pinyin."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError, LengthError
from .nn_core import ParameterStore, Tensor, make_rng
from .nn_core import layers as L
from .nn_core import tensor as T
from .nn_core.optim import Adam
from .pinyin_lex import PINYIN_VOCAB, PinyinLexicon, to_pinyin_ids
from .semantic import pad_batch, run_layers, segment_layout
from .vocab import CharVocab

log = logging.getLogger(__name__)

PREFIX = "pinyin_encoder/"


@dataclass
class PinyinEncoderConfig:
    d_p: int = 64
    layers: int = 2
    heads: int = 4
    char_vocab_size: int = 0
    max_chars: int = 128
    pinyin_vocab_size: int = len(PINYIN_VOCAB)

    def validate(self):
        if self.layers < 1:
            raise ConfigError("pinyin_encoder.layers must be >= 1")
        if self.heads < 1 or self.d_p % self.heads:
            raise ConfigError("pinyin_encoder.d_p must be divisible by pinyin_encoder.heads")
        if self.pinyin_vocab_size != len(PINYIN_VOCAB):
            raise ConfigError(f"pinyin_encoder.pinyin_vocab_size must be {len(PINYIN_VOCAB)}")
        if self.char_vocab_size < 1:
            raise ConfigError("pinyin_encoder.char_vocab_size must be set")
        return self


@dataclass
class TrainHyper:
    epochs: int = 10
    lr: float = 5e-4
    batch_size: int = 16
    seed: int = 0
    clip_norm: float = 1.0


@dataclass
class LossLog:
    initial: float                # untrained loss over the whole corpus
    epochs: list                  # mean training loss per epoch


@dataclass
class PhoneticSequence:
    E_p: Tensor
    n: int


class PinyinEncoder:
    def __init__(self, store: ParameterStore, config: PinyinEncoderConfig, lex: PinyinLexicon,
                 vocab: CharVocab):
        self.store = store
        self.config = config.validate()
        self.lex = lex
        self.vocab = vocab

    @classmethod
    def create(cls, config, lex, vocab, seed=0, dtype=np.float32):
        config.char_vocab_size = len(vocab)
        config.validate()
        rng = make_rng(seed, 1)
        store = ParameterStore(dtype)
        d = config.d_p
        store.normal(PREFIX + "emb", (config.pinyin_vocab_size, d), rng, 0.1)
        L.init_gru(store, PREFIX + "gru.", d, d, rng)
        store.normal(PREFIX + "pos", (config.max_chars, d), rng)
        for i in range(config.layers):
            L.init_transformer_layer(store, f"{PREFIX}layer{i}.", d, rng)
        store.ones(PREFIX + "ln_f.g", (d,))
        store.zeros(PREFIX + "ln_f.b", (d,))
        store.normal(PREFIX + "head.w", (d, config.char_vocab_size), rng)
        store.zeros(PREFIX + "head.b", (config.char_vocab_size,))
        store.meta["pinyin_encoder"] = asdict(config)
        store.meta["vocab"] = vocab.to_meta()
        return cls(store, config, lex, vocab)

    @classmethod
    def from_store(cls, store, lex):
        config = PinyinEncoderConfig(**store.meta["pinyin_encoder"])
        return cls(store, config, lex, CharVocab.from_meta(store.meta["vocab"]))

    @property
    def params(self):
        return self.store.sub(PREFIX)

    @property
    def frozen(self):
        return all(self.store.is_frozen(k) for k in self.store if k.startswith(PREFIX))

    def freeze(self):
        self.store.freeze(PREFIX)

    # -- forward ----------------------------------------------------------------
    def encode_batch(self, texts):
        """Encode token sequences (strings or lists; ``|`` delimits
        hypotheses). Returns ((B, N, d_p) tensor, pad_mask)."""
        for t in texts:
            if len(t) > self.config.max_chars:
                raise LengthError(f"{len(t)} characters exceed max_chars={self.config.max_chars}")
        p = self.params
        # each distinct pinyin spelling goes through the GRU once; row 0 = padding
        index = {(): 0}
        rows = []
        for t in texts:
            rows.append([index.setdefault(tuple(ids), len(index)) for ids in to_pinyin_ids(t, self.lex)])
        spellings = sorted(index, key=index.get)
        tok, lens = np.zeros((len(spellings), max(map(len, spellings))), np.int64), np.zeros(len(spellings))
        for u, sp in enumerate(spellings):
            tok[u, :len(sp)] = sp
            lens[u] = len(sp)
        xs = L.embedding_lookup(p["emb"], tok)
        char_states = L.gru_last_state(xs, lens, {k[4:]: v for k, v in p.items() if k.startswith("gru.")})
        ids, pad_mask = pad_batch(rows, 0)
        poss, _ = pad_batch([segment_layout(t)[1] for t in texts], 0)
        X = L.embedding_lookup(char_states, ids) + L.embedding_lookup(p["pos"], poss)
        return run_layers(p, X, pad_mask, heads=self.config.heads), pad_mask

    def encode_phonetic(self, text) -> PhoneticSequence:
        E, _ = self.encode_batch([text])
        return PhoneticSequence(E.reshape(len(text), self.config.d_p), len(text))

    def logits(self, E):
        p = self.params
        return E @ p["head.w"] + p["head.b"]

    def predict_characters(self, phon: PhoneticSequence) -> np.ndarray:
        """(n, C) probabilities; row i is the softmax at character i."""
        return T.softmax(self.logits(phon.E_p), axis=-1).data

    def loss(self, sentences):
        """Per-sentence mean character cross-entropy, averaged over the batch."""
        E, pad_mask = self.encode_batch(sentences)
        B, N, _ = E.shape
        targets = np.full((B, N), T.IGNORE, np.int64)
        weights = np.zeros((B, N))
        for b, s in enumerate(sentences):
            targets[b, :len(s)] = self.vocab.encode(s)
            weights[b, :len(s)] = 1.0 / len(s)
        logits = self.logits(E).reshape(B * N, -1)
        return T.cross_entropy(logits, targets.reshape(-1), reduction="sum",
                               weights=weights.reshape(-1) / B)


def pretrain_pinyin_encoder(sentences, lex, config=None, hyper=None, vocab=None, on_epoch=None):
    """Train on error-free sentences; returns (encoder, LossLog)."""
    sentences = [s for s in sentences if s]
    if not sentences:
        raise ValueError("empty pretraining corpus")
    config = config or PinyinEncoderConfig()
    hyper = hyper or TrainHyper()
    vocab = vocab or CharVocab.from_sentences(sentences)
    too_long = [s for s in sentences if len(s) > config.max_chars]
    if too_long:
        raise LengthError(f"{len(too_long)} sentences exceed max_chars={config.max_chars}")
    enc = PinyinEncoder.create(config, lex, vocab, seed=hyper.seed)
    steps_per_epoch = -(-len(sentences) // hyper.batch_size)
    opt = Adam(enc.store, hyper.lr, total_steps=hyper.epochs * steps_per_epoch, clip_norm=hyper.clip_norm)
    rng = make_rng(hyper.seed, 2)
    history = LossLog(corpus_loss(enc, sentences, hyper.batch_size), [])
    for epoch in range(hyper.epochs):
        order = rng.permutation(len(sentences))
        total = 0.0
        for start in range(0, len(order), hyper.batch_size):
            batch = [sentences[i] for i in order[start:start + hyper.batch_size]]
            loss = enc.loss(batch)
            T.backward(loss)
            opt.step()
            total += float(loss.data) * len(batch)
        history.epochs.append(total / len(sentences))
        log.info("pinyin encoder epoch %d loss %.4f", epoch + 1, history.epochs[-1])
        if on_epoch:
            on_epoch(epoch, history.epochs[-1])
    return enc, history


def corpus_loss(enc, sentences, batch_size=64):
    total = 0.0
    for start in range(0, len(sentences), batch_size):
        batch = sentences[start:start + batch_size]
        total += float(enc.loss(batch).data) * len(batch)
    return total / len(sentences)
