"""Predict the gold sentence length from a delimited N-best list."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, LengthError
from .nn_core import ParameterStore, make_rng
from .nn_core import layers as L
from .nn_core import tensor as T
from .nn_core.optim import Adam
from .pinyin_encoder import TrainHyper
from .pinyin_lex import DELIMITER
from .semantic import encode, init_encoder, pad_batch, segment_layout
from .vocab import CharVocab

log = logging.getLogger(__name__)

PREFIX = "length_predictor/"


@dataclass
class NBestList:
    hypotheses: tuple
    uid: object = None

    def __post_init__(self):
        self.hypotheses = tuple(self.hypotheses)
        if not self.hypotheses:
            raise ValueError("N-best list is empty")
        if any(not h for h in self.hypotheses):
            raise ValueError("N-best list contains an empty hypothesis")

    def __len__(self):
        return len(self.hypotheses)

    def __getitem__(self, i):
        return self.hypotheses[i]

    def __iter__(self):
        return iter(self.hypotheses)


@dataclass
class ConcatSequence:
    tokens: list
    boundaries: list   # (hypothesis, offset) per token, None for delimiters

    @property
    def n_hypotheses(self):
        return sum(t == DELIMITER for t in self.tokens) + 1

    def hypotheses(self):
        out = [[] for _ in range(self.n_hypotheses)]
        for tok, b in zip(self.tokens, self.boundaries):
            if b is not None:
                out[b[0]].append(tok)
        return ["".join(h) for h in out]

    def __len__(self):
        return len(self.tokens)


def concat_nbest(nbest: Sequence[str], max_len: int = 128) -> ConcatSequence:
    """``S_1 | S_2 | ... | S_n``, dropping whole trailing hypotheses that
    would push the sequence past ``max_len``."""
    nbest = list(nbest)
    if not nbest:
        raise ValueError("N-best list is empty")
    if len(nbest[0]) > max_len:
        raise LengthError(f"1-best hypothesis ({len(nbest[0])} chars) exceeds max length {max_len}")
    tokens, bounds = [], []
    for k, hyp in enumerate(nbest):
        extra = len(hyp) + (1 if k else 0)
        if len(tokens) + extra > max_len:
            break
        if k:
            tokens.append(DELIMITER)
            bounds.append(None)
        tokens.extend(hyp)
        bounds.extend((k, i) for i in range(len(hyp)))
    return ConcatSequence(tokens, bounds)


@dataclass
class LengthDistribution:
    probs: np.ndarray
    length: int


def choose_length(probs, one_best_len):
    """Argmax over lengths 1..l_max; exact ties go to the 1-best length,
    then to the smaller length."""
    cand = probs[1:]
    top = np.flatnonzero(cand == cand.max()) + 1
    if one_best_len in top:
        return int(one_best_len)
    return int(top[0])


@dataclass
class LengthPredictorConfig:
    d: int = 64
    layers: int = 2
    mlp_hidden: int = 128
    l_max: int = 128
    n_best: int = 5

    def validate(self):
        if self.d % L.default_heads(self.d):
            raise ConfigError("length_predictor.d must be divisible by its head count")
        if self.l_max < 1 or self.n_best < 1 or self.layers < 1:
            raise ConfigError("length_predictor.l_max, n_best and layers must be positive")
        return self


@dataclass
class AccuracyLog:
    epochs: list = field(default_factory=list)     # (mean train loss, held-out accuracy)
    heldout_one_best: float | None = None
    skipped: int = 0


class LengthPredictor:
    def __init__(self, store: ParameterStore, config: LengthPredictorConfig, vocab: CharVocab):
        self.store = store
        self.config = config.validate()
        self.vocab = vocab

    @classmethod
    def create(cls, config, vocab, seed=0):
        config.validate()
        rng = make_rng(seed, 3)
        store = ParameterStore()
        init_encoder(store, PREFIX + "enc.", len(vocab), config.d, config.layers,
                     config.l_max, config.n_best, rng)
        L.init_mlp(store, PREFIX + "mlp.", [config.d, config.mlp_hidden, config.l_max + 1], rng)
        store.meta["length_predictor"] = asdict(config)
        store.meta["vocab"] = vocab.to_meta()
        return cls(store, config, vocab)

    @classmethod
    def from_store(cls, store):
        return cls(store, LengthPredictorConfig(**store.meta["length_predictor"]),
                   CharVocab.from_meta(store.meta["vocab"]))

    def concat(self, nbest):
        return concat_nbest(list(nbest)[:self.config.n_best], self.config.l_max)

    def logits(self, concats):
        p = self.store.sub(PREFIX)
        enc = {k[4:]: v for k, v in p.items() if k.startswith("enc.")}
        ids, pad = pad_batch([self.vocab.encode(c.tokens) for c in concats])
        layouts = [segment_layout(c.tokens) for c in concats]
        segs, _ = pad_batch([s for s, _ in layouts])
        poss, _ = pad_batch([q for _, q in layouts])
        E = encode(enc, ids, segs, poss, pad)
        keep = (~pad).astype(E.dtype)[..., None]
        pooled = (E * keep).sum(axis=1) / keep.sum(axis=1)
        return L.mlp(pooled, {k[4:]: v for k, v in p.items() if k.startswith("mlp.")})

    def predict_batch(self, concats) -> list:
        probs = T.softmax(self.logits(concats), axis=-1).data
        out = []
        for c, pr in zip(concats, probs):
            one_best = len(c.hypotheses()[0])
            out.append(LengthDistribution(pr, choose_length(pr, one_best)))
        return out

    def predict_length(self, concat: ConcatSequence) -> LengthDistribution:
        return self.predict_batch([concat])[0]

    def predict_nbest(self, nbests, batch_size=64) -> list:
        """Predicted lengths (ints) for many N-best lists."""
        out = []
        for start in range(0, len(nbests), batch_size):
            chunk = [self.concat(nb) for nb in nbests[start:start + batch_size]]
            out.extend(d.length for d in self.predict_batch(chunk))
        return out

    def loss(self, concats, lengths):
        return T.cross_entropy(self.logits(concats), np.asarray(lengths))


def train_length_predictor(train_records, vocab, heldout_records=(), config=None, hyper=None):
    """Train encoder and MLP jointly with cross-entropy over lengths.

    Records whose gold length exceeds ``l_max`` are skipped and counted.
    Returns (predictor, AccuracyLog) with held-out exact-length accuracy
    per epoch.
    """
    config = config or LengthPredictorConfig()
    hyper = hyper or TrainHyper(epochs=6, lr=1e-3, batch_size=32)
    history = AccuracyLog()
    data = []
    for rec in train_records:
        if not 1 <= len(rec.gold) <= config.l_max:
            history.skipped += 1
            continue
        data.append((concat_nbest(rec.nbest[:config.n_best], config.l_max), len(rec.gold)))
    if history.skipped:
        log.warning("skipped %d records with gold length outside 1..%d", history.skipped, config.l_max)
    if not data:
        raise ValueError("no usable training records")
    model = LengthPredictor.create(config, vocab, seed=hyper.seed)
    steps = hyper.epochs * -(-len(data) // hyper.batch_size)
    opt = Adam(model.store, hyper.lr, total_steps=steps, clip_norm=hyper.clip_norm)
    rng = make_rng(hyper.seed, 4)
    heldout_records = list(heldout_records)
    if heldout_records:
        history.heldout_one_best = np.mean([len(r.nbest[0]) == len(r.gold) for r in heldout_records])
    for epoch in range(hyper.epochs):
        order = rng.permutation(len(data))
        total = 0.0
        for start in range(0, len(order), hyper.batch_size):
            batch = [data[i] for i in order[start:start + hyper.batch_size]]
            loss = model.loss([c for c, _ in batch], [n for _, n in batch])
            T.backward(loss)
            opt.step()
            total += float(loss.data) * len(batch)
        acc = None
        if heldout_records:
            pred = model.predict_nbest([r.nbest for r in heldout_records])
            acc = float(np.mean([p == len(r.gold) for p, r in zip(pred, heldout_records)]))
        history.epochs.append((total / len(data), acc))
        log.info("length predictor epoch %d loss %.4f held-out acc %s", epoch + 1, total / len(data), acc)
    return model, history
