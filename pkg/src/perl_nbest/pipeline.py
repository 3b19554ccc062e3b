"""End-to-end correction: length prediction, then rephrasing.

``PERL`` bundles the three trained stages and applies the three ablations
at inference time:

``w/o-len``
    l̂ is the 1-best length instead of the predictor's output.
``w/o-pho``
    the phonetic gate g_p is forced to zero.
``w/o-nbest``
    the rephraser sees only the 1-best hypothesis (l̂ still comes from
    the full list).
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError, StateError
from .length_predictor import (LengthPredictor, LengthPredictorConfig,
                               train_length_predictor)
from .nn_core import ParameterStore
from .pinyin_encoder import (PinyinEncoder, PinyinEncoderConfig, TrainHyper,
                             pretrain_pinyin_encoder)
from .rephraser import Rephraser, RephraserConfig, train_rephraser
from .vocab import CharVocab

log = logging.getLogger(__name__)

ABLATIONS = ("w/o-len", "w/o-pho", "w/o-nbest")
PINYIN_CKPT = "pinyin_encoder.ckpt"
LENGTH_CKPT = "length_predictor.ckpt"
REPHRASER_CKPT = "rephraser.ckpt"


def _check_ablation(ablation):
    if ablation is not None and ablation not in ABLATIONS:
        raise ConfigError(f"ablation must be one of {ABLATIONS}, got {ablation!r}")


@dataclass
class PERL:
    pinyin: PinyinEncoder
    length: LengthPredictor
    rephraser: Rephraser

    def lengths(self, nbests, ablation=None, batch_size=64):
        _check_ablation(ablation)
        if ablation == "w/o-len":
            return [len(nb[0]) for nb in nbests]
        return self.length.predict_nbest(list(nbests), batch_size)

    def correct_batch(self, nbests, ablation=None, batch_size=64, lengths=None):
        """Corrected sentences; ``lengths`` may be passed to reuse l̂."""
        nbests = [list(nb) for nb in nbests]
        if lengths is None:
            lengths = self.lengths(nbests, ablation, batch_size)
        return self.rephraser.correct_batch(nbests, lengths, phonetic=ablation != "w/o-pho",
                                            one_best_only=ablation == "w/o-nbest",
                                            batch_size=batch_size)

    def correct(self, nbest, ablation=None):
        return self.correct_batch([nbest], ablation)[0]

    def save(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        self.pinyin.store.save(directory / PINYIN_CKPT)
        self.length.store.save(directory / LENGTH_CKPT)
        self.rephraser.store.save(directory / REPHRASER_CKPT)

    @classmethod
    def load(cls, directory, lex):
        directory = Path(directory)
        pinyin = load_pinyin(directory / PINYIN_CKPT, lex)
        length = LengthPredictor.from_store(ParameterStore.load(directory / LENGTH_CKPT))
        rephraser = Rephraser.from_store(ParameterStore.load(directory / REPHRASER_CKPT), pinyin)
        return cls(pinyin, length, rephraser)


def load_pinyin(path, lex):
    enc = PinyinEncoder.from_store(ParameterStore.load(path), lex)
    if not enc.frozen:
        raise StateError(f"{path} holds an unfrozen pinyin encoder")
    return enc


def correct(nbest, pinyin, length, rephraser):
    """Correct one N-best list with separately held components."""
    return PERL(pinyin, length, rephraser).correct(nbest)


def build_vocab(records, sentences=()):
    """Characters from golds, hypotheses and any extra sentences."""
    chars = set()
    for r in records:
        chars.update(r.gold)
        for h in r.nbest:
            chars.update(h)
    for s in sentences:
        chars.update(s)
    return CharVocab(chars)


def stage_configs(cfg, vocab):
    """Per-stage configs and hyperparameters from a PipelineConfig."""
    return {
        "pinyin": (PinyinEncoderConfig(d_p=cfg.pinyin_dim, layers=cfg.pinyin_layers,
                                       heads=max(1, cfg.pinyin_dim // 16), char_vocab_size=len(vocab),
                                       max_chars=cfg.l_max),
                   TrainHyper(cfg.pinyin_epochs, cfg.pinyin_lr, cfg.pinyin_batch, cfg.seed)),
        "length": (LengthPredictorConfig(d=cfg.length_dim, layers=cfg.length_layers,
                                         mlp_hidden=2 * cfg.length_dim, l_max=cfg.l_max,
                                         n_best=cfg.n_best),
                   TrainHyper(cfg.length_epochs, cfg.length_lr, cfg.length_batch, cfg.seed)),
        "rephraser": (RephraserConfig(mask_rate=cfg.mask_rate, l_max=cfg.l_max, n_best=cfg.n_best,
                                      d=cfg.rephraser_dim, gate_hidden=cfg.gate_hidden,
                                      semantic_layers=cfg.rephraser_layers,
                                      predictor_layers=cfg.predictor_layers, pool=cfg.pool),
                      TrainHyper(cfg.rephraser_epochs, cfg.rephraser_lr, cfg.rephraser_batch, cfg.seed)),
    }


def train_pipeline(cfg, lex, train_records, heldout_records=(), pretrain_sentences=None):
    """Run the three training stages in order. Returns (PERL, logs).

    ``logs["seconds"]`` holds the wall time of each stage.
    """
    if pretrain_sentences is None:
        pretrain_sentences = [r.gold for r in train_records]
    vocab = build_vocab(train_records, pretrain_sentences)
    stages = stage_configs(cfg, vocab)
    seconds = {}
    t0 = time.perf_counter()
    pinyin, p_log = pretrain_pinyin_encoder(pretrain_sentences, lex, *stages["pinyin"], vocab=vocab)
    pinyin.freeze()
    seconds["pinyin"], t0 = time.perf_counter() - t0, time.perf_counter()
    length, l_log = train_length_predictor(train_records, vocab, heldout_records, *stages["length"])
    seconds["length"], t0 = time.perf_counter() - t0, time.perf_counter()
    rephraser, r_log = train_rephraser(train_records, pinyin, vocab, *stages["rephraser"])
    seconds["rephraser"] = time.perf_counter() - t0
    logs = {"pinyin": p_log, "length": l_log, "rephraser": r_log, "seconds": seconds}
    return PERL(pinyin, length, rephraser), logs
