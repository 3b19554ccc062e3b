"""Synthetic N-best data from a pinyin-confusion noise channel.

Each hypothesis is an independent noisy copy of the gold sentence; lower
ranks are noisier. Substituted and inserted characters are drawn from a
confusion model built on pinyin similarity, so errors look phonetic.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .evaluation import levenshtein
from .nn_core.params import make_rng
from .pinyin_lex import PinyinLexicon

# confusion weights by pinyin relation
W_HOMOPHONE = 4.0        # same letters, same tone
W_TONE = 2.0             # same letters, different tone
W_NEAR = 0.5             # letter edit distance 1


@dataclass
class CorpusRecord:
    gold: str
    nbest: list
    edits: list | None = None

    def __post_init__(self):
        if not self.gold:
            raise ValueError("empty gold sentence")
        if not self.nbest:
            raise ValueError("empty N-best list")

    def to_json(self) -> str:
        obj = {"gold": self.gold, "nbest": list(self.nbest)}
        if self.edits is not None:
            obj["edits"] = self.edits
        return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str) -> "CorpusRecord":
        obj = json.loads(line)
        return cls(obj["gold"], list(obj["nbest"]), obj.get("edits"))


@dataclass
class ConfusionModel:
    candidates: dict  # char -> list of (substitute, weight), best first

    def draw(self, ch, rng):
        cands = self.candidates.get(ch)
        if not cands:
            return None
        weights = np.array([w for _, w in cands], dtype=np.float64)
        k = rng.choice(len(cands), p=weights / weights.sum())
        return cands[k][0]


@dataclass
class NoiseParams:
    p_sub: float = 0.08
    p_del: float = 0.02
    p_ins: float = 0.02
    severity: float = 1.5
    seed: int = 0

    def __post_init__(self):
        for name in ("p_sub", "p_del", "p_ins"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ValueError(f"{name}={v} outside [0, 1)")
        if self.p_sub + self.p_del + self.p_ins >= 1.0:
            raise ValueError("p_sub + p_del + p_ins must be < 1")
        if self.severity < 1.0:
            raise ValueError("severity must be >= 1 (rank k is never cleaner than rank 1)")

    def for_rank(self, k):
        """Per-character probabilities for 0-based rank ``k``."""
        scale = self.severity ** k
        probs = np.array([self.p_sub, self.p_del, self.p_ins]) * scale
        total = probs.sum()
        if total > 0.95:
            probs *= 0.95 / total
        return probs


NOISE_PRESETS = {
    "default": dict(p_sub=0.08, p_del=0.02, p_ins=0.02, severity=1.5),
    "clean": dict(p_sub=0.0, p_del=0.0, p_ins=0.0, severity=1.0),
    "sub-only": dict(p_sub=0.08, p_del=0.0, p_ins=0.0, severity=1.5),
    "heavy": dict(p_sub=0.15, p_del=0.04, p_ins=0.04, severity=1.3),
}


def build_confusion_model(lex: PinyinLexicon, vocab: Iterable[str]) -> ConfusionModel:
    """Rank, for every vocabulary character, the others by pinyin similarity."""
    chars = sorted(set(vocab))
    syl = {c: lex.get(c) for c in chars}
    out = {}
    for c in chars:
        s = syl[c]
        cands = []
        if s is not None:
            for o in chars:
                t = syl[o]
                if o == c or t is None:
                    continue
                if t.letters == s.letters:
                    w = W_HOMOPHONE if t.tone == s.tone else W_TONE
                elif abs(len(t.letters) - len(s.letters)) <= 1 and levenshtein(t.letters, s.letters) == 1:
                    w = W_NEAR
                else:
                    continue
                cands.append((o, w))
        cands.sort(key=lambda cw: (-cw[1], cw[0]))
        out[c] = cands
    return ConfusionModel(out)


def _noisy_copy(gold, conf, probs, rng):
    p_sub, p_del, p_ins = probs
    out, edits = [], []
    for i, ch in enumerate(gold):
        u = rng.random()
        if u < p_del:
            edits.append(["del", i, ch])
            continue
        if u < p_del + p_sub:
            sub = conf.draw(ch, rng)
            if sub is not None:
                out.append(sub)
                edits.append(["sub", i, sub])
                continue
        out.append(ch)
        if p_del + p_sub <= u < p_del + p_sub + p_ins:
            extra = conf.draw(ch, rng) or ch
            out.append(extra)
            edits.append(["ins", i, extra])
    return "".join(out), edits


def generate_nbest(gold: str, conf: ConfusionModel, params: NoiseParams, n: int, rng) -> CorpusRecord:
    """Draw ``n`` independent noisy hypotheses, rank ``k`` using
    ``params.severity ** k`` times the base rates. Edits are recorded per
    hypothesis as ``[op, gold_index, char]`` (insertions follow the index)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    nbest, edits = [], []
    for k in range(n):
        probs = params.for_rank(k)
        while True:
            hyp, ed = _noisy_copy(gold, conf, probs, rng)
            if hyp:
                break
        nbest.append(hyp)
        edits.append(ed)
    return CorpusRecord(gold, nbest, edits)


def replay_edits(gold: str, edits) -> str:
    """Rebuild a hypothesis from its recorded edits."""
    by_pos = {}
    for op, i, ch in edits:
        by_pos.setdefault(i, []).append((op, ch))
    out = []
    for i, ch in enumerate(gold):
        ops = dict(by_pos.get(i, []))
        if "del" in ops:
            continue
        out.append(ops.get("sub", ch))
        if "ins" in ops:
            out.append(ops["ins"])
    return "".join(out)


def make_corpus(sentences: Sequence[str], conf: ConfusionModel, params: NoiseParams, n: int = 5,
                start: int = 0):
    """One record per sentence; record ``i`` uses the stream (seed, start + i),
    so a slice of a larger corpus reproduces the same records."""
    return [generate_nbest(s, conf, params, n, make_rng(params.seed, start + i))
            for i, s in enumerate(sentences)]


def dataset_stats(records) -> dict:
    """Sentence count, mean gold length and #Equal (1-best length == gold length)."""
    records = list(records)
    return {
        "sentences": len(records),
        "mean_length": float(np.mean([len(r.gold) for r in records])) if records else 0.0,
        "equal": sum(len(r.nbest[0]) == len(r.gold) for r in records),
    }


def write_corpus(path, records) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for rec in records:
            f.write(rec.to_json() + "\n")


def read_corpus(path) -> list:
    with open(path, encoding="utf-8") as f:
        return [CorpusRecord.from_json(line) for line in f if line.strip()]


def load_sentences(path) -> list:
    """UTF-8 text, one sentence per line; blank lines skipped."""
    return [s.strip() for s in Path(path).read_text(encoding="utf-8").splitlines() if s.strip()]


def bundled_sentences(name="gold") -> list:
    """``gold`` (12k sentences, three domains) or ``toy`` (64-character vocabulary)."""
    fname = {"gold": "gold_sentences.txt", "toy": "toy_sentences.txt"}[name]
    text = resources.files("perl_nbest.data").joinpath(fname).read_text(encoding="utf-8")
    return [s for s in text.splitlines() if s]
