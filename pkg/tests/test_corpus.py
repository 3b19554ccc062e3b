import numpy as np
import pytest

from perl_nbest.corpus import (NOISE_PRESETS, CorpusRecord, NoiseParams, build_confusion_model,
                               bundled_sentences, dataset_stats, generate_nbest, make_corpus,
                               read_corpus, replay_edits, write_corpus)
from perl_nbest.evaluation import cer, corpus_cer
from perl_nbest.nn_core import make_rng
from perl_nbest.pinyin_lex import bundled_lexicon


@pytest.fixture(scope="module")
def sentences():
    return bundled_sentences()


@pytest.fixture(scope="module")
def conf(sentences):
    return build_confusion_model(bundled_lexicon(), {c for s in sentences for c in s})


def test_confusion_candidates():
    lex = bundled_lexicon()
    conf = build_confusion_model(lex, "宗松棕总")
    cands = dict(conf.candidates["宗"])
    assert "松" in cands                       # zong1 / song1: one letter apart
    assert cands["棕"] > cands["总"] > cands["松"]   # homophone > tone change > near letters
    assert "宗" not in cands
    assert all(w > 0 for w in cands.values())
    assert build_confusion_model(lex, "宗").candidates["宗"] == []


def test_bundled_sentences_cover_lexicon():
    lex = bundled_lexicon()
    for name in ("gold", "toy"):
        sents = bundled_sentences(name)
        assert len(sents) >= 500
        assert all(c in lex for s in sents for c in s)
    assert len({c for s in bundled_sentences("toy") for c in s}) <= 100


def test_zero_noise_is_identity(sentences, conf):
    params = NoiseParams(**NOISE_PRESETS["clean"])
    for rec in make_corpus(sentences[:50], conf, params):
        assert rec.nbest == [rec.gold] * 5


def test_deletions_only_shorten(sentences, conf):
    params = NoiseParams(p_sub=0.0, p_del=0.2, p_ins=0.0)
    for rec in make_corpus(sentences[:200], conf, params):
        assert all(len(h) <= len(rec.gold) for h in rec.nbest)


def test_substitutions_keep_length(sentences, conf):
    records = make_corpus(sentences[:300], conf, NoiseParams(**NOISE_PRESETS["sub-only"]))
    assert dataset_stats(records)["equal"] == len(records)


def test_edits_replay_exactly(sentences, conf):
    records = make_corpus(sentences[:500], conf, NoiseParams(**NOISE_PRESETS["heavy"]))
    for rec in records:
        for hyp, ed in zip(rec.nbest, rec.edits):
            assert replay_edits(rec.gold, ed) == hyp


def test_noise_params_validation():
    with pytest.raises(ValueError):
        NoiseParams(p_sub=0.5, p_del=0.3, p_ins=0.3)
    with pytest.raises(ValueError):
        NoiseParams(p_sub=1.0)
    with pytest.raises(ValueError):
        generate_nbest("天", None, NoiseParams(), 0, make_rng(0))


def test_default_one_best_cer_band_and_severity(sentences, conf):
    records = make_corpus(sentences[:10000], conf, NoiseParams())
    refs = [r.gold for r in records]
    one_best = corpus_cer([r.nbest[0] for r in records], refs)
    assert 0.06 <= one_best <= 0.14
    per_rank = [np.mean([cer(r.nbest[k], r.gold) for r in records[:2000]]) for k in range(5)]
    assert all(a <= b for a, b in zip(per_rank, per_rank[1:]))


def test_stats():
    recs = [CorpusRecord("天气", ["天汽"]), CorpusRecord("很好啊", ["很好"])]
    assert dataset_stats(recs) == {"sentences": 2, "mean_length": 2.5, "equal": 1}


def test_round_trip_and_determinism(tmp_path, sentences, conf):
    a = make_corpus(sentences[:200], conf, NoiseParams(seed=3))
    b = make_corpus(sentences[:200], conf, NoiseParams(seed=3))
    write_corpus(tmp_path / "a.jsonl", a)
    write_corpus(tmp_path / "b.jsonl", b)
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
    assert read_corpus(tmp_path / "a.jsonl") == a
    # a slice regenerated with its offset matches the full corpus
    assert make_corpus(sentences[50:60], conf, NoiseParams(seed=3), start=50) == a[50:60]
    assert make_corpus(sentences[:200], conf, NoiseParams(seed=4)) != a


def test_file_format(tmp_path):
    write_corpus(tmp_path / "c.jsonl", [CorpusRecord("天气", ["天汽", "天气"], [[["sub", 1, "汽"]], []])])
    line = (tmp_path / "c.jsonl").read_text(encoding="utf-8")
    assert line == '{"gold":"天气","nbest":["天汽","天气"],"edits":[[["sub",1,"汽"]],[]]}\n'
