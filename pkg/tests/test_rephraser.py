import numpy as np
import pytest

from perl_nbest.corpus import CorpusRecord
from perl_nbest.errors import ConfigError, ContractError, LengthError
from perl_nbest.nn_core import IGNORE, ParameterStore, Tensor, gradient_check, make_rng
from perl_nbest.nn_core import layers as L
from perl_nbest.nn_core import tensor as T
from perl_nbest.pinyin_encoder import PinyinEncoder, PinyinEncoderConfig, TrainHyper
from perl_nbest.pinyin_lex import DELIMITER, MASK
from perl_nbest.rephraser import (Rephraser, RephraserConfig, build_input, fuse,
                                  sentence_embedding, train_rephraser)
from perl_nbest.vocab import CharVocab

NBEST = ["今天天汽很好", "今天天气很好", "今天天汽好"]
GOLD = "今天天气很好"


def _pinyin(lex, vocab, d_p=8, frozen=True):
    enc = PinyinEncoder.create(PinyinEncoderConfig(d_p=d_p, heads=1, layers=1), lex, vocab, seed=3)
    if frozen:
        enc.freeze()
    return enc


@pytest.fixture(scope="module")
def vocab():
    return CharVocab("今天气汽很好不错")


@pytest.fixture(scope="module")
def model(lex, vocab):
    cfg = RephraserConfig(d=16, gate_hidden=8, semantic_layers=1, l_max=32, n_best=3)
    return Rephraser.create(cfg, vocab, _pinyin(lex, vocab), seed=1)


# -- input construction ----------------------------------------------------------

def test_inference_input_without_masking():
    m = build_input(NBEST, 6, mask_rate=0.0, l_max=32, n_best=3)
    src = list("|".join(NBEST))
    assert m.source == src
    assert m.tokens == src + [MASK] * 6
    assert m.dynamic == []
    assert m.appended == list(range(len(src), len(src) + 6))
    assert all(t is None for t in m.targets)
    assert [i for i, v in enumerate(m.phon_map) if v is None] == m.appended
    assert m.segments[-6:] == [3] * 6 and m.positions[-6:] == list(range(6))


def test_training_targets():
    m = build_input(NBEST, 6, gold=GOLD, mask_rate=0.3, rng=make_rng(0), l_max=32, n_best=3)
    assert [m.targets[i] for i in m.appended] == list(GOLD)
    for i in m.dynamic:
        assert m.tokens[i] == MASK and m.targets[i] == m.source[i] != DELIMITER
    for i in set(range(len(m.tokens))) - set(m.masked):
        assert m.targets[i] is None
    with pytest.raises(ContractError):
        build_input(NBEST, 5, gold=GOLD, mask_rate=0.0)


def test_mask_rate_limit_masks_every_character():
    m = build_input(NBEST, 6, mask_rate=1 - 1e-12, rng=make_rng(0), l_max=32, n_best=3)
    assert m.dynamic == [i for i, t in enumerate(m.source) if t != DELIMITER]


def test_dynamic_mask_count_and_resampling():
    hyps = ["天" * 100] * 10
    a = build_input(hyps, 1, mask_rate=0.2, rng=make_rng(7, 0), l_max=2000, n_best=10)
    b = build_input(hyps, 1, mask_rate=0.2, rng=make_rng(7, 1), l_max=2000, n_best=10)
    assert 160 <= len(a.dynamic) <= 240
    assert a.dynamic != b.dynamic
    assert a.appended == b.appended


def test_target_length_bounds():
    with pytest.raises(LengthError):
        build_input(NBEST, 32, mask_rate=0.0, l_max=32)


# -- sentence embedding and fusion ----------------------------------------------------

def test_sentence_embedding():
    assert not np.any(sentence_embedding(Tensor(np.zeros((128, 4))), 128).data)
    E = np.zeros((128, 4))
    E[3] = [1, 2, 3, 4]
    np.testing.assert_allclose(sentence_embedding(Tensor(E), 128).data, E[3] / 128)
    rng = make_rng(0)
    R = rng.normal(size=(2, 10, 4))
    pad = np.zeros((2, 10), bool)
    pad[1, 6:] = True
    out = sentence_embedding(Tensor(R), 128, pad).data
    brute = np.array([sum(R[0, i] for i in range(10)) / 128, sum(R[1, i] for i in range(6)) / 128])
    np.testing.assert_allclose(out, brute, atol=1e-6)
    by_len = sentence_embedding(Tensor(R), 128, pad, divisor=[10, 6]).data
    np.testing.assert_allclose(by_len[1], R[1, :6].mean(axis=0), atol=1e-12)
    with pytest.raises(LengthError):
        sentence_embedding(Tensor(np.zeros((5, 2))), 4)


def _gates(d, rng, bias):
    s = ParameterStore(np.float64)
    for g in ("s.", "p."):
        L.init_mlp(s, g, [3 * d, 5, d], rng)
        s[g + "l1.b"].data[...] = bias
    return s.sub("")


def test_fuse_saturation_and_gate_range():
    rng = make_rng(2)
    E_s, E_p = Tensor(rng.normal(size=(4, 6))), Tensor(rng.normal(size=(4, 6)))
    e_bar = Tensor(rng.normal(size=(6,)))
    E_f, gates = fuse(E_s, E_p, e_bar, _gates(6, rng, 20.0))
    np.testing.assert_allclose(E_f.data, E_s.data + E_p.data, atol=1e-6)
    E_f, _ = fuse(E_s, E_p, e_bar, _gates(6, rng, -20.0))
    np.testing.assert_allclose(E_f.data, 0.0, atol=1e-6)
    _, gates = fuse(E_s, E_p, e_bar, _gates(6, rng, 0.0))
    for g in (gates.g_s.data, gates.g_p.data):
        assert np.all((g > 0) & (g < 1))
    with pytest.raises(ConfigError):
        fuse(E_s, Tensor(np.zeros((4, 5))), e_bar, _gates(6, rng, 0.0))


# -- model ---------------------------------------------------------------------------

def test_output_length_equals_requested(model):
    outs = model.correct_batch([NBEST, ["今天"], ["好不错"]], [6, 1, 9])
    assert [len(o) for o in outs] == [6, 1, 9]
    assert all(c in model.vocab.stoi and model.vocab.stoi[c] >= 4 for o in outs for c in o)


def test_errors(model, lex, vocab):
    m = model.build_input(NBEST, 6, mask_rate=0.0)
    m.tokens = m.tokens + [MASK] * 40
    with pytest.raises(LengthError):
        model.forward([m])
    loose = Rephraser(model.store, model.config, vocab, _pinyin(lex, vocab, frozen=False))
    with pytest.raises(ContractError):
        loose.forward([model.build_input(NBEST, 6, mask_rate=0.0)])
    with pytest.raises(ContractError):
        train_rephraser([CorpusRecord(GOLD, NBEST)], loose.pinyin, vocab)


def test_loss_over_all_positions_matches_masked_loss(model):
    batch = [model.build_input(NBEST, 6, GOLD, rng=make_rng(i), mask_rate=0.3) for i in range(2)]
    masked = float(model.loss(batch).data)
    logits, rows = model.forward(batch, query="all")
    targets = [model.vocab.stoi[batch[b].targets[i]] if batch[b].targets[i] else IGNORE for b, i in rows]
    full = float(T.cross_entropy(logits, np.array(targets), reduction="sum").data) / 2
    assert masked == pytest.approx(full, rel=1e-6)
    assert len(rows) == sum(len(m.tokens) for m in batch)


def test_without_pho_equals_zero_phonetic_gate(lex, vocab):
    cfg = RephraserConfig(d=16, gate_hidden=8, semantic_layers=1, l_max=32, n_best=3)
    model = Rephraser.create(cfg, vocab, _pinyin(lex, vocab), seed=5)
    inputs = [model.build_input(NBEST, 6, mask_rate=0.0)]
    ablated = model.forward(inputs, phonetic=False)[0].data
    model.store["gates/p.l1.b"].data[...] = -1e4     # sigmoid(-1e4) == 0 exactly
    gated = model.forward(inputs, phonetic=True)[0].data
    assert ablated.tobytes() == gated.tobytes()


def test_adapter_created_only_for_unequal_widths(lex, vocab):
    same = Rephraser.create(RephraserConfig(d=16, semantic_layers=1), vocab, _pinyin(lex, vocab, 16))
    other = Rephraser.create(RephraserConfig(d=16, semantic_layers=1), vocab, _pinyin(lex, vocab, 8))
    assert "rephraser/adapter.w" not in same.store
    assert other.store["rephraser/adapter.w"].shape == (8, 16)


def test_mask_loss_gradient(lex, vocab):
    cfg = RephraserConfig(d=16, gate_hidden=6, semantic_layers=1, l_max=32, n_best=3)
    model = Rephraser.create(cfg, vocab, _pinyin(lex, vocab), seed=2)
    batch = [model.build_input(NBEST, 6, GOLD, rng=make_rng(3), mask_rate=0.3),
             model.build_input(["不错"], 2, "不错", rng=make_rng(4), mask_rate=0.3)]
    phon = model.phonetic_rows(batch)

    def loss(store):
        return Rephraser(store, cfg, vocab, model.pinyin).loss(batch, phon)

    assert gradient_check(loss, model.store, max_coords=15) < 1e-4


def test_training_memorizes_and_keeps_encoder_frozen(lex):
    sents = ["今天天气很好", "明天不错", "天气很冷", "我们去公园", "他很好", "公园很大",
             "明天下雨", "我们很好", "今天很冷", "他去公园"]
    vocab = CharVocab.from_sentences(sents)
    pinyin = _pinyin(lex, vocab, 16)
    before = {k: v.data.tobytes() for k, v in pinyin.store.items()}
    records = [CorpusRecord(s, [s] * 5) for s in sents]
    cfg = RephraserConfig(d=32, gate_hidden=16, semantic_layers=1, l_max=64)
    model, log = train_rephraser(records, pinyin, vocab, cfg,
                                 TrainHyper(epochs=60, lr=3e-3, batch_size=5))
    assert log.epochs[-1] < log.epochs[0]
    assert model.correct_batch([r.nbest for r in records], [len(s) for s in sents]) == sents
    assert all(pinyin.store[k].data.tobytes() == b for k, b in before.items())
