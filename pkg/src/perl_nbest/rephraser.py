"""Pinyin-enhanced rephrasing model.

The N-best concatenation gets ``l`` appended ``[M]`` tokens (``l`` = gold
length in training, predicted length at inference) and some source tokens
dynamically masked. A semantic encoder reads the masked sequence, the
frozen pinyin encoder reads the unmasked concatenation, and two sigmoid
gate MLPs mix the two per token before a small mask-prediction stack
fills in every appended position.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError, ContractError, LengthError
from .length_predictor import concat_nbest
from .nn_core import ParameterStore, make_rng
from .nn_core import layers as L
from .nn_core import tensor as T
from .nn_core.optim import Adam
from .nn_core.tensor import as_tensor
from .pinyin_encoder import PinyinEncoder, TrainHyper
from .pinyin_lex import DELIMITER, MASK
from .semantic import embed, init_encoder, pad_batch, run_layers, segment_layout
from .vocab import SPECIALS, CharVocab

log = logging.getLogger(__name__)

PREFIX = "rephraser/"
GATES = "gates/"


@dataclass
class RephraserConfig:
    mask_rate: float = 0.2
    l_max: int = 128
    n_best: int = 5
    d: int = 64
    gate_hidden: int = 64
    semantic_layers: int = 2
    predictor_layers: int = 1
    pool: str = "l_max"     # ē_s divisor: "l_max" (as written) or "length"

    def validate(self):
        if not 0.0 <= self.mask_rate < 1.0:
            raise ConfigError("rephraser.mask_rate must be in [0, 1)")
        if self.n_best < 1:
            raise ConfigError("rephraser.n_best must be >= 1")
        if self.pool not in ("l_max", "length"):
            raise ConfigError("rephraser.pool must be 'l_max' or 'length'")
        if self.d % L.default_heads(self.d):
            raise ConfigError("rephraser.d must be divisible by its head count")
        return self


@dataclass
class MaskedInput:
    tokens: list          # S_masked
    source: list          # S_concat (unmasked)
    segments: list
    positions: list
    dynamic: list         # dynamically masked source positions
    appended: list        # the final len(appended) positions
    targets: list         # character or None (ignored) per position
    phon_map: list        # source position feeding the phonetic row, None = NULL vector

    @property
    def masked(self):
        return sorted(self.dynamic + self.appended)


def build_input(nbest, target_len, gold=None, mask_rate=0.2, rng=None, l_max=128, n_best=5):
    """Masked rephraser input for one N-best list.

    With ``gold`` (training), ``target_len`` must equal ``len(gold)``;
    appended positions target the gold characters and dynamically masked
    source positions target their original token. Without ``gold`` every
    target is ignored.
    """
    if gold is not None and target_len != len(gold):
        raise ContractError(f"training length {target_len} != gold length {len(gold)}")
    if not 1 <= target_len < l_max:
        raise LengthError(f"target length {target_len} outside 1..{l_max - 1}")
    concat = concat_nbest(list(nbest)[:n_best], l_max - target_len)
    source = list(concat.tokens)
    tokens = list(source)
    dynamic = []
    if mask_rate > 0:
        if rng is None:
            raise ValueError("dynamic masking needs an rng")
        draws = rng.random(len(source))
        for i, tok in enumerate(source):
            if tok != DELIMITER and draws[i] < mask_rate:
                tokens[i] = MASK
                dynamic.append(i)
    segs, poss = segment_layout(source)
    n = len(source)
    appended = list(range(n, n + target_len))
    tokens += [MASK] * target_len
    segs += [n_best] * target_len
    poss += list(range(target_len))
    targets = [None] * len(tokens)
    if gold is not None:
        for i in dynamic:
            targets[i] = source[i]
        for j, i in enumerate(appended):
            targets[i] = gold[j]
    phon_map = list(range(n)) + [None] * target_len
    return MaskedInput(tokens, source, segs, poss, dynamic, appended, targets, phon_map)


def sentence_embedding(E_s, l_max, pad_mask=None, divisor=None):
    """ē_s: sum of the (zero-padded) token rows divided by ``l_max``.

    ``E_s`` is (n, d) or (B, n, d) with n <= l_max; rows flagged in
    ``pad_mask`` count as zeros. ``divisor`` overrides ``l_max`` (e.g.
    the true length).
    """
    if E_s.shape[-2] > l_max:
        raise LengthError(f"{E_s.shape[-2]} rows exceed l_max={l_max}")
    if pad_mask is not None:
        E_s = E_s * (~np.asarray(pad_mask)).astype(E_s.dtype)[..., None]
    total = E_s.sum(axis=-2)
    if divisor is None:
        return total * (1.0 / l_max)
    return total / np.asarray(divisor, dtype=E_s.dtype).reshape(-1, 1)


@dataclass
class FusionGates:
    g_s: object
    g_p: object


def fuse(E_s, E_p, e_bar, gate_params, phonetic=True):
    """E_f = g_s * E_s + g_p * E_p with sigmoid gate MLPs over
    [E_s, E_p, ē_s]. ``phonetic=False`` forces g_p to zero."""
    if E_s.shape != E_p.shape:
        raise ConfigError(f"semantic {E_s.shape} and phonetic {E_p.shape} widths differ; "
                          "map E_p through the width adapter first")
    if e_bar.ndim < E_s.ndim:
        e_bar = e_bar.reshape(*e_bar.shape[:-1], 1, e_bar.shape[-1])
    e_bar = e_bar * np.ones(E_s.shape[:-1] + (1,), dtype=E_s.dtype)
    gin = T.concat([E_s, E_p, e_bar], axis=-1)
    g_s = L.mlp(gin, {k[2:]: v for k, v in gate_params.items() if k.startswith("s.")}, "sigmoid")
    g_p = L.mlp(gin, {k[2:]: v for k, v in gate_params.items() if k.startswith("p.")}, "sigmoid")
    if not phonetic:
        g_p = g_p * 0.0
    return g_s * E_s + g_p * E_p, FusionGates(g_s, g_p)


@dataclass
class LossLog:
    epochs: list = field(default_factory=list)


class Rephraser:
    def __init__(self, store: ParameterStore, config: RephraserConfig, vocab: CharVocab,
                 pinyin: PinyinEncoder):
        self.store = store
        self.config = config.validate()
        self.vocab = vocab
        self.pinyin = pinyin
        self._special_ids = np.array([vocab.stoi[s] for s in SPECIALS])

    @classmethod
    def create(cls, config, vocab, pinyin, seed=0, dtype=np.float32):
        config.validate()
        rng = make_rng(seed, 5)
        store = ParameterStore(dtype)
        d, d_p = config.d, pinyin.config.d_p
        init_encoder(store, PREFIX + "enc.", len(vocab), d, config.semantic_layers,
                     config.l_max, config.n_best + 1, rng)
        store.normal(PREFIX + "null_phon", (d_p,), rng)
        if d_p != d:
            store.normal(PREFIX + "adapter.w", (d_p, d), rng, 1.0 / np.sqrt(d_p))
            store.zeros(PREFIX + "adapter.b", (d,))
        for g in ("s.", "p."):
            L.init_mlp(store, GATES + g, [3 * d, config.gate_hidden, d], rng)
        for i in range(config.predictor_layers):
            L.init_transformer_layer(store, f"{PREFIX}pred.layer{i}.", d, rng)
        store.ones(PREFIX + "pred.ln_f.g", (d,))
        store.zeros(PREFIX + "pred.ln_f.b", (d,))
        store.normal(PREFIX + "head.w", (d, len(vocab)), rng)
        store.zeros(PREFIX + "head.b", (len(vocab),))
        store.meta["rephraser"] = asdict(config)
        store.meta["vocab"] = vocab.to_meta()
        return cls(store, config, vocab, pinyin)

    @classmethod
    def from_store(cls, store, pinyin):
        return cls(store, RephraserConfig(**store.meta["rephraser"]),
                   CharVocab.from_meta(store.meta["vocab"]), pinyin)

    def build_input(self, nbest, target_len, gold=None, rng=None, mask_rate=None):
        c = self.config
        rate = c.mask_rate if mask_rate is None else mask_rate
        return build_input(nbest, target_len, gold, rate, rng, c.l_max, c.n_best)

    def phonetic_rows(self, inputs, batch_size=64):
        """Frozen pinyin-encoder rows for each input's unmasked source."""
        out = []
        for start in range(0, len(inputs), batch_size):
            chunk = inputs[start:start + batch_size]
            E, _ = self.pinyin.encode_batch([m.source for m in chunk])
            out.extend(E.data[b, :len(m.source)].astype(self.store.dtype) for b, m in enumerate(chunk))
        return out

    def forward(self, inputs, phon_rows=None, phonetic=True, query="appended"):
        """Logits (Q, C) for the queried positions of a batch, plus the
        (batch, position) index of every row. ``query`` is ``"appended"``,
        ``"masked"`` (dynamic + appended) or ``"all"`` (every real token)."""
        if query not in ("appended", "masked", "all"):
            raise ValueError(f"unknown query {query!r}")
        if not self.pinyin.frozen:
            raise ContractError("pinyin encoder parameters must be frozen")
        c = self.config
        for m in inputs:
            if len(m.tokens) > c.l_max:
                raise LengthError(f"input length {len(m.tokens)} exceeds l_max={c.l_max}")
        if phon_rows is None:
            phon_rows = self.phonetic_rows(inputs)
        p = self.store.sub(PREFIX)
        enc = {k[4:]: v for k, v in p.items() if k.startswith("enc.")}
        ids, pad = pad_batch([self.vocab.encode(m.tokens) for m in inputs])
        segs, _ = pad_batch([m.segments for m in inputs])
        poss, _ = pad_batch([m.positions for m in inputs])
        E_s = run_layers(enc, embed(enc, ids, segs, poss), pad)
        B, N, d = E_s.shape

        # phonetic rows aligned to tokens; row 0 of the table is the NULL vector
        flat = np.concatenate(phon_rows, axis=0)
        offsets = np.cumsum([0] + [len(r) for r in phon_rows])
        idx = np.zeros((B, N), np.int64)
        for b, m in enumerate(inputs):
            for i, src in enumerate(m.phon_map):
                if src is not None:
                    idx[b, i] = 1 + offsets[b] + src
        d_p = flat.shape[1]
        table = T.concat([p["null_phon"].reshape(1, d_p), as_tensor(flat, E_s)], axis=0)
        E_p = L.embedding_lookup(table, idx)
        if "adapter.w" in p:
            E_p = E_p @ p["adapter.w"] + p["adapter.b"]

        divisor = None if c.pool == "l_max" else (~pad).sum(axis=1)
        e_bar = sentence_embedding(E_s, c.l_max, pad, divisor)
        E_f, _ = fuse(E_s, E_p, e_bar, self.store.sub(GATES), phonetic)
        pred = {k[5:]: v for k, v in p.items() if k.startswith("pred.")}
        pred["pos"] = p["enc.pos"]
        H = run_layers(pred, E_f, pad)

        rows = []
        for b, m in enumerate(inputs):
            if query == "all":
                positions = range(len(m.tokens))
            else:
                positions = m.appended if query == "appended" else m.masked
            rows.extend((b, i) for i in positions)
        rows = np.array(rows, dtype=np.int64).reshape(-1, 2)
        Hq = L.embedding_lookup(H.reshape(B * N, d), rows[:, 0] * N + rows[:, 1])
        return Hq @ p["head.w"] + p["head.b"], rows

    def loss(self, inputs, phon_rows=None, phonetic=True):
        """Masked-position cross-entropy, summed per sequence, averaged over the batch."""
        logits, rows = self.forward(inputs, phon_rows, phonetic, query="masked")
        targets = np.array([self.vocab.stoi.get(inputs[b].targets[i], self.vocab.stoi["[UNK]"])
                            if inputs[b].targets[i] is not None else T.IGNORE
                            for b, i in rows], dtype=np.int64)
        return T.cross_entropy(logits, targets, reduction="sum") * (1.0 / len(inputs))

    def fill(self, inputs, phonetic=True):
        """Argmax characters at the appended positions (special tokens excluded)."""
        logits, rows = self.forward(inputs, phonetic=phonetic)
        scores = logits.data.copy()
        scores[:, self._special_ids] = -np.inf
        best = scores.argmax(axis=1)
        out = [[] for _ in inputs]
        for (b, _), k in zip(rows, best):
            out[b].append(self.vocab.itos[k])
        return ["".join(chars) for chars in out]

    def correct_batch(self, nbests, lengths, phonetic=True, one_best_only=False, batch_size=64):
        inputs = [self.build_input(nb[:1] if one_best_only else nb, n, mask_rate=0.0)
                  for nb, n in zip(nbests, lengths)]
        out = []
        for start in range(0, len(inputs), batch_size):
            out.extend(self.fill(inputs[start:start + batch_size], phonetic))
        return out


def train_rephraser(records, pinyin: PinyinEncoder, vocab: CharVocab, config=None, hyper=None,
                    on_epoch=None):
    """Train with gold-length appended masks and per-epoch dynamic masking.
    Returns (model, LossLog)."""
    if not pinyin.frozen:
        raise ContractError("train_rephraser needs a frozen pinyin encoder; call freeze() first")
    config = config or RephraserConfig()
    hyper = hyper or TrainHyper(epochs=8, lr=1e-3, batch_size=32)
    records = [r for r in records if 1 <= len(r.gold) < config.l_max]
    if not records:
        raise ValueError("no usable training records")
    model = Rephraser.create(config, vocab, pinyin, seed=hyper.seed)
    # the encoder is frozen and reads the unmasked source, so its rows are fixed per record
    base = [model.build_input(r.nbest, len(r.gold), r.gold, mask_rate=0.0) for r in records]
    phon = model.phonetic_rows(base)
    steps = hyper.epochs * -(-len(records) // hyper.batch_size)
    opt = Adam(model.store, hyper.lr, total_steps=steps, clip_norm=hyper.clip_norm)
    order_rng = make_rng(hyper.seed, 6)
    history = LossLog()
    for epoch in range(hyper.epochs):
        mask_rng = make_rng(hyper.seed, 7, epoch)
        order = order_rng.permutation(len(records))
        total = 0.0
        for start in range(0, len(order), hyper.batch_size):
            idx = order[start:start + hyper.batch_size]
            batch = [model.build_input(records[i].nbest, len(records[i].gold), records[i].gold,
                                       rng=mask_rng) for i in idx]
            loss = model.loss(batch, [phon[i] for i in idx])
            T.backward(loss)
            opt.step()
            total += float(loss.data) * len(idx)
        history.epochs.append(total / len(records))
        log.info("rephraser epoch %d loss %.4f", epoch + 1, history.epochs[-1])
        if on_epoch:
            on_epoch(epoch, history.epochs[-1])
    return model, history
