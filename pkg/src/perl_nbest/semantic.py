"""Small from-scratch semantic encoder shared by the length predictor and
the rephraser.

Positions restart at zero inside every N-best hypothesis (and inside the
appended mask block), and each hypothesis gets a learned segment
embedding, so position ``j`` of every hypothesis lines up.
"""
from __future__ import annotations

import numpy as np

from .errors import LengthError
from .nn_core import layers as L
from .nn_core import tensor as T
from .pinyin_lex import DELIMITER


def segment_layout(tokens):
    """(segment ids, in-segment positions) for a ``|``-delimited sequence.
    A delimiter belongs to the hypothesis it closes."""
    segs, poss = [], []
    seg = pos = 0
    for tok in tokens:
        segs.append(seg)
        poss.append(pos)
        if tok == DELIMITER:
            seg, pos = seg + 1, 0
        else:
            pos += 1
    return segs, poss


def pad_batch(rows, pad_value=0, dtype=np.int64):
    """Stack ragged integer rows; returns (array, pad_mask)."""
    width = max(len(r) for r in rows)
    out = np.full((len(rows), width), pad_value, dtype=dtype)
    mask = np.ones((len(rows), width), dtype=bool)
    for i, r in enumerate(rows):
        out[i, :len(r)] = r
        mask[i, :len(r)] = False
    return out, mask


def init_encoder(store, prefix, vocab_size, d, n_layers, l_max, n_segments, rng):
    store.normal(prefix + "tok", (vocab_size, d), rng)
    store.normal(prefix + "pos", (l_max, d), rng)
    store.normal(prefix + "seg", (n_segments, d), rng)
    for i in range(n_layers):
        L.init_transformer_layer(store, f"{prefix}layer{i}.", d, rng)
    store.ones(prefix + "ln_f.g", (d,))
    store.zeros(prefix + "ln_f.b", (d,))


def n_layers_of(params, prefix="layer"):
    heads = {k.split(".")[0] for k in params if k.startswith(prefix)}
    return sum(1 for h in heads if h[len(prefix):].isdigit())


def embed(params, ids, segs, poss):
    l_max = params["pos"].shape[0]
    if poss.size and poss.max() >= l_max:
        raise LengthError(f"position {int(poss.max())} exceeds maximum length {l_max}")
    return (L.embedding_lookup(params["tok"], ids)
            + L.embedding_lookup(params["pos"], poss)
            + L.embedding_lookup(params["seg"], segs))


def run_layers(params, X, pad_mask, prefix="layer", final_norm=True, heads=None):
    l_max = params["pos"].shape[0] if "pos" in params else None
    for i in range(n_layers_of(params, prefix)):
        sub = {k[len(f"{prefix}{i}."):]: v for k, v in params.items() if k.startswith(f"{prefix}{i}.")}
        X = L.transformer_layer(X, sub, pad_mask, max_len=l_max, heads=heads)
    if final_norm:
        X = T.layer_norm(X, params["ln_f.g"], params["ln_f.b"])
    return X


def encode(params, ids, segs, poss, pad_mask):
    """(B, N) id arrays -> (B, N, d) contextual embeddings."""
    return run_layers(params, embed(params, ids, segs, poss), pad_mask)
