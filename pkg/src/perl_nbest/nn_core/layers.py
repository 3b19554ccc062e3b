"""Layer kinds used by the three models: embeddings, GRU, pre-norm
transformer blocks and MLPs. Layers are plain functions over a parameter
mapping (see ``ParameterStore.sub``) plus ``init_*`` helpers."""
from __future__ import annotations

import numpy as np

from ..errors import LengthError, ShapeError
from . import tensor as T
from .tensor import as_tensor

NEG_INF = -1e9

embedding_lookup = T.take_rows
softmax_cross_entropy = T.cross_entropy


def default_heads(d):
    return max(1, d // 16)


# -- GRU ---------------------------------------------------------------------

def init_gru(store, prefix, d_in, d, rng, std=None):
    std = std if std is not None else 1.0 / np.sqrt(d)
    store.normal(prefix + "wx", (d_in, 3 * d), rng, std)
    store.normal(prefix + "wh", (d, 3 * d), rng, std)
    store.zeros(prefix + "bx", (3 * d,))
    store.zeros(prefix + "bh", (3 * d,))


def gru_cell(h_prev, x, params):
    """One GRU step (reset, update, candidate; torch gate layout).

    h' = (1 - z) * n + z * h, with n = tanh(Wx x + bx + r * (Wh h + bh)).
    """
    wx, wh, bx, bh = params["wx"], params["wh"], params["bx"], params["bh"]
    d = wh.shape[0]
    if x.shape[-1] != wx.shape[0] or h_prev.shape[-1] != d or wx.shape[1] != 3 * d:
        raise ShapeError(f"gru_cell: x {x.shape}, h {h_prev.shape}, wx {wx.shape}, wh {wh.shape}")
    gx = x @ wx + bx
    gh = h_prev @ wh + bh
    r = T.sigmoid(gx[..., :d] + gh[..., :d])
    z = T.sigmoid(gx[..., d:2 * d] + gh[..., d:2 * d])
    n = T.tanh(gx[..., 2 * d:] + r * gh[..., 2 * d:])
    return (1.0 - z) * n + z * h_prev


def gru_last_state(xs, lengths, params):
    """Fold a padded batch ``xs`` (B, T, d_in) through the GRU from a zero
    state and return the hidden state after each row's last valid step."""
    B, steps, _ = xs.shape
    d = params["wh"].shape[0]
    lengths = np.asarray(lengths)
    h = as_tensor(np.zeros((B, d), dtype=xs.dtype), xs)
    for t in range(steps):
        h_new = gru_cell(h, xs[:, t, :], params)
        live = (t < lengths).astype(xs.dtype)[:, None]
        if live.all():
            h = h_new
        else:
            h = h_new * live + h * (1.0 - live)
    return h


# -- transformer ---------------------------------------------------------------

def init_transformer_layer(store, prefix, d, rng, ff_mult=4, std=0.02):
    store.ones(prefix + "ln1.g", (d,))
    store.zeros(prefix + "ln1.b", (d,))
    store.normal(prefix + "attn.wqkv", (d, 3 * d), rng, std)
    store.zeros(prefix + "attn.bq", (d,))
    store.zeros(prefix + "attn.bv", (d,))
    store.normal(prefix + "attn.wo", (d, d), rng, std)
    store.zeros(prefix + "attn.bo", (d,))
    store.ones(prefix + "ln2.g", (d,))
    store.zeros(prefix + "ln2.b", (d,))
    store.normal(prefix + "ffn.w1", (d, ff_mult * d), rng, std)
    store.zeros(prefix + "ffn.b1", (ff_mult * d,))
    store.normal(prefix + "ffn.w2", (ff_mult * d, d), rng, std)
    store.zeros(prefix + "ffn.b2", (d,))


def self_attention(h, params, pad_mask, heads):
    B, n, d = h.shape
    dh = d // heads
    # no key bias: softmax is shift-invariant, so it would have zero gradient
    bq, bv = params["attn.bq"], params["attn.bv"]
    bias = T.concat([bq, as_tensor(np.zeros(d, dtype=h.dtype)), bv], axis=0)
    qkv = h @ params["attn.wqkv"] + bias
    qkv = qkv.reshape(B, n, 3, heads, dh).transpose(2, 0, 3, 1, 4)
    q, k, v = qkv[0], qkv[1], qkv[2]
    scores = (q @ k.transpose(0, 1, 3, 2)) * float(1.0 / np.sqrt(dh))
    mask = np.where(pad_mask, NEG_INF, 0.0).astype(h.dtype)[:, None, None, :]
    probs = T.softmax(scores, axis=-1, bias=mask)
    out = (probs @ v).transpose(0, 2, 1, 3).reshape(B, n, d)
    return out @ params["attn.wo"] + params["attn.bo"], probs


def transformer_layer(X, params, pad_mask=None, max_len=None, heads=None, return_attention=False):
    """Pre-norm block: X + MHA(LN(X)), then + FFN(LN(.)).

    ``X`` is (n, d) or (B, n, d); ``pad_mask`` is True at padding. Padding
    keys get no attention weight and padding queries receive no attention
    output, so their rows carry only their own residual stream.
    """
    squeeze = X.ndim == 2
    if squeeze:
        X = X.reshape(1, *X.shape)
    B, n, d = X.shape
    if max_len is not None and n > max_len:
        raise LengthError(f"sequence length {n} exceeds maximum {max_len}")
    if pad_mask is None:
        pad_mask = np.zeros((B, n), dtype=bool)
    pad_mask = np.asarray(pad_mask, dtype=bool).reshape(B, n)
    heads = heads or default_heads(d)
    if d % heads:
        raise ShapeError(f"width {d} not divisible by {heads} heads")
    if params["attn.wqkv"].shape != (d, 3 * d):
        raise ShapeError(f"attention weights {params['attn.wqkv'].shape} do not match width {d}")
    h = T.layer_norm(X, params["ln1.g"], params["ln1.b"])
    att, probs = self_attention(h, params, pad_mask, heads)
    if pad_mask.any():
        att = att * (~pad_mask).astype(X.dtype)[..., None]
    X = X + att
    h = T.layer_norm(X, params["ln2.g"], params["ln2.b"])
    X = X + (T.gelu(h @ params["ffn.w1"] + params["ffn.b1"]) @ params["ffn.w2"] + params["ffn.b2"])
    if squeeze:
        X = X.reshape(n, d)
    return (X, probs) if return_attention else X


# -- MLP -------------------------------------------------------------------------

def init_mlp(store, prefix, sizes, rng, std=None):
    for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
        store.normal(f"{prefix}l{i}.w", (a, b), rng, std if std is not None else 1.0 / np.sqrt(a))
        store.zeros(f"{prefix}l{i}.b", (b,))


_FINAL = {
    "identity": lambda x: x,
    "sigmoid": T.sigmoid,
    "softmax": lambda x: T.softmax(x, axis=-1),
}


def mlp(x, params, activation="identity", hidden_activation="gelu"):
    """Affine layers ``l0, l1, ...`` with ``hidden_activation`` between them
    and ``activation`` (identity | sigmoid | softmax) on the output."""
    n_layers = sum(1 for k in params if k.endswith(".w"))
    if n_layers == 0:
        raise ShapeError("mlp has no layers")
    hidden = {"gelu": T.gelu, "relu": T.relu, "tanh": T.tanh}[hidden_activation]
    for i in range(n_layers):
        w, b = params[f"l{i}.w"], params[f"l{i}.b"]
        if x.shape[-1] != w.shape[0]:
            raise ShapeError(f"mlp layer {i}: input width {x.shape[-1]} != {w.shape[0]}")
        x = x @ w + b
        if i < n_layers - 1:
            x = hidden(x)
    return _FINAL[activation](x)
