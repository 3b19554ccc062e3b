"""Minimal numpy autograd substrate for the pinyin, length and rephrasing models."""
from .gradcheck import gradient_check
from .layers import (
    default_heads,
    embedding_lookup,
    gru_cell,
    gru_last_state,
    init_gru,
    init_mlp,
    init_transformer_layer,
    mlp,
    softmax_cross_entropy,
    transformer_layer,
)
from .optim import Adam, optimizer_step
from .params import ParameterStore, make_rng
from .tensor import IGNORE, Tensor, backward, set_debug

__all__ = [
    "Adam", "IGNORE", "ParameterStore", "Tensor", "backward", "default_heads",
    "embedding_lookup", "gradient_check", "gru_cell", "gru_last_state", "init_gru",
    "init_mlp", "init_transformer_layer", "make_rng", "mlp", "optimizer_step",
    "set_debug", "softmax_cross_entropy", "transformer_layer",
]
