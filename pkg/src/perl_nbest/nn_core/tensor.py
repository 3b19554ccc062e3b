"""Dense tensors with tape-free reverse-mode differentiation.

Every op returns a new :class:`Tensor` that remembers its parents and a
closure accumulating gradients into them. :func:`backward` walks the graph
in reverse topological order once, then releases it.
"""
from __future__ import annotations

import numpy as np

from ..errors import ShapeError, StateError

_DEBUG = False


def set_debug(flag: bool) -> None:
    """Check every op result for NaN/Inf (slow)."""
    global _DEBUG
    _DEBUG = bool(flag)


def _check_finite(arr, what):
    if not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"non-finite values in {what}")


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_consumed")

    def __init__(self, data, requires_grad=False, dtype=None):
        arr = np.array(data, dtype=dtype, copy=True)
        if arr.dtype.kind != "f":
            arr = arr.astype(np.float32)
        _check_finite(arr, "tensor creation")
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None
        self._consumed = False

    @classmethod
    def _result(cls, data, parents, backward):
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out._consumed = False
        if _DEBUG:
            _check_finite(data, "op result")
        live = tuple(p for p in parents if p.requires_grad)
        out.requires_grad = bool(live)
        out._parents = live
        out._backward = backward if live else None
        return out

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self):
        return self.data.ndim

    def numpy(self):
        return self.data

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"

    def _accum(self, g):
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True).reshape(self.data.shape)
        else:
            self.grad += g

    __add__ = lambda self, o: add(self, o)
    __radd__ = lambda self, o: add(o, self)
    __sub__ = lambda self, o: sub(self, o)
    __rsub__ = lambda self, o: sub(o, self)
    __mul__ = lambda self, o: mul(self, o)
    __rmul__ = lambda self, o: mul(o, self)
    __truediv__ = lambda self, o: div(self, o)
    __neg__ = lambda self: neg(self)
    __matmul__ = lambda self, o: matmul(self, o)
    __getitem__ = lambda self, idx: getitem(self, idx)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        return transpose(self, axes or None)


def as_tensor(x, like=None):
    if isinstance(x, Tensor):
        return x
    dtype = like.dtype if like is not None else None
    out = Tensor.__new__(Tensor)
    out.data = np.asarray(x, dtype=dtype if dtype is not None else np.float32)
    out.grad = None
    out.requires_grad = False
    out._parents = ()
    out._backward = None
    out._consumed = False
    return out


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _binary(a, b):
    if isinstance(a, Tensor):
        return a, as_tensor(b, a)
    b = as_tensor(b)
    return as_tensor(a, b), b


def add(a, b):
    a, b = _binary(a, b)

    def bw(g):
        a._accum(_unbroadcast(g, a.shape))
        b._accum(_unbroadcast(g, b.shape))
    return Tensor._result(a.data + b.data, (a, b), bw)


def sub(a, b):
    a, b = _binary(a, b)

    def bw(g):
        a._accum(_unbroadcast(g, a.shape))
        b._accum(_unbroadcast(-g, b.shape))
    return Tensor._result(a.data - b.data, (a, b), bw)


def mul(a, b):
    a, b = _binary(a, b)

    def bw(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(g * a.data, b.shape))
    return Tensor._result(a.data * b.data, (a, b), bw)


def div(a, b):
    a, b = _binary(a, b)

    def bw(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g / b.data, a.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(-g * a.data / (b.data * b.data), b.shape))
    return Tensor._result(a.data / b.data, (a, b), bw)


def neg(a):
    return Tensor._result(-a.data, (a,), lambda g: a._accum(-g))


def matmul(a, b):
    """Batched matrix product with numpy broadcasting over leading dims."""
    a, b = _binary(a, b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul shapes {a.shape} and {b.shape}")

    def bw(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape))
        if b.requires_grad:
            if b.ndim == 2:
                k = a.shape[-1]
                b._accum(a.data.reshape(-1, k).T @ g.reshape(-1, g.shape[-1]))
            else:
                b._accum(_unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape))
    return Tensor._result(a.data @ b.data, (a, b), bw)


def tsum(x, axis=None, keepdims=False):
    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        x._accum(np.broadcast_to(g, x.shape))
    return Tensor._result(x.data.sum(axis=axis, keepdims=keepdims), (x,), bw)


def tmean(x, axis=None, keepdims=False):
    n = x.data.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return tsum(x, axis, keepdims) * (1.0 / n)


def reshape(x, shape):
    return Tensor._result(x.data.reshape(shape), (x,), lambda g: x._accum(g.reshape(x.shape)))


def transpose(x, axes=None):
    inv = None if axes is None else np.argsort(axes)
    return Tensor._result(np.transpose(x.data, axes), (x,),
                          lambda g: x._accum(np.transpose(g, inv)))


def _is_basic(idx):
    parts = idx if isinstance(idx, tuple) else (idx,)
    return all(isinstance(p, (slice, int, type(None), type(Ellipsis))) for p in parts)


def getitem(x, idx):
    basic = _is_basic(idx)

    def bw(g):
        full = np.zeros_like(x.data)
        if basic:
            full[idx] = g
        else:
            np.add.at(full, idx, g)
        x._accum(full)
    return Tensor._result(x.data[idx], (x,), bw)


def take_rows(table, ids):
    """Gather rows of a 2-D table; gradients scatter back to the gathered rows."""
    ids = np.asarray(ids)
    if ids.dtype.kind not in "iu":
        raise TypeError("ids must be integers")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise IndexError(f"row id out of range 0..{table.shape[0] - 1}")

    def bw(g):
        full = np.zeros_like(table.data)
        np.add.at(full, ids.reshape(-1), g.reshape(-1, table.shape[1]))
        table._accum(full)
    return Tensor._result(table.data[ids], (table,), bw)


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    ax = axis % tensors[0].ndim
    bounds = np.cumsum([t.shape[ax] for t in tensors])[:-1]

    def bw(g):
        for t, piece in zip(tensors, np.split(g, bounds, axis=ax)):
            t._accum(piece)
    return Tensor._result(np.concatenate([t.data for t in tensors], axis=ax), tensors, bw)


def tanh(x):
    y = np.tanh(x.data)
    return Tensor._result(y, (x,), lambda g: x._accum(g * (1.0 - y * y)))


def sigmoid(x):
    y = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return Tensor._result(y, (x,), lambda g: x._accum(g * y * (1.0 - y)))


def relu(x):
    m = x.data > 0
    return Tensor._result(x.data * m, (x,), lambda g: x._accum(g * m))


def exp(x):
    y = np.exp(x.data)
    return Tensor._result(y, (x,), lambda g: x._accum(g * y))


def log(x):
    return Tensor._result(np.log(x.data), (x,), lambda g: x._accum(g / x.data))


_GELU_C = float(np.sqrt(2.0 / np.pi))   # python float keeps float32 inputs float32


def gelu(x):
    """Tanh approximation of GELU."""
    v = x.data
    inner = _GELU_C * (v + 0.044715 * (v * v * v))
    t = np.tanh(inner)
    y = 0.5 * v * (1.0 + t)

    def bw(g):
        dinner = _GELU_C * (1.0 + 3 * 0.044715 * v * v)
        x._accum(g * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * dinner))
    return Tensor._result(y, (x,), bw)


def softmax(x, axis=-1, bias=None):
    """Softmax along ``axis``; ``bias`` is an optional constant added first
    (use large negative values to mask)."""
    z = x.data if bias is None else x.data + bias
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        x._accum(y * (g - (g * y).sum(axis=axis, keepdims=True)))
    return Tensor._result(y, (x,), bw)


def layer_norm(x, gamma, beta, eps=1e-5):
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * inv
    y = xhat * gamma.data + beta.data

    def bw(g):
        if gamma.requires_grad:
            gamma._accum((g * xhat).reshape(-1, x.shape[-1]).sum(axis=0))
        if beta.requires_grad:
            beta._accum(g.reshape(-1, x.shape[-1]).sum(axis=0))
        if x.requires_grad:
            gx = g * gamma.data
            x._accum(inv * (gx - gx.mean(axis=-1, keepdims=True)
                            - xhat * (gx * xhat).mean(axis=-1, keepdims=True)))
    return Tensor._result(y, (x, gamma, beta), bw)


IGNORE = -100


def cross_entropy(logits, targets, reduction="mean", weights=None):
    """Softmax cross-entropy over the last axis of 2-D ``logits``.

    ``targets`` entries equal to ``IGNORE`` contribute neither loss nor
    gradient. ``reduction`` is ``"mean"`` (over non-ignored rows) or
    ``"sum"``; ``weights`` optionally scales each row's term. An all-ignored
    input gives a zero loss.
    """
    if logits.ndim != 2:
        raise ShapeError("logits must be 2-D")
    targets = np.asarray(targets, dtype=np.int64)
    n, c = logits.shape
    if targets.shape != (n,):
        raise ShapeError(f"targets shape {targets.shape} does not match {n} rows")
    live = targets != IGNORE
    if np.any((targets[live] < 0) | (targets[live] >= c)):
        raise IndexError(f"target out of range 0..{c - 1}")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    w = live.astype(logits.dtype)
    if weights is not None:
        w = w * np.asarray(weights, dtype=logits.dtype)
    count = int(live.sum())
    scale = 1.0 / count if (reduction == "mean" and count) else 1.0
    safe_t = np.where(live, targets, 0)
    rows = np.arange(n)
    nll = -logp[rows, safe_t]
    loss = np.asarray((nll * w).sum() * scale, dtype=logits.dtype)

    def bw(g):
        grad = np.exp(logp)
        grad[rows, safe_t] -= 1.0
        logits._accum(grad * (w * scale * g)[:, None])
    return Tensor._result(loss, (logits,), bw)


def backward(loss: Tensor) -> None:
    """Populate ``.grad`` on every leaf reachable from a scalar ``loss``.

    The graph is released afterwards; a second call on the same loss raises
    :class:`StateError`.
    """
    if loss._consumed:
        raise StateError("backward already called on this graph; re-run the forward pass")
    if loss.data.size != 1:
        raise ShapeError("backward needs a scalar loss")
    if not loss.requires_grad:
        loss._consumed = True
        return
    order, seen, stack = [], set(), [(loss, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
    for node in order:
        if node._parents:
            node._parents = ()
            node._backward = None
            node.grad = None
    loss._consumed = True
