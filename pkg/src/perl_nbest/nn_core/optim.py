from __future__ import annotations

import numpy as np

from ..errors import StateError
from .params import ParameterStore


class Adam:
    """Adam with a linear learning-rate decay to zero over ``total_steps``.

    Frozen parameters are never touched. ``clip_norm`` rescales the global
    gradient norm of the trainable parameters before the update.
    """

    def __init__(self, store: ParameterStore, lr, betas=(0.9, 0.999), eps=1e-8,
                 total_steps=None, warmup_steps=0, clip_norm=None):
        self.store = store
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.total_steps = total_steps
        self.warmup_steps = warmup_steps
        self.clip_norm = clip_norm
        self.t = 0
        self._m = {}
        self._v = {}

    def current_lr(self):
        lr = self.lr
        if self.warmup_steps and self.t < self.warmup_steps:
            lr *= (self.t + 1) / self.warmup_steps
        if self.total_steps:
            lr *= max(0.0, 1.0 - self.t / self.total_steps)
        return lr

    def step(self):
        live = [(k, p) for k, p in self.store.trainable() if p.grad is not None]
        if not live:
            raise StateError("optimizer_step called without gradients; run backward first")
        scale = 1.0
        if self.clip_norm is not None:
            norm = float(np.sqrt(sum(float((p.grad.astype(np.float64) ** 2).sum()) for _, p in live)))
            if norm > self.clip_norm:
                scale = self.clip_norm / norm
        lr = self.current_lr()
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for name, p in live:
            g = p.grad * scale if scale != 1.0 else p.grad
            m = self._m.get(name)
            if m is None:
                m = self._m[name] = np.zeros_like(p.data)
                self._v[name] = np.zeros_like(p.data)
            v = self._v[name]
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * (g * g)
            p.data -= (lr / c1) * m / (np.sqrt(v / c2) + self.eps)
        self.store.step += 1
        self.store.zero_grad()


def optimizer_step(store, optimizer):
    """Apply one update; returns the store for chaining."""
    if optimizer.store is not store:
        raise StateError("optimizer bound to a different parameter store")
    optimizer.step()
    return store
