from __future__ import annotations

import numpy as np

from .params import ParameterStore
from .tensor import backward


def gradient_check(loss_fn, store: ParameterStore, step=1e-4, max_coords=None, rng=None):
    """Max relative error between backprop and central differences.

    ``loss_fn(store)`` must return a scalar Tensor. Every trainable
    parameter is perturbed by +/- ``step``; error per coordinate is
    ``|a - n| / max(1e-8, |a| + |n|)``. ``max_coords`` caps the number of
    (randomly chosen) coordinates checked per parameter.
    """
    if store.dtype != np.float64:
        store = store.astype(np.float64)
    store.zero_grad()
    loss = loss_fn(store)
    backward(loss)
    analytic = {k: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
                for k, p in store.trainable()}
    rng = rng if rng is not None else np.random.default_rng(0)
    worst = 0.0
    for name, p in store.trainable():
        flat = p.data.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = rng.choice(flat.size, size=max_coords, replace=False)
        a_flat = analytic[name].reshape(-1)
        for i in coords:
            orig = flat[i]
            flat[i] = orig + step
            up = float(loss_fn(store).data)
            flat[i] = orig - step
            down = float(loss_fn(store).data)
            flat[i] = orig
            num = (up - down) / (2 * step)
            a = float(a_flat[i])
            err = abs(a - num) / max(1e-8, abs(a) + abs(num))
            worst = max(worst, err)
    store.zero_grad()
    return worst
