"""Adaptive-moment optimizer with decoupled weight decay, plus the warm-up /
plateau learning-rate schedule."""

from __future__ import annotations

import numpy as np

from .params import ParamStore


def optimizer_step(store: ParamStore, lr: float, weight_decay: float = 0.01,
                   betas=(0.9, 0.999), eps: float = 1e-8):
    """One bias-corrected adaptive-moment update over every parameter.

    Weight decay is decoupled: parameters shrink by lr * weight_decay
    independently of the gradient-driven update.
    """
    b1, b2 = betas
    store.step_count += 1
    t = store.step_count
    corr1 = 1.0 - b1 ** t
    corr2 = 1.0 - b2 ** t
    for name, param in store.items():
        if param.grad is None:
            raise RuntimeError(f"parameter {name!r} has no gradient")
        g = np.asarray(param.grad, dtype=np.float64)
        if name not in store.moments:
            store.moments[name] = [np.zeros(param.data.shape),
                                   np.zeros(param.data.shape)]
        m, v = store.moments[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        update = (m / corr1) / (np.sqrt(v / corr2) + eps)
        new = param.data.astype(np.float64) * (1.0 - lr * weight_decay) - lr * update
        param.data = new.astype(param.data.dtype)


def lr_schedule(epoch: int, val_history, base_lr: float = 1e-4, warmup: int = 30,
                plateau_patience: int = 10, factor: float = 0.75) -> float:
    """Learning rate for a given epoch.

    Ramps linearly to base_lr over the first `warmup` epochs. Afterwards the
    rate is multiplied by `factor` each time the best validation loss has not
    improved for `plateau_patience` consecutive epochs. val_history holds one
    validation loss per completed epoch.
    """
    if epoch < 0:
        raise ValueError("epoch must be nonnegative")
    if warmup > 0 and epoch < warmup:
        return base_lr * (epoch + 1) / warmup
    lr = base_lr
    best = np.inf
    stagnant = 0
    for loss in list(val_history)[warmup:]:
        if loss < best:
            best = loss
            stagnant = 0
        else:
            stagnant += 1
            if stagnant >= plateau_patience:
                lr *= factor
                stagnant = 0
    return lr
