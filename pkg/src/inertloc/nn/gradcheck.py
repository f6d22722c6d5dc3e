"""Central-finite-difference comparison against reverse-mode gradients."""

from __future__ import annotations

import numpy as np

from .core import precision


def grad_check(fn, inputs, h: float = 1e-3, samples: int | None = None,
               rng: np.random.Generator | None = None,
               fd_precision: str | None = None) -> float:
    """Worst relative disagreement between analytic and numeric gradients.

    fn must map the given leaf tensors to a scalar Tensor and be re-runnable.
    When `samples` is set, only that many randomly chosen elements per tensor
    are probed (the closure is re-evaluated twice per probe, which is the
    dominant cost for big parameter sets). `fd_precision` optionally runs the
    finite-difference evaluations under a different storage precision, so a
    float64 oracle can judge the float32 pipeline's gradients.

    The numeric derivative divides by the actually realized parameter step,
    which keeps low-precision storage from biasing the comparison.
    """
    inputs = list(inputs)
    for t in inputs:
        t.grad = None
    out = fn(*inputs)
    out.backward()
    analytic = [np.zeros(t.data.shape, dtype=np.float64) if t.grad is None
                else np.asarray(t.grad, dtype=np.float64) for t in inputs]
    # Scale-aware floor: elements far below the dominant gradient magnitude
    # only see finite-difference noise, so they are compared against the
    # overall scale instead of their own near-zero values.
    gmax = max((float(np.max(np.abs(a))) for a in analytic if a.size), default=0.0)
    floor = max(1e-8, 0.05 * gmax)

    def evaluate():
        if fd_precision is None:
            return float(fn(*inputs).data)
        with precision(fd_precision):
            return float(fn(*inputs).data)

    worst = 0.0
    for t, ana in zip(inputs, analytic):
        flat = t.data.reshape(-1)
        ana_flat = ana.reshape(-1)
        n = flat.size
        if samples is not None and samples < n:
            if rng is None:
                rng = np.random.default_rng(0)
            idxs = np.sort(rng.choice(n, size=samples, replace=False))
        else:
            idxs = np.arange(n)
        for i in idxs:
            old = flat[i]
            flat[i] = old + h
            hi = float(flat[i])
            fp = evaluate()
            flat[i] = old - h
            lo = float(flat[i])
            fm = evaluate()
            flat[i] = old
            if hi == lo:
                continue
            numeric = (fp - fm) / (hi - lo)
            denom = max(abs(ana_flat[i]), abs(numeric), floor)
            worst = max(worst, abs(ana_flat[i] - numeric) / denom)
    return worst
