"""Minimal reverse-mode tensor core.

Explicit primitive set, no general broadcasting: every operation knows its
exact shapes and implements its own backward pass. Values are stored in the
active precision's dtype (float32 by default); internal arithmetic runs in
float64 so reductions accumulate at high precision, and a float64 mode is
available for gradient checking.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

from ..errors import ConfigError, ShapeError

_STATE = {"dtype": np.float32, "grad": True}


def storage_dtype():
    return _STATE["dtype"]


@contextmanager
def precision(name: str):
    """Temporarily switch the storage dtype ('float32' or 'float64')."""
    mapping = {"float32": np.float32, "float64": np.float64}
    if name not in mapping:
        raise ConfigError(f"unknown precision {name!r}")
    prev = _STATE["dtype"]
    _STATE["dtype"] = mapping[name]
    try:
        yield
    finally:
        _STATE["dtype"] = prev


@contextmanager
def no_grad():
    prev = _STATE["grad"]
    _STATE["grad"] = False
    try:
        yield
    finally:
        _STATE["grad"] = prev


def grad_enabled() -> bool:
    return _STATE["grad"]


class Tensor:
    """N-dimensional value with an optional gradient buffer and tape links."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad=False, _parents=(), _backward_fn=None):
        self.data = np.asarray(data, dtype=storage_dtype())
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward_fn = _backward_fn

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def zero_grad(self):
        self.grad = None

    def backward(self):
        """Reverse-mode accumulation from a scalar output into leaf grads."""
        if self.data.size != 1:
            raise ShapeError("backward", self.shape)
        topo: list[Tensor] = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        grads = {id(self): np.ones_like(self.data, dtype=np.float64)}
        for node in reversed(topo):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward_fn is None:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward_fn(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg


def _f64(t: Tensor) -> np.ndarray:
    return t.data.astype(np.float64, copy=False)


def _make(data, parents, backward_fn) -> Tensor:
    if grad_enabled() and any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad=True, _parents=tuple(parents),
                      _backward_fn=backward_fn)
    return Tensor(data)


def constant(data) -> Tensor:
    return Tensor(data)


# ---------------------------------------------------------------------------
# Elementwise and structural primitives


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError("add", a.shape, b.shape)
    return _make(_f64(a) + _f64(b), (a, b), lambda g: (g, g))


def scale(a: Tensor, s: float) -> Tensor:
    s = float(s)
    return _make(_f64(a) * s, (a,), lambda g: (g * s,))


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError("mul", a.shape, b.shape)
    da, db = _f64(a), _f64(b)
    return _make(da * db, (a, b), lambda g: (g * db, g * da))


def reshape(a: Tensor, shape) -> Tensor:
    old = a.shape
    return _make(_f64(a).reshape(shape), (a,), lambda g: (g.reshape(old),))


def transpose(a: Tensor, axes) -> Tensor:
    inv = np.argsort(axes)
    return _make(np.transpose(_f64(a), axes), (a,),
                 lambda g: (np.transpose(g, inv),))


def concat_last(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[:-1] != b.shape[:-1]:
        raise ShapeError("concat_last", a.shape, b.shape)
    na = a.shape[-1]
    return _make(np.concatenate([_f64(a), _f64(b)], axis=-1), (a, b),
                 lambda g: (g[..., :na], g[..., na:]))


def slice_last(a: Tensor, start: int, stop: int) -> Tensor:
    def backward(g):
        full = np.zeros(a.shape, dtype=np.float64)
        full[..., start:stop] = g
        return (full,)
    return _make(_f64(a)[..., start:stop], (a,), backward)


def crop2d(a: Tensor, oy: int, ox: int, out_h: int, out_w: int) -> Tensor:
    """Spatial crop of a (B, H, W, C) tensor."""
    if a.data.ndim != 4:
        raise ShapeError("crop2d", a.shape)

    def backward(g):
        full = np.zeros(a.shape, dtype=np.float64)
        full[:, oy:oy + out_h, ox:ox + out_w, :] = g
        return (full,)

    return _make(_f64(a)[:, oy:oy + out_h, ox:ox + out_w, :], (a,), backward)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _make(np.where(mask, _f64(a), 0.0), (a,),
                 lambda g: (np.where(mask, g, 0.0),))


# ---------------------------------------------------------------------------
# Linear algebra


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError("matmul", a.shape, b.shape)
    da, db = _f64(a), _f64(b)
    return _make(da @ db, (a, b), lambda g: (g @ db.T, da.T @ g))


def bmm(a: Tensor, b: Tensor) -> Tensor:
    """Batched matmul: (B, M, K) @ (B, K, N)."""
    if a.data.ndim != 3 or b.data.ndim != 3 or a.shape[0] != b.shape[0] \
            or a.shape[2] != b.shape[1]:
        raise ShapeError("bmm", a.shape, b.shape)
    da, db = _f64(a), _f64(b)
    return _make(da @ db, (a, b),
                 lambda g: (g @ db.transpose(0, 2, 1), da.transpose(0, 2, 1) @ g))


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """x (N, in) @ w (in, out) + b (out,)."""
    if x.data.ndim != 2 or w.data.ndim != 2 or x.shape[1] != w.shape[0] \
            or b.shape != (w.shape[1],):
        raise ShapeError("affine", x.shape, w.shape, b.shape)
    dx, dw = _f64(x), _f64(w)
    out = dx @ dw + _f64(b)

    def backward(g):
        return g @ dw.T, dx.T @ g, g.sum(axis=0)

    return _make(out, (x, w, b), backward)


# ---------------------------------------------------------------------------
# Convolutions


def conv1d_causal(x: Tensor, w: Tensor, b: Tensor, dilation: int = 1) -> Tensor:
    """Causal 1D convolution: y[t] = sum_k x[t - k*dilation] @ w[k] + b.

    x is (T, C_in); w is (K, C_in, C_out). Output at t never reads inputs
    after t; missing history is zero-padded.
    """
    if x.data.ndim != 2 or w.data.ndim != 3 or x.shape[1] != w.shape[1] \
            or b.shape != (w.shape[2],):
        raise ShapeError("conv1d_causal", x.shape, w.shape, b.shape)
    t_len, c_in = x.shape
    k, _, c_out = w.shape
    pad = (k - 1) * dilation
    dx64, dw64 = _f64(x), _f64(w)
    xpad = np.zeros((t_len + pad, c_in))
    xpad[pad:] = dx64
    out = np.tile(_f64(b), (t_len, 1))
    for lag in range(k):
        off = (k - 1 - lag) * dilation
        out += xpad[off:off + t_len] @ dw64[lag]

    def backward(g):
        gxpad = np.zeros((t_len + pad, c_in))
        gw = np.zeros_like(dw64)
        for lag in range(k):
            off = (k - 1 - lag) * dilation
            gxpad[off:off + t_len] += g @ dw64[lag].T
            gw[lag] = xpad[off:off + t_len].T @ g
        return gxpad[pad:], gw, g.sum(axis=0)

    return _make(out, (x, w, b), backward)


def conv2d(x: Tensor, w: Tensor, b: Tensor, stride: int = 2, pad: int = 1) -> Tensor:
    """Strided 2D convolution on (B, H, W, C_in) with kernels (KH, KW, C_in, C_out)."""
    if x.data.ndim != 4 or w.data.ndim != 4 or x.shape[3] != w.shape[2] \
            or b.shape != (w.shape[3],):
        raise ShapeError("conv2d", x.shape, w.shape, b.shape)
    bsz, h, wd, c_in = x.shape
    kh, kw, _, c_out = w.shape
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (wd + 2 * pad - kw) // stride + 1
    if oh < 1 or ow < 1:
        raise ShapeError("conv2d", x.shape, w.shape)
    dx64, dw64 = _f64(x), _f64(w)
    xpad = np.zeros((bsz, h + 2 * pad, wd + 2 * pad, c_in))
    xpad[:, pad:pad + h, pad:pad + wd, :] = dx64
    out = np.tile(_f64(b), (bsz, oh, ow, 1))
    for i in range(kh):
        for j in range(kw):
            region = xpad[:, i:i + (oh - 1) * stride + 1:stride,
                          j:j + (ow - 1) * stride + 1:stride, :]
            out += region @ dw64[i, j]

    def backward(g):
        gxpad = np.zeros_like(xpad)
        gw = np.zeros_like(dw64)
        for i in range(kh):
            for j in range(kw):
                region = xpad[:, i:i + (oh - 1) * stride + 1:stride,
                              j:j + (ow - 1) * stride + 1:stride, :]
                gxpad[:, i:i + (oh - 1) * stride + 1:stride,
                      j:j + (ow - 1) * stride + 1:stride, :] += g @ dw64[i, j].T
                gw[i, j] = np.einsum("bhwc,bhwo->co", region, g)
        return (gxpad[:, pad:pad + h, pad:pad + wd, :], gw,
                g.sum(axis=(0, 1, 2)))

    return _make(out, (x, w, b), backward)


def transpose_conv2d(x: Tensor, w: Tensor, b: Tensor, stride: int = 2,
                     pad: int = 1) -> Tensor:
    """Fractionally-strided 2D convolution (upsampling) on (B, H, W, C_in).

    Kernels are (KH, KW, C_in, C_out); output extent is
    (H - 1) * stride + KH - 2 * pad per axis.
    """
    if x.data.ndim != 4 or w.data.ndim != 4 or x.shape[3] != w.shape[2] \
            or b.shape != (w.shape[3],):
        raise ShapeError("transpose_conv2d", x.shape, w.shape, b.shape)
    bsz, h, wd, c_in = x.shape
    kh, kw, _, c_out = w.shape
    full_h = (h - 1) * stride + kh
    full_w = (wd - 1) * stride + kw
    oh, ow = full_h - 2 * pad, full_w - 2 * pad
    if oh < 1 or ow < 1:
        raise ShapeError("transpose_conv2d", x.shape, w.shape)
    dx64, dw64 = _f64(x), _f64(w)
    ypad = np.zeros((bsz, full_h, full_w, c_out))
    for i in range(kh):
        for j in range(kw):
            ypad[:, i:i + (h - 1) * stride + 1:stride,
                 j:j + (wd - 1) * stride + 1:stride, :] += dx64 @ dw64[i, j]
    out = ypad[:, pad:pad + oh, pad:pad + ow, :] + _f64(b)

    def backward(g):
        gpad = np.zeros((bsz, full_h, full_w, c_out))
        gpad[:, pad:pad + oh, pad:pad + ow, :] = g
        gx = np.zeros_like(dx64)
        gw = np.zeros_like(dw64)
        for i in range(kh):
            for j in range(kw):
                region = gpad[:, i:i + (h - 1) * stride + 1:stride,
                              j:j + (wd - 1) * stride + 1:stride, :]
                gx += region @ dw64[i, j].T
                gw[i, j] = np.einsum("bhwc,bhwo->co", dx64, region)
        return gx, gw, g.sum(axis=(0, 1, 2))

    return _make(out, (x, w, b), backward)


def per_pixel_affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """1x1 convolution whose parameters are not shared across pixels.

    x is (B, H, W, C); w is (H, W, C, C_out); b is (H, W, C_out). Each pixel
    applies its own affine map, letting the output encode location-specific
    structure.
    """
    if x.data.ndim != 4 or w.data.ndim != 4 or x.shape[1:] != w.shape[:3] \
            or b.shape != w.shape[:2] + (w.shape[3],):
        raise ShapeError("per_pixel_affine", x.shape, w.shape, b.shape)
    dx64, dw64 = _f64(x), _f64(w)
    out = np.einsum("bhwc,hwco->bhwo", dx64, dw64) + _f64(b)

    def backward(g):
        return (np.einsum("bhwo,hwco->bhwc", g, dw64),
                np.einsum("bhwc,bhwo->hwco", dx64, g),
                g.sum(axis=0))

    return _make(out, (x, w, b), backward)


# ---------------------------------------------------------------------------
# Normalization, softmax, losses


def layer_norm(x: Tensor, gain: Tensor, shift: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale and shift."""
    d = x.shape[-1]
    if gain.shape != (d,) or shift.shape != (d,):
        raise ShapeError("layer_norm", x.shape, gain.shape, shift.shape)
    dx64 = _f64(x)
    mu = dx64.mean(axis=-1, keepdims=True)
    centered = dx64 - mu
    var = np.mean(centered * centered, axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv
    g64 = _f64(gain)
    out = xhat * g64 + _f64(shift)

    def backward(g):
        dxhat = g * g64
        dx = inv * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                    - xhat * np.mean(dxhat * xhat, axis=-1, keepdims=True))
        axes = tuple(range(g.ndim - 1))
        return dx, (g * xhat).sum(axis=axes), g.sum(axis=axes)

    return _make(out, (x, gain, shift), backward)


def softmax_lastdim(x: Tensor) -> Tensor:
    dx64 = _f64(x)
    shifted = dx64 - dx64.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        inner = (g * y).sum(axis=-1, keepdims=True)
        return (y * (g - inner),)

    return _make(y, (x,), backward)


def softmax_flat(x: Tensor) -> Tensor:
    """Joint softmax over every element; the result keeps x's shape and sums to 1."""
    dx64 = _f64(x)
    shifted = dx64 - dx64.max()
    e = np.exp(shifted)
    y = e / e.sum()

    def backward(g):
        inner = (g * y).sum()
        return (y * (g - inner),)

    return _make(y, (x,), backward)


def cross_entropy_map(p: Tensor, target_pixel) -> Tensor:
    """-log p at one (x, y) pixel of a normalized (H, W) likelihood map."""
    if p.data.ndim != 2:
        raise ShapeError("cross_entropy_map", p.shape)
    x, y = int(target_pixel[0]), int(target_pixel[1])
    h, w = p.shape
    if not (0 <= x < w and 0 <= y < h):
        raise IndexError(f"target pixel {(x, y)} outside {w}x{h} map")
    val = float(p.data[y, x])
    out = -np.log(max(val, 1e-300))

    def backward(g):
        gp = np.zeros((h, w))
        gp[y, x] = -float(g) / max(val, 1e-300)
        return (gp,)

    return _make(np.asarray(out), (p,), backward)


def cross_entropy_logits(logits: Tensor, targets) -> Tensor:
    """Mean cross entropy from flat logits (B, P) and integer target indices."""
    if logits.data.ndim != 2:
        raise ShapeError("cross_entropy_logits", logits.shape)
    targets = np.asarray(targets, dtype=np.int64).reshape(-1)
    bsz, npix = logits.shape
    if targets.shape[0] != bsz:
        raise ShapeError("cross_entropy_logits", logits.shape, targets.shape)
    if np.any(targets < 0) or np.any(targets >= npix):
        raise IndexError("target index outside logit range")
    dl = _f64(logits)
    m = dl.max(axis=1, keepdims=True)
    e = np.exp(dl - m)
    denom = e.sum(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(denom[:, 0])
    losses = lse - dl[np.arange(bsz), targets]
    out = losses.mean()

    def backward(g):
        p = e / denom
        p[np.arange(bsz), targets] -= 1.0
        return (p * (float(g) / bsz),)

    return _make(np.asarray(out), (logits,), backward)


# ---------------------------------------------------------------------------
# Attention


def multi_head_attention(q_src: Tensor, kv_src: Tensor, wq, bq, wk, bk, wv, bv,
                         wo, bo, heads: int, mask: np.ndarray | None = None) -> Tensor:
    """Scaled dot-product attention with `heads` parallel heads.

    q_src is (Tq, d); kv_src is (Tk, d). Self-attention when both are the
    same tensor, cross-attention otherwise. `mask` is an additive (Tq, Tk)
    array applied to the attention scores before the softmax.
    """
    d_model = q_src.shape[-1]
    if d_model % heads != 0:
        raise ConfigError(f"d_model {d_model} not divisible by {heads} heads")
    dh = d_model // heads
    tq, tk = q_src.shape[0], kv_src.shape[0]

    def split(t, length):
        return transpose(reshape(t, (length, heads, dh)), (1, 0, 2))

    q = split(affine(q_src, wq, bq), tq)
    k = split(affine(kv_src, wk, bk), tk)
    v = split(affine(kv_src, wv, bv), tk)
    scores = scale(bmm(q, transpose(k, (0, 2, 1))), 1.0 / np.sqrt(dh))
    if mask is not None:
        scores = add(scores, constant(np.broadcast_to(mask, (heads, tq, tk))))
    attn = softmax_lastdim(scores)
    ctx = bmm(attn, v)
    merged = reshape(transpose(ctx, (1, 0, 2)), (tq, d_model))
    return affine(merged, wo, bo)


def causal_mask(t: int) -> np.ndarray:
    """Additive mask forbidding attention to later positions."""
    m = np.zeros((t, t))
    m[np.triu_indices(t, k=1)] = -1e9
    return m
