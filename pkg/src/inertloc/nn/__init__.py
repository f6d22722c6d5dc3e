"""Reverse-mode tensor core, parameter store, optimizer, and gradient checker."""

from .core import (Tensor, add, affine, bmm, causal_mask, concat_last, constant,
                   conv1d_causal, conv2d, crop2d, cross_entropy_logits,
                   cross_entropy_map, grad_enabled, layer_norm, matmul, mul,
                   multi_head_attention, no_grad, per_pixel_affine, precision,
                   relu, reshape, scale, slice_last, softmax_flat,
                   softmax_lastdim, storage_dtype, transpose, transpose_conv2d)
from .gradcheck import grad_check
from .optim import lr_schedule, optimizer_step
from .params import CHECKPOINT_MAGIC, CHECKPOINT_VERSION, ParamStore

__all__ = [
    "Tensor", "ParamStore", "add", "affine", "bmm", "causal_mask",
    "concat_last", "constant", "conv1d_causal", "conv2d", "crop2d",
    "cross_entropy_logits", "cross_entropy_map", "grad_check", "grad_enabled",
    "layer_norm", "lr_schedule", "matmul", "mul", "multi_head_attention",
    "no_grad", "optimizer_step", "per_pixel_affine", "precision", "relu",
    "reshape", "scale", "slice_last", "softmax_flat", "softmax_lastdim",
    "storage_dtype", "transpose", "transpose_conv2d",
    "CHECKPOINT_MAGIC", "CHECKPOINT_VERSION",
]
