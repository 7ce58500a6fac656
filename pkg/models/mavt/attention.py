from dataclasses import dataclass, fields

import numpy as np

from autograd import ops
from autograd.tensor import Tensor
from utils.errors import DimensionError


@dataclass
class AttentionParams:
    """Q/K/V/O projections of one multi-headed attention unit over width d."""

    wq: Tensor
    bq: Tensor
    wk: Tensor
    bk: Tensor
    wv: Tensor
    bv: Tensor
    wo: Tensor
    bo: Tensor

    @property
    def width(self):
        return self.wq.shape[0]

    def named_tensors(self, prefix):
        return {f"{prefix}/{f.name}": getattr(self, f.name) for f in fields(self)}


def init_attention(rng, width, requires_grad, std=None):
    """Weights ~ N(0, std^2) (fan-in scaled by default), zero biases."""
    std = 1.0 / np.sqrt(width) if std is None else std

    def weight():
        return Tensor(rng.normal(0.0, std, size=(width, width)), requires_grad=requires_grad)

    def bias():
        return Tensor(np.zeros(width), requires_grad=requires_grad)

    return AttentionParams(weight(), bias(), weight(), bias(), weight(), bias(), weight(), bias())


def _split_heads(x, heads):
    # [..., S, d] -> [..., h, S, d/h]
    lead = x.shape[:-2]
    seq, width = x.shape[-2:]
    x = ops.reshape(x, lead + (seq, heads, width // heads))
    n = len(lead)
    return ops.transpose(x, tuple(range(n)) + (n + 1, n, n + 2))


def _merge_heads(x):
    # [..., h, S, d/h] -> [..., S, d]
    lead = x.shape[:-3]
    heads, seq, head_width = x.shape[-3:]
    n = len(lead)
    x = ops.transpose(x, tuple(range(n)) + (n + 1, n, n + 2))
    return ops.reshape(x, lead + (seq, heads * head_width))


def multi_head_attention(params: AttentionParams, x: Tensor, heads: int) -> Tensor:
    """Scaled dot-product self-attention over the second-to-last axis."""
    width = x.shape[-1]
    if width != params.width:
        raise DimensionError(f"attention width {params.width} vs input shape {x.shape}")
    if width % heads:
        raise DimensionError(f"{heads} heads do not divide width {width}")

    q = _split_heads(ops.add(ops.matmul(x, params.wq), params.bq), heads)
    k = _split_heads(ops.add(ops.matmul(x, params.wk), params.bk), heads)
    v = _split_heads(ops.add(ops.matmul(x, params.wv), params.bv), heads)

    scores = ops.scale(ops.matmul(q, ops.transpose(k)), 1.0 / np.sqrt(width // heads))
    context = ops.matmul(ops.softmax(scores, axis=-1), v)
    return ops.add(ops.matmul(_merge_heads(context), params.wo), params.bo)
