from dataclasses import dataclass, fields

import numpy as np

from autograd import ops
from autograd.tensor import Tensor
from models.mavt.configs import BG_HIDDEN_RATIO, INIT_STD, SEED_KEY_HEADS
from models.mavt.tokens import StreamState
from utils.errors import ContractError
from utils.model_commons import make_rng


@dataclass
class HeadParams:
    """MLP bg head R^{2d} -> R^H -> R and affine fg head R^{2d} -> R^C.

    Rows [:d] of the first-layer weights read the visual class token, rows
    [d:] the audio one, so the fg head splits into two unimodal halves.
    """

    bg_hidden_weight: Tensor
    bg_hidden_bias: Tensor
    bg_weight: Tensor
    bg_bias: Tensor
    fg_weight: Tensor
    fg_bias: Tensor

    @property
    def width(self):
        return self.fg_weight.shape[0] // 2

    def named_tensors(self, prefix="heads"):
        return {f"{prefix}/{f.name}": getattr(self, f.name) for f in fields(self)}


@dataclass
class Predictions:
    bg_logit: Tensor  # [B]
    p_bg: Tensor  # [B], sigmoid(bg_logit)
    fg_logits: Tensor  # [B, C]


def bg_hidden_width(d):
    return BG_HIDDEN_RATIO * d


def init_heads(config, seed, key=SEED_KEY_HEADS) -> HeadParams:
    rng = make_rng(seed, key)
    two_d = 2 * config.d
    hidden = bg_hidden_width(config.d)

    def trainable(shape, std=INIT_STD):
        values = rng.normal(0.0, std, size=shape) if std else np.zeros(shape)
        return Tensor(values, requires_grad=True)

    return HeadParams(
        # fan-in scaled
        bg_hidden_weight=trainable((two_d, hidden), std=np.sqrt(2.0 / two_d)),
        bg_hidden_bias=trainable((hidden,), std=0),
        bg_weight=trainable((hidden, 1), std=1.0 / np.sqrt(hidden)),
        bg_bias=trainable((1,), std=0),
        fg_weight=trainable((two_d, config.n_classes)),
        fg_bias=trainable((config.n_classes,), std=0),
    )


def _affine(x, weight, bias):
    return ops.add(ops.matmul(x, weight), bias)


def bg_head_forward(heads: HeadParams, bg_in: Tensor) -> Tensor:
    """Background logits [B] from concatenated bg class-token features [B, 2d]."""
    hidden = ops.gelu(_affine(bg_in, heads.bg_hidden_weight, heads.bg_hidden_bias))
    logit = _affine(hidden, heads.bg_weight, heads.bg_bias)
    return ops.reshape(logit, logit.shape[:1])


def heads_forward(heads: HeadParams, stream_a: StreamState, stream_v: StreamState) -> Predictions:
    """Predictions from the block-K class tokens, visual half first."""
    for stream in (stream_a, stream_v):
        if "bg" not in stream.offsets or "fg" not in stream.offsets:
            raise ContractError("heads need class tokens in both streams")

    bg_in = ops.concat([stream_v.class_output("bg"), stream_a.class_output("bg")], axis=-1)
    fg_in = ops.concat([stream_v.class_output("fg"), stream_a.class_output("fg")], axis=-1)
    if bg_in.ndim == 1:
        bg_in = ops.reshape(bg_in, (1,) + bg_in.shape)
        fg_in = ops.reshape(fg_in, (1,) + fg_in.shape)

    bg_logit = bg_head_forward(heads, bg_in)
    fg_logits = _affine(fg_in, heads.fg_weight, heads.fg_bias)
    return Predictions(bg_logit=bg_logit, p_bg=ops.sigmoid(bg_logit), fg_logits=fg_logits)


def unimodal_logits(heads: HeadParams, stream: StreamState) -> Tensor:
    """Foreground logits [B, C] from one modality's half of the split fg head."""
    if "fg" not in stream.offsets:
        raise ContractError("unimodal logits need a foreground class token")
    d = heads.width
    start = 0 if stream.modality == "v" else d
    half = ops.slice_axis(heads.fg_weight, start, start + d, axis=0)
    fg = stream.class_output("fg")
    if fg.ndim == 1:
        fg = ops.reshape(fg, (1,) + fg.shape)
    return _affine(fg, half, heads.fg_bias)
