from dataclasses import dataclass, field
from typing import List

import numpy as np

from autograd import ops
from autograd.tensor import Tensor
from models.mavt.attention import AttentionParams, init_attention, multi_head_attention
from models.mavt.configs import CHANNELS, INIT_STD, SEED_KEY_BACKBONE
from utils.errors import ConfigError, DimensionError
from utils.model_commons import make_rng

# Frozen ViT-style encoder shared by both modality streams: patch tokenization,
# position embeddings with length interpolation and pre-norm transformer blocks.


@dataclass
class TransformerBlockParams:
    """One pre-norm block: LN -> MHA -> residual, LN -> MLP -> residual."""

    ln1_gain: Tensor
    ln1_bias: Tensor
    attn: AttentionParams
    ln2_gain: Tensor
    ln2_bias: Tensor
    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor

    def named_tensors(self, prefix):
        named = {
            f"{prefix}/ln1_gain": self.ln1_gain,
            f"{prefix}/ln1_bias": self.ln1_bias,
        }
        named.update(self.attn.named_tensors(f"{prefix}/attn"))
        named.update(
            {
                f"{prefix}/ln2_gain": self.ln2_gain,
                f"{prefix}/ln2_bias": self.ln2_bias,
                f"{prefix}/w1": self.w1,
                f"{prefix}/b1": self.b1,
                f"{prefix}/w2": self.w2,
                f"{prefix}/b2": self.b2,
            }
        )
        return named


@dataclass
class BackboneParams:
    """Frozen patch projection, pretrained-length position table and K blocks."""

    patch_proj: Tensor
    patch_bias: Tensor
    pos_embed: Tensor
    blocks: List[TransformerBlockParams] = field(default_factory=list)

    @property
    def width(self):
        return self.patch_proj.shape[1]

    @property
    def depth(self):
        return len(self.blocks)

    def named_tensors(self, prefix="backbone"):
        named = {
            f"{prefix}/patch_proj": self.patch_proj,
            f"{prefix}/patch_bias": self.patch_bias,
            f"{prefix}/pos_embed": self.pos_embed,
        }
        for index, block in enumerate(self.blocks):
            named.update(block.named_tensors(f"{prefix}/blocks/{index}"))
        return named


def init_backbone(config, seed, key=SEED_KEY_BACKBONE) -> BackboneParams:
    """Deterministic seeded backbone; every tensor is frozen.

    Position embeddings use N(0, 0.02^2); patch, attention and MLP weights use
    fan-in scaling N(0, 1/fan_in); biases are zero and layernorm gains one.
    """
    rng = make_rng(seed, key)
    d = config.d
    hidden = config.mlp_ratio * d
    patch_pixels = CHANNELS * config.patch_size**2

    def frozen(array):
        return Tensor(array, requires_grad=False)

    patch_proj = frozen(rng.normal(0.0, 1.0 / np.sqrt(patch_pixels), size=(patch_pixels, d)))
    pos_embed = frozen(rng.normal(0.0, INIT_STD, size=(config.pos_embed_len, d)))
    blocks = []
    for _ in range(config.depth):
        blocks.append(
            TransformerBlockParams(
                ln1_gain=frozen(np.ones(d)),
                ln1_bias=frozen(np.zeros(d)),
                attn=init_attention(rng, d, requires_grad=False),
                ln2_gain=frozen(np.ones(d)),
                ln2_bias=frozen(np.zeros(d)),
                w1=frozen(rng.normal(0.0, 1.0 / np.sqrt(d), size=(d, hidden))),
                b1=frozen(np.zeros(hidden)),
                w2=frozen(rng.normal(0.0, 1.0 / np.sqrt(hidden), size=(hidden, d))),
                b2=frozen(np.zeros(d)),
            )
        )
    return BackboneParams(patch_proj, frozen(np.zeros(d)), pos_embed, blocks)


def interpolate_pos_embed(table, target_len: int) -> Tensor:
    """Per-dimension linear interpolation on the normalised index grid [0, 1].

    Endpoints are preserved; the table is returned unchanged when the lengths
    already agree.
    """
    values = table.data if isinstance(table, Tensor) else np.asarray(table, dtype=np.float64)
    source_len = values.shape[0]
    if source_len < 2:
        raise ConfigError(f"position table needs at least 2 rows, got {source_len}")
    if target_len < 1:
        raise ConfigError(f"target length must be positive, got {target_len}")
    if target_len == source_len:
        return Tensor(values)

    positions = np.linspace(0.0, 1.0, target_len) * (source_len - 1)
    grid = np.arange(source_len, dtype=np.float64)
    columns = [np.interp(positions, grid, values[:, j]) for j in range(values.shape[1])]
    return Tensor(np.stack(columns, axis=1))


def _grid(height, width, patch, what):
    if height % patch or width % patch:
        raise ConfigError(f"{what} of size {height}x{width} is not divisible by patch {patch}")
    return height // patch, width // patch


def _patches(array, patch):
    # [B, C, H, W] -> [B, (H/p)*(W/p), C*p*p], row-major over the patch grid
    batch, channels, height, width = array.shape
    gh, gw = height // patch, width // patch
    blocks = array.reshape(batch, channels, gh, patch, gw, patch)
    blocks = blocks.transpose(0, 2, 4, 1, 3, 5)
    return blocks.reshape(batch, gh * gw, channels * patch * patch)


def _embed(backbone: BackboneParams, flat):
    if flat.shape[-1] != backbone.patch_proj.shape[0]:
        raise DimensionError(
            f"patch vectors of width {flat.shape[-1]} vs projection {backbone.patch_proj.shape}"
        )
    pos = interpolate_pos_embed(backbone.pos_embed, flat.shape[1])
    projected = ops.add(ops.matmul(Tensor(flat), backbone.patch_proj), backbone.patch_bias)
    return ops.add(projected, pos)


def patchify_visual(pixels, backbone: BackboneParams, config) -> Tensor:
    """Image(s) [3, H, W] or [B, 3, H, W] -> patch tokens [m, d] or [B, m, d]."""
    array = np.asarray(pixels, dtype=np.float64)
    single = array.ndim == 3
    if single:
        array = array[None]
    if array.ndim != 4 or array.shape[1] != CHANNELS:
        raise DimensionError(f"expected images shaped [B, 3, H, W], got {array.shape}")
    _grid(array.shape[2], array.shape[3], config.patch_size, "image")
    tokens = _embed(backbone, _patches(array, config.patch_size))
    return ops.reshape(tokens, tokens.shape[1:]) if single else tokens


def patchify_audio(spectrogram, backbone: BackboneParams, config) -> Tensor:
    """Spectrogram(s) [F, T] or [B, F, T] -> patch tokens [n, d] or [B, n, d].

    The single channel is replicated to three before the shared projection.
    """
    array = np.asarray(spectrogram, dtype=np.float64)
    single = array.ndim == 2
    if single:
        array = array[None]
    if array.ndim != 3:
        raise DimensionError(f"expected spectrograms shaped [B, F, T], got {array.shape}")
    _grid(array.shape[1], array.shape[2], config.patch_size, "spectrogram")
    flat = _patches(array[:, None], config.patch_size)
    tokens = _embed(backbone, np.concatenate([flat] * CHANNELS, axis=-1))
    return ops.reshape(tokens, tokens.shape[1:]) if single else tokens


def block_forward(block: TransformerBlockParams, tokens: Tensor, heads: int) -> Tensor:
    """Pre-norm transformer block; sequence length is preserved."""
    width = block.ln1_gain.shape[0]
    if tokens.shape[-1] != width:
        raise DimensionError(f"block width {width} vs tokens {tokens.shape}")
    normed = ops.layernorm(tokens, block.ln1_gain, block.ln1_bias)
    hidden = ops.add(tokens, multi_head_attention(block.attn, normed, heads))
    normed = ops.layernorm(hidden, block.ln2_gain, block.ln2_bias)
    mlp = ops.gelu(ops.add(ops.matmul(normed, block.w1), block.b1))
    return ops.add(hidden, ops.add(ops.matmul(mlp, block.w2), block.b2))


def frozen_count_closed_form(config):
    """Frozen parameter count of one backbone."""
    d = config.d
    hidden = config.mlp_ratio * d
    patch_pixels = CHANNELS * config.patch_size**2
    attention = 4 * d * d + 4 * d
    block = 4 * d + attention + d * hidden + hidden + hidden * d + d
    return patch_pixels * d + d + config.pos_embed_len * d + config.depth * block
