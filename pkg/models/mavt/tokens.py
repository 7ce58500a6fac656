from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from autograd import ops
from autograd.tensor import Tensor
from models.mavt.attention import AttentionParams, init_attention, multi_head_attention
from models.mavt.backbone import BackboneParams, block_forward
from models.mavt.configs import BG_HIDDEN_RATIO, INIT_STD, MODALITIES, SEED_KEY_TOKENS
from utils.errors import ContractError, DimensionError
from utils.model_commons import make_rng

# Learnable prompt tokens, their local self-attention units and the assembly of
# one modality stream: [z_b | LSA_mod(z_mod) | patches | LSA_s(z_s) | z_f].

SLICE_ORDER = ("bg", "unimodal", "patches", "shared", "fg")


@dataclass
class TokenBank:
    """All trainable prompt parameters.

    `prompts` maps a bag name ("a", "v", "s") to one tensor per prompt depth
    (a single entry unless deep prompts are on). `bg` and `fg` map each
    modality to its class token; with shared class tokens both modalities
    reference the same Tensor.
    """

    prompts: Dict[str, List[Tensor]]
    bg: Dict[str, Tensor] = field(default_factory=dict)
    fg: Dict[str, Tensor] = field(default_factory=dict)
    lsa: Dict[str, AttentionParams] = field(default_factory=dict)

    def bag(self, name, depth_index=0) -> Optional[Tensor]:
        tensors = self.prompts.get(name) or []
        if not tensors:
            return None
        return tensors[min(depth_index, len(tensors) - 1)]

    @property
    def shared_class_tokens(self):
        return bool(self.bg) and self.bg["a"] is self.bg["v"]

    def named_tensors(self):
        named = {}
        for name, tensors in self.prompts.items():
            for index, tensor in enumerate(tensors):
                named[f"tokens/z_{name}/{index}"] = tensor
        for label, tokens in (("b", self.bg), ("f", self.fg)):
            if not tokens:
                continue
            if tokens["a"] is tokens["v"]:
                named[f"tokens/z_{label}"] = tokens["a"]
            else:
                for modality in ("a", "v"):
                    named[f"tokens/z_{label}/{modality}"] = tokens[modality]
        for name, params in self.lsa.items():
            named.update(params.named_tensors(f"lsa/{name}"))
        return named


def init_token_bank(config, seed, key=SEED_KEY_TOKENS) -> TokenBank:
    """Seeded N(0, 0.02^2) tokens; LSA weights share the scale, biases zero."""
    rng = make_rng(seed, key)
    d = config.d
    depth = config.depth if config.deep_prompts else 1

    def trainable(rows):
        return Tensor(rng.normal(0.0, INIT_STD, size=(rows, d)), requires_grad=True)

    prompts = {}
    for name, count in (("a", config.n_a), ("v", config.n_v), ("s", config.n_s)):
        prompts[name] = [trainable(count) for _ in range(depth)] if count else []

    bg, fg = {}, {}
    if config.class_tokens:
        if config.share_class_tokens:
            z_b, z_f = trainable(1), trainable(1)
            bg = {"a": z_b, "v": z_b}
            fg = {"a": z_f, "v": z_f}
        else:
            bg = {modality: trainable(1) for modality in ("a", "v")}
            fg = {modality: trainable(1) for modality in ("a", "v")}

    lsa = {}
    if config.use_lsa:
        for name in ("a", "v", "s"):
            if prompts[name]:
                lsa[name] = init_attention(rng, d, requires_grad=True, std=INIT_STD)
    return TokenBank(prompts=prompts, bg=bg, fg=fg, lsa=lsa)


def lsa_forward(params: AttentionParams, x: Tensor, heads: int) -> Tensor:
    """LSA(x) = x + MHA(x) over one bag of tokens."""
    if x.shape[-1] != params.width:
        raise DimensionError(f"LSA width {params.width} vs tokens {x.shape}")
    return ops.add(x, multi_head_attention(params, x, heads))


def _prepared_bag(bank: TokenBank, name, depth_index, heads):
    tokens = bank.bag(name, depth_index)
    if tokens is None:
        return None
    if name in bank.lsa:
        return lsa_forward(bank.lsa[name], tokens, heads)
    return tokens


def stream_layout(config, n_patches, include_shared=True, modality="a"):
    """Slice offsets {name: (start, stop)} of one stream; empty slices are omitted."""
    unimodal = config.n_a if modality == "a" else config.n_v
    sizes = {
        "bg": 1 if config.class_tokens else 0,
        "unimodal": unimodal,
        "patches": n_patches,
        "shared": config.n_s if include_shared else 0,
        "fg": 1 if config.class_tokens else 0,
    }
    offsets, start = {}, 0
    for name in SLICE_ORDER:
        if sizes[name]:
            offsets[name] = (start, start + sizes[name])
            start += sizes[name]
    return offsets


def _check_modality(modality):
    if modality not in MODALITIES:
        raise ContractError(f"modality must be one of {MODALITIES}, got {modality!r}")


def _prompt_pieces(modality, bank, config, depth_index, include_shared):
    # Prompt slices keyed by layout name, unbatched [t, d]
    pieces = {}
    if config.class_tokens:
        pieces["bg"] = bank.bg[modality]
        pieces["fg"] = bank.fg[modality]
    unimodal = _prepared_bag(bank, modality, depth_index, config.heads)
    if unimodal is not None:
        pieces["unimodal"] = unimodal
    if include_shared:
        shared = _prepared_bag(bank, "s", depth_index, config.heads)
        if shared is not None:
            pieces["shared"] = shared
    return pieces


def _join(pieces, batch):
    ordered = []
    for name in SLICE_ORDER:
        if name not in pieces:
            continue
        piece = pieces[name]
        if batch is not None and piece.ndim == 2:
            piece = ops.expand(piece, batch)
        ordered.append(piece)
    return ops.concat(ordered, axis=-2)


def assemble_stream(modality, bank: TokenBank, patches: Tensor, config, include_shared=True):
    """Concatenate class tokens, LSA-refined prompts and patch tokens.

    `patches` is [n, d] or [B, n, d]; the result is [S, d] or [B, S, d].
    Class tokens bypass LSA.
    """
    _check_modality(modality)
    if patches.shape[-1] != config.d:
        raise DimensionError(f"patch tokens {patches.shape} do not have width {config.d}")
    pieces = _prompt_pieces(modality, bank, config, 0, include_shared)
    pieces["patches"] = patches
    return _join(pieces, patches.shape[0] if patches.ndim == 3 else None)


@dataclass
class StreamState:
    """Token embeddings of one modality stream.

    embeddings[0] is the assembled input and embeddings[k] the output of
    block k. Offsets are the same for every block.
    """

    modality: str
    embeddings: List[Tensor]
    offsets: Dict[str, tuple]

    @property
    def depth(self):
        return len(self.embeddings) - 1

    def block_slice(self, name, k) -> Tensor:
        """Rows of slice `name` in E^k."""
        if not 0 <= k <= self.depth:
            raise ContractError(f"block index {k} outside 0..{self.depth}")
        if name not in self.offsets:
            raise ContractError(f"stream has no '{name}' slice")
        start, stop = self.offsets[name]
        return ops.slice_axis(self.embeddings[k], start, stop, axis=-2)

    def class_output(self, name, k=None) -> Tensor:
        """The single-row class token of E^k (default: last block) as [..., d]."""
        rows = self.block_slice(name, self.depth if k is None else k)
        return ops.reshape(rows, rows.shape[:-2] + rows.shape[-1:])


def _reinject(x, pieces, offsets):
    # Replace the prompt slices of a block input with fresh per-block tokens
    batch = x.shape[0] if x.ndim == 3 else None
    parts = {}
    for name, (start, stop) in offsets.items():
        if name in ("unimodal", "shared") and name in pieces:
            parts[name] = pieces[name]
        else:
            parts[name] = ops.slice_axis(x, start, stop, axis=-2)
    return _join(parts, batch)


# pylint: disable=too-many-arguments
def encode_stream(
    modality,
    bank: TokenBank,
    backbone: BackboneParams,
    patches: Tensor,
    config,
    include_shared=True,
) -> StreamState:
    """Assemble one stream and run it through the K frozen blocks."""
    x = assemble_stream(modality, bank, patches, config, include_shared)
    offsets = stream_layout(config, patches.shape[-2], include_shared, modality)
    if x.shape[-2] != max(stop for _, stop in offsets.values()):
        raise DimensionError(f"assembled stream {x.shape} disagrees with layout {offsets}")

    embeddings = [x]
    for k, block in enumerate(backbone.blocks, start=1):
        if config.deep_prompts and k >= 2:
            pieces = _prompt_pieces(modality, bank, config, k - 1, include_shared)
            x = _reinject(x, pieces, offsets)
        x = block_forward(block, x, config.heads)
        embeddings.append(x)
    return StreamState(modality=modality, embeddings=embeddings, offsets=offsets)


def pick_backbone(backbone, modality) -> BackboneParams:
    """`backbone` is one shared BackboneParams or a {modality: params} mapping."""
    if isinstance(backbone, BackboneParams):
        return backbone
    return backbone[modality]


def encode_pair(bank, backbone, patches_a, patches_v, config):
    """Encode both streams; z_s, z_b and z_f enter both graphs."""
    state_a = encode_stream("a", bank, pick_backbone(backbone, "a"), patches_a, config)
    state_v = encode_stream("v", bank, pick_backbone(backbone, "v"), patches_v, config)
    return state_a, state_v


def pool_shared(stream: StreamState, k) -> Tensor:
    """Mean of the shared-token rows of E^k: [d] or [B, d]."""
    if not 1 <= k <= stream.depth:
        raise ContractError(f"block index {k} outside 1..{stream.depth}")
    return ops.mean(stream.block_slice("shared", k), axis=-2)


def unimodal_forward(modality, bank, backbone, patches, config) -> StreamState:
    """Stream without shared tokens: [z_b | LSA_mod(z_mod) | patches | z_f]."""
    _check_modality(modality)
    return encode_stream(
        modality, bank, pick_backbone(backbone, modality), patches, config, include_shared=False
    )


def lsa_param_count(d):
    return 4 * d * d + 4 * d


def head_param_count(d, n_classes):
    """bg MLP (2d -> H -> 1) plus affine fg head (2d -> C)."""
    hidden = BG_HIDDEN_RATIO * d
    return (2 * d * hidden + hidden) + (hidden + 1) + (2 * d * n_classes + n_classes)


def trainable_count_closed_form(config):
    """Trainable parameters of tokens, LSA units and heads."""
    d = config.d
    depth = config.depth if config.deep_prompts else 1
    count = d * depth * (config.n_a + config.n_v + config.n_s)
    if config.class_tokens:
        count += 2 * d if config.share_class_tokens else 4 * d
        count += head_param_count(d, config.n_classes)
    if config.use_lsa:
        bags = sum(1 for n in (config.n_a, config.n_v, config.n_s) if n)
        count += bags * lsa_param_count(d)
    return count


def count_elements(tensors):
    return int(np.sum([t.size for t in tensors], dtype=np.int64)) if tensors else 0
