import numpy as np

from autograd.tensor import Tape, no_grad
from metrics.base_metric import EvalOutputs
from models.base_model import Model
from models.mavt.backbone import init_backbone, patchify_audio, patchify_visual
from models.mavt.configs import SEED_KEY_BACKBONE, SEED_KEY_BACKBONE_AUDIO
from models.mavt.heads import heads_forward, init_heads, unimodal_logits
from models.mavt.losses import total_loss
from models.mavt.saliency import class_score, saliency_map
from models.mavt.tokens import (
    encode_pair,
    init_token_bank,
    pick_backbone,
    pool_shared,
    unimodal_forward,
)
from utils.errors import ConfigError, ContractError


def _softmax_rows(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    exps = np.exp(shifted)
    return exps / exps.sum(axis=1, keepdims=True)


class MavtModel(Model):
    """Prompt tokens with local self-attention on a frozen dual-stream backbone.

    Only the token bank, its LSA units and the class-token heads train; the
    backbone is seeded once and never updated.
    """

    def __init__(self, model_name="mavt", config=None, debug=False):
        super().__init__(model_name=model_name, config=config, debug=debug)
        cfg = self.config
        if cfg.separate_backbones:
            self.backbone = {
                "v": init_backbone(cfg, cfg.seed, SEED_KEY_BACKBONE),
                "a": init_backbone(cfg, cfg.seed, SEED_KEY_BACKBONE_AUDIO),
            }
        else:
            self.backbone = init_backbone(cfg, cfg.seed, SEED_KEY_BACKBONE)
        self.bank = init_token_bank(cfg, cfg.seed)
        self.heads = init_heads(cfg, cfg.seed) if cfg.class_tokens else None

    def frozen_parameters(self):
        if isinstance(self.backbone, dict):
            named = {}
            for modality in ("a", "v"):
                named.update(self.backbone[modality].named_tensors(f"backbone_{modality}"))
            return named
        return self.backbone.named_tensors("backbone")

    def trainable_parameters(self):
        named = self.bank.named_tensors()
        if self.heads is not None:
            named.update(self.heads.named_tensors())
        return named

    def patch_tokens(self, dataset):
        """(P_a, P_v) patch tokens [B, n, d] and [B, m, d] of a batch."""
        p_a = patchify_audio(dataset.audio, pick_backbone(self.backbone, "a"), self.config)
        p_v = patchify_visual(dataset.visual, pick_backbone(self.backbone, "v"), self.config)
        return p_a, p_v

    def forward(self, batch):
        """(Predictions or None, StreamState_a, StreamState_v)."""
        p_a, p_v = self.patch_tokens(batch)
        state_a, state_v = encode_pair(self.bank, self.backbone, p_a, p_v, self.config)
        pred = heads_forward(self.heads, state_a, state_v) if self.heads is not None else None
        return pred, state_a, state_v

    def loss(self, batch):
        pred, state_a, state_v = self.forward(batch)
        return total_loss(pred, state_a, state_v, batch.y_b, batch.y_f, self.config)

    def unimodal_logits(self, batch, modality):
        """Foreground logits from one modality through its half of the fg head."""
        if self.heads is None:
            raise ContractError("unimodal evaluation needs class tokens")
        p_a, p_v = self.patch_tokens(batch)
        patches = p_a if modality == "a" else p_v
        state = unimodal_forward(modality, self.bank, self.backbone, patches, self.config)
        return unimodal_logits(self.heads, state)

    def _predict_chunk(self, batch, modality):
        # -> (p_bg, fg_logits or None, v_embed or None, a_embed or None)
        size = len(batch)
        if modality in ("a", "v"):
            logits = self.unimodal_logits(batch, modality).data
            return np.full(size, np.nan), logits, None, None

        pred, state_a, state_v = self.forward(batch)
        v_embed = a_embed = None
        if self.config.n_s:
            depth = self.config.depth
            v_embed = pool_shared(state_v, depth).data
            a_embed = pool_shared(state_a, depth).data
        if pred is None:
            return np.full(size, np.nan), None, v_embed, a_embed
        return pred.p_bg.data, pred.fg_logits.data, v_embed, a_embed

    def predict_with_probabilities(self, dataset, modality=None):
        modality = modality or "av"
        if modality not in ("av", "a", "v"):
            raise ConfigError(f"modality must be av, a or v, got {modality!r}")

        chunks = []
        step = self.config.eval_batch_size
        with no_grad():
            for start in range(0, len(dataset), step):
                indices = np.arange(start, min(start + step, len(dataset)))
                chunks.append(self._predict_chunk(dataset.subset(indices), modality))

        def stacked(position):
            parts = [chunk[position] for chunk in chunks]
            return None if parts[0] is None else np.concatenate(parts, axis=0)

        logits = stacked(1)
        outputs = EvalOutputs(
            y_b=np.asarray(dataset.y_b),
            y_f=np.asarray(dataset.y_f),
            p_bg=stacked(0),
            fg_pred=None if logits is None else logits.argmax(axis=1),
            v_embed=stacked(2),
            a_embed=stacked(3),
        )
        if logits is None:
            probabilities = np.full((len(dataset), self.config.n_classes), np.nan)
        else:
            probabilities = _softmax_rows(logits)
        return outputs, probabilities

    def predict(self, dataset, modality=None):
        outputs, _ = self.predict_with_probabilities(dataset, modality)
        return outputs

    def saliency(self, sample_batch, class_idx=None):
        """Patch-grid saliency of one sample's fg logit; defaults to the predicted class.

        :return: (map [H/p, W/p] in [0, 1], class index used)
        """
        if self.heads is None:
            raise ContractError("saliency needs the foreground head")
        if len(sample_batch) != 1:
            raise ContractError(f"saliency takes a single sample, got {len(sample_batch)}")
        with Tape():
            pred, _, state_v = self.forward(sample_batch)
            if class_idx is None:
                class_idx = int(np.argmax(pred.fg_logits.data[0]))
            score = class_score(pred, class_idx)
        height, width = self.config.image_hw
        grid = (height // self.config.patch_size, width // self.config.patch_size)
        return saliency_map(state_v, score, grid), class_idx

