from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from autograd import ops
from autograd.tensor import Tensor
from models.mavt.heads import Predictions
from models.mavt.tokens import StreamState, pool_shared
from utils.errors import ConfigError, ContractError

BG_LOSS_MODES = ("literal", "always_bg")


@dataclass
class LossBundle:
    """Per-sample fg/bg loss, per-block contrastive losses and the gated total."""

    per_sample_bf: Tensor
    block_losses: Dict[int, Tensor]
    total: Tensor
    diagnostics: Dict[str, float] = field(default_factory=dict)

    @property
    def loss_bf(self):
        return float(np.mean(self.per_sample_bf.data)) if self.per_sample_bf is not None else 0.0

    @property
    def loss_cnt_sum(self):
        return float(sum(loss.item() for loss in self.block_losses.values()))

    def is_finite(self):
        values = [self.total.item(), self.loss_bf, self.loss_cnt_sum]
        return bool(np.all(np.isfinite(values)))


def scl_block_loss(v: Tensor, a: Tensor, tau, mask) -> Tensor:
    """Symmetric InfoNCE between rows of v and a over the masked sub-batch.

    Cosine similarities scaled by 1/tau; the v->a and a->v cross-entropies
    against the diagonal are averaged. An empty sub-batch gives 0.
    """
    if tau <= 0:
        raise ConfigError(f"temperature must be positive, got {tau}")
    keep = np.flatnonzero(np.asarray(mask, dtype=np.float64) > 0)
    if keep.size == 0:
        return Tensor(0.0)

    v_rows = ops.l2_normalize(ops.take_rows(v, keep))
    a_rows = ops.l2_normalize(ops.take_rows(a, keep))
    logits = ops.scale(ops.matmul(v_rows, ops.transpose(a_rows)), 1.0 / tau)

    count = keep.size
    diagonal = Tensor(np.eye(count))
    v_to_a = ops.sum(ops.mul(ops.log_softmax(logits, axis=1), diagonal))
    a_to_v = ops.sum(ops.mul(ops.log_softmax(logits, axis=0), diagonal))
    return ops.scale(ops.add(v_to_a, a_to_v), -0.5 / count)


def fg_bg_loss(pred: Predictions, y_b, y_f, n_classes, mode="literal") -> Tensor:
    """Per-sample y_b-weighted BCE plus (1 - y_b)-weighted CE, shape [B].

    In "always_bg" mode the BCE term applies to every sample.
    """
    if mode not in BG_LOSS_MODES:
        raise ConfigError(f"bg_loss_mode must be one of {BG_LOSS_MODES}, got {mode!r}")
    y_b = np.asarray(y_b, dtype=np.float64).reshape(-1)
    y_f = np.asarray(y_f, dtype=np.int64).reshape(-1)
    if y_b.shape[0] != pred.bg_logit.shape[0]:
        raise ContractError(f"{y_b.shape[0]} labels for {pred.bg_logit.shape[0]} predictions")
    if np.any((y_b == 0) & ((y_f < 0) | (y_f >= n_classes))):
        raise ContractError(f"foreground labels must lie in 0..{n_classes - 1}")

    # -[y log p + (1 - y) log(1 - p)], with log(1 - p) = log_sigmoid(-logit)
    log_p = ops.log_sigmoid(pred.bg_logit)
    log_not_p = ops.log_sigmoid(ops.scale(pred.bg_logit, -1.0))
    bce = ops.scale(
        ops.add(ops.mul(log_p, Tensor(y_b)), ops.mul(log_not_p, Tensor(1.0 - y_b))), -1.0
    )
    bce_weight = y_b if mode == "literal" else np.ones_like(y_b)

    one_hot = np.zeros(pred.fg_logits.shape)
    foreground = np.flatnonzero(y_b == 0)
    one_hot[foreground, y_f[foreground]] = 1.0
    log_probs = ops.log_softmax(pred.fg_logits, axis=-1)
    ce = ops.scale(ops.sum(ops.mul(log_probs, Tensor(one_hot)), axis=-1), -1.0)
    return ops.add(ops.mul(bce, Tensor(bce_weight)), ce)


def contrastive_blocks(config):
    """Blocks that carry a contrastive term: all of 1..K, or K alone."""
    if config.contrastive_weight == 0 or config.n_s == 0:
        return []
    return list(range(1, config.depth + 1)) if config.blockwise else [config.depth]


# pylint: disable=too-many-locals
def total_loss(
    pred: Predictions, stream_a: StreamState, stream_v: StreamState, y_b, y_f, config
) -> LossBundle:
    """Batch mean of the fg/bg loss plus the weighted sum of block losses.

    Contrastive terms only see foreground samples (ground-truth y_b = 0).
    `pred` may be None when class tokens are off.
    """
    y_b = np.asarray(y_b, dtype=np.float64).reshape(-1)
    foreground = (y_b == 0).astype(np.float64)
    weights = config.weights_per_block

    block_losses = {}
    for k in contrastive_blocks(config):
        block_losses[k] = scl_block_loss(
            pool_shared(stream_v, k), pool_shared(stream_a, k), config.tau, foreground
        )

    terms = []
    per_sample = None
    if pred is not None:
        per_sample = fg_bg_loss(pred, y_b, y_f, config.n_classes, config.bg_loss_mode)
        terms.append(ops.mean(per_sample))
    for k, loss in block_losses.items():
        terms.append(ops.scale(loss, config.contrastive_weight * weights[k - 1]))
    if not terms:
        raise ContractError("no loss terms: class tokens are off and contrastive weight is 0")

    total = terms[0]
    for term in terms[1:]:
        total = ops.add(total, term)

    bundle = LossBundle(per_sample_bf=per_sample, block_losses=block_losses, total=total)
    bundle.diagnostics = {
        "loss_total": total.item(),
        "loss_bf": bundle.loss_bf,
        "loss_cnt_sum": bundle.loss_cnt_sum,
        "n_foreground": int(foreground.sum()),
        "n_background": int(y_b.size - foreground.sum()),
    }
    for k, loss in block_losses.items():
        bundle.diagnostics[f"loss_cnt_{k}"] = loss.item()
    return bundle


def block_loss_list(bundle: LossBundle, depth) -> List[float]:
    """Per-block contrastive values, 0.0 for blocks without a term."""
    losses = bundle.block_losses
    return [losses[k].item() if k in losses else 0.0 for k in range(1, depth + 1)]
