import numpy as np

from autograd import ops
from autograd.tensor import Tensor
from models.mavt.losses import LossBundle
from models.mavt.model import MavtModel
from utils.errors import ConfigError, ContractError


class UnimodalMavtModel(MavtModel):
    """Single-modality counterpart trained on foreground pairs of one modality.

    The stream carries [z_b | LSA(z_mod) | patches | z_f] and classifies through
    the modality's half of the split foreground head. Only the tensors on that
    path train.
    """

    def __init__(self, model_name="unimodal_mavt", config=None, debug=False):
        super().__init__(model_name=model_name, config=config, debug=debug)
        if not self.config.class_tokens:
            raise ConfigError("unimodal_mavt needs class tokens")
        self.modality = self.config.train_modality

    @property
    def uses_mismatch(self):
        return False

    def trainable_parameters(self):
        named = super().trainable_parameters()
        mod = self.modality
        prefixes = (
            f"tokens/z_{mod}/",
            f"lsa/{mod}/",
            "heads/fg_",
        )
        exact = {"tokens/z_b", "tokens/z_f", f"tokens/z_b/{mod}", f"tokens/z_f/{mod}"}
        return {
            name: tensor
            for name, tensor in named.items()
            if name in exact or name.startswith(prefixes)
        }

    def loss(self, batch):
        foreground = np.flatnonzero(np.asarray(batch.y_b) == 0)
        if foreground.size == 0:
            raise ContractError("unimodal training batches need foreground samples")
        batch = batch.subset(foreground)

        logits = self.unimodal_logits(batch, self.modality)
        one_hot = np.zeros(logits.shape)
        one_hot[np.arange(len(batch)), batch.y_f] = 1.0
        log_probs = ops.log_softmax(logits, axis=-1)
        per_sample = ops.scale(ops.sum(ops.mul(log_probs, Tensor(one_hot)), axis=-1), -1.0)
        total = ops.mean(per_sample)

        bundle = LossBundle(per_sample_bf=per_sample, block_losses={}, total=total)
        bundle.diagnostics = {
            "loss_total": total.item(),
            "loss_bf": bundle.loss_bf,
            "loss_cnt_sum": 0.0,
            "n_foreground": int(foreground.size),
            "n_background": 0,
        }
        return bundle

    def predict_with_probabilities(self, dataset, modality=None):
        modality = modality or self.modality
        if modality != self.modality:
            raise ConfigError(
                f"{self.model_name} was trained on modality '{self.modality}', not '{modality}'"
            )
        return super().predict_with_probabilities(dataset, modality)
