import os
from abc import ABC, abstractmethod
from typing import Dict

import numpy as np
import pandas as pd

from autograd.serialization import load_record, save_record
from autograd.tensor import Tensor
from configs import RunConfig
from metrics.base_metric import EvalOutputs
from training.optimizer import OptimState
from utils.common import print_colored
from utils.errors import FormatError
from utils.model_commons import digest_arrays

CONFIG_NAME = "run.cfg"


class Model(ABC):
    """Base class for all audio-visual models with integrated checkpoint save/load.

    A checkpoint is one tensor record with a frozen section (frozen/...), a
    trainable section (trainable/...) and, when given, the optimiser state
    (optim/...). The run configuration is written next to it as run.cfg.
    """

    def __init__(self, model_name, config=None, save_dir="trained_models", debug=False):
        self.debug = debug
        self.model_name = model_name
        self.config = config if config is not None else RunConfig()
        self.save_dir = save_dir

    @abstractmethod
    def trainable_parameters(self) -> Dict[str, Tensor]:
        """Named tensors updated by the optimiser."""

    @abstractmethod
    def frozen_parameters(self) -> Dict[str, Tensor]:
        """Named tensors that never change after initialisation."""

    @abstractmethod
    def loss(self, batch):
        """LossBundle of one batch; call under a recording Tape."""

    @abstractmethod
    def predict(self, dataset, modality=None) -> EvalOutputs:
        """Labels and outputs over a dataset, without recording a tape."""

    @property
    def uses_mismatch(self):
        """Whether training batches receive synthetic mismatch pairs."""
        return True

    def train(self, train_set, test_set=None, out_dir=None):
        """Optimise the trainable parameters; returns the TrainResult.

        Nothing is written to disk when out_dir is None.
        """
        # pylint: disable=import-outside-toplevel
        from training.trainer import Trainer

        trainer = Trainer(self, self.config, out_dir=out_dir, debug=self.debug)
        return trainer.fit(train_set, test_set)

    def evaluate(self, dataset, modality=None):
        """Metric row (fg_acc, bg_acc, retrieval_r1, event_acc) over a dataset."""
        # pylint: disable=import-outside-toplevel
        from training.trainer import evaluate

        return evaluate(self, dataset, modality=modality)

    def inference(self, dataset, modality=None) -> pd.DataFrame:
        """Per-sample predictions: background probability, fg class and its confidence."""
        outputs, probabilities = self.predict_with_probabilities(dataset, modality)
        return pd.DataFrame(
            {
                "p_bg": outputs.p_bg,
                "fg_pred": outputs.fg_pred,
                "fg_conf": probabilities.max(axis=1),
            }
        )

    def predict_with_probabilities(self, dataset, modality=None):
        """EvalOutputs plus softmax fg probabilities [N, C]."""
        raise NotImplementedError(f"{type(self).__name__} does not expose probabilities")

    def parameter_counts(self):
        """(trainable, frozen) element counts from an exhaustive walk of the tensors."""
        trainable = sum(t.size for t in self.trainable_parameters().values())
        frozen = sum(t.size for t in self.frozen_parameters().values())
        return int(trainable), int(frozen)

    def frozen_digest(self) -> str:
        frozen = self.frozen_parameters()
        return digest_arrays(frozen[name].data for name in sorted(frozen))

    def state_arrays(self, optim_state: OptimState = None):
        named = {f"frozen/{n}": t.data for n, t in self.frozen_parameters().items()}
        named.update({f"trainable/{n}": t.data for n, t in self.trainable_parameters().items()})
        if optim_state is not None:
            named.update(optim_state.named_arrays())
        return named

    def save(self, path=None, optim_state: OptimState = None):
        """Write the checkpoint record and the sibling run.cfg; returns the path."""
        if path is None:
            path = os.path.join(self.save_dir, self.model_name, "checkpoint.mavt")
        directory = os.path.dirname(path) or "."
        os.makedirs(directory, exist_ok=True)
        save_record(path, self.state_arrays(optim_state))
        with open(os.path.join(directory, CONFIG_NAME), "w", encoding="utf-8") as handle:
            handle.write(self.config.dump())
        if self.debug:
            print_colored(f"Checkpoint saved as {path}", "success")
        return path

    def load(self, path) -> OptimState:
        """Restore every tensor from a checkpoint; returns its optimiser state."""
        try:
            arrays = load_record(path)
        except FileNotFoundError as e:
            raise FormatError(f"Checkpoint not found: {path}") from e

        for section, params in (
            ("frozen", self.frozen_parameters()),
            ("trainable", self.trainable_parameters()),
        ):
            for name, tensor in params.items():
                key = f"{section}/{name}"
                if key not in arrays:
                    raise FormatError(f"{path}: missing tensor '{key}'")
                if arrays[key].shape != tensor.shape:
                    raise FormatError(
                        f"{path}: '{key}' has shape {arrays[key].shape}, expected {tensor.shape}"
                    )
                tensor.data = np.array(arrays[key], dtype=np.float64)

        optim_state = OptimState.from_config(self.config)
        optim_state.restore(arrays, self.trainable_parameters())
        if self.debug:
            print_colored(f"Checkpoint loaded from {path}", "success")
        return optim_state


def read_checkpoint_config(path, overrides=None) -> RunConfig:
    """RunConfig stored next to a checkpoint, with optional key overrides."""
    config_path = os.path.join(os.path.dirname(path) or ".", CONFIG_NAME)
    if not os.path.exists(config_path):
        raise FormatError(f"No {CONFIG_NAME} next to checkpoint {path}")
    return RunConfig.from_file(config_path, overrides)
