import json
import math
import os
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd
from tqdm import tqdm

import configs
from autograd.tensor import Tape, backward
from data.synthetic import PairedDataset, sample_mismatch
from metrics.metric_factory import MetricFactory
from training.configs import (
    CHECKPOINT_NAME,
    DIAGNOSTICS_NAME,
    METRICS_COLUMNS,
    METRICS_NAME,
    SEED_KEY_MISMATCH,
    SEED_KEY_SHUFFLE,
)
from training.optimizer import OptimState, adam_step, lr_at
from utils.common import print_colored
from utils.errors import ContractError, NonFiniteLossError, SamplingError
from utils.model_commons import make_rng

# Metric name in the registry -> column of the evaluation row
EVAL_COLUMNS = {
    "fg_accuracy": "fg_acc",
    "bg_accuracy": "bg_acc",
    "retrieval_recall": "retrieval_r1",
    "event_accuracy": "event_acc",
}


def evaluate(model, dataset: PairedDataset, modality=None, debug=False):
    """fg_acc, bg_acc, retrieval_r1 and event_acc of a model over a dataset.

    Unimodal evaluation (modality "a" or "v") has no background head or
    pooled shared features; those entries are NaN.
    """
    outputs = model.predict(dataset, modality=modality)
    values = MetricFactory(debug=debug).calculate_all(configs.metrics, outputs)
    return {EVAL_COLUMNS[name]: float(value) for name, value in values.items()}


@dataclass
class TrainResult:
    metrics: pd.DataFrame
    best_epoch: Optional[int]
    best_fg_acc: float
    checkpoint_path: Optional[str]
    frozen_digest: str


class Trainer:
    """
    Mini-batch Adam over a model's trainable tensors with step-decayed learning
    rate, per-epoch evaluation, a metrics CSV and best-accuracy checkpointing.

    Batch order, mismatch sampling and reductions are fixed by the seed, so two
    runs with one configuration write identical metrics files.
    """

    def __init__(self, model, config, out_dir=None, debug=False):
        self.model = model
        self.config = config
        self.out_dir = out_dir
        self.debug = debug
        self.optim_state = OptimState.from_config(config)

    def _path(self, name):
        return os.path.join(self.out_dir, name) if self.out_dir else None

    def batches(self, train_set: PairedDataset, epoch):
        """Yield (step, batch) in the epoch's seeded order, mismatch pairs applied."""
        order = make_rng(self.config.seed, SEED_KEY_SHUFFLE, epoch).permutation(len(train_set))
        size = self.config.batch_size
        ratio = self.config.mismatch_ratio if self.model.uses_mismatch else 0.0
        for step, start in enumerate(range(0, len(train_set), size)):
            batch = train_set.subset(order[start : start + size])
            try:
                batch = sample_mismatch(
                    batch, ratio, self.config.seed, SEED_KEY_MISMATCH, epoch, step
                )
            except SamplingError as e:
                print_colored(f"Epoch {epoch} step {step}: no mismatch pairs ({e})", "warn")
            yield step, batch

    def _dump_diagnostics(self, diagnostics):
        path = self._path(DIAGNOSTICS_NAME)
        if path is None:
            return None
        os.makedirs(self.out_dir, exist_ok=True)
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(diagnostics, handle, indent=2, sort_keys=True)
        return path

    def train_step(self, batch, epoch, step):
        """One traced forward/backward pass and Adam update; returns the LossBundle."""
        params = self.model.trainable_parameters()
        for tensor in params.values():
            tensor.zero_grad()

        with Tape():
            bundle = self.model.loss(batch)
        if not bundle.is_finite():
            diagnostics = dict(bundle.diagnostics, epoch=epoch, step=step)
            path = self._dump_diagnostics(diagnostics)
            diagnostics["path"] = path
            raise NonFiniteLossError(
                f"non-finite loss at epoch {epoch}, step {step}", diagnostics=diagnostics
            )

        backward(bundle.total)
        adam_step(self.optim_state, params)
        return bundle

    def run_epoch(self, train_set, epoch):
        """Sample-weighted mean loss terms of one epoch."""
        self.optim_state.lr = lr_at(epoch, self.config)
        sums = np.zeros(3)
        count = 0
        for step, batch in self.batches(train_set, epoch):
            bundle = self.train_step(batch, epoch, step)
            weight = len(batch)
            sums += weight * np.array([bundle.total.item(), bundle.loss_bf, bundle.loss_cnt_sum])
            count += weight
        loss_total, loss_bf, loss_cnt_sum = sums / max(count, 1)
        return {"loss_total": loss_total, "loss_bf": loss_bf, "loss_cnt_sum": loss_cnt_sum}

    # pylint: disable=too-many-locals
    def fit(self, train_set: PairedDataset, test_set: PairedDataset = None) -> TrainResult:
        """Train for config.epochs; evaluates on test_set after every epoch."""
        rows = []
        best_epoch, best_fg_acc = None, -math.inf
        checkpoint_path = self._path(CHECKPOINT_NAME)
        initial_digest = self.model.frozen_digest()
        modality = getattr(self.model, "modality", None)

        epochs = tqdm(
            range(self.config.epochs),
            desc=f"Training {self.model.model_name}",
            file=sys.stderr,
            disable=not sys.stderr.isatty(),
        )
        for epoch in epochs:
            row = {"epoch": epoch, "lr": lr_at(epoch, self.config)}
            row.update(self.run_epoch(train_set, epoch))
            if test_set is not None:
                row.update(evaluate(self.model, test_set, modality=modality, debug=self.debug))
            else:
                row.update({"fg_acc": np.nan, "bg_acc": np.nan, "retrieval_r1": np.nan})
            rows.append(row)

            metrics = pd.DataFrame(rows)[METRICS_COLUMNS]
            if self.out_dir:
                os.makedirs(self.out_dir, exist_ok=True)
                metrics.to_csv(self._path(METRICS_NAME), index=False)

            if row["fg_acc"] > best_fg_acc:
                best_epoch, best_fg_acc = epoch, row["fg_acc"]
                if checkpoint_path:
                    self.model.save(checkpoint_path, self.optim_state)

            if self.debug:
                print_colored(
                    f"Epoch {epoch}: loss {row['loss_total']:.4f}, fg_acc {row['fg_acc']:.4f}, "
                    f"bg_acc {row['bg_acc']:.4f}",
                    "gray",
                )

        if best_epoch is None and checkpoint_path:
            self.model.save(checkpoint_path, self.optim_state)

        final_digest = self.model.frozen_digest()
        if final_digest != initial_digest:
            raise ContractError("frozen parameters changed during training")

        return TrainResult(
            metrics=pd.DataFrame(rows)[METRICS_COLUMNS],
            best_epoch=best_epoch,
            best_fg_acc=best_fg_acc if best_epoch is not None else float("nan"),
            checkpoint_path=checkpoint_path,
            frozen_digest=final_digest,
        )
