import numpy as np
import pytest

from models.mavt.model import MavtModel
from training.optimizer import lr_at
from training.trainer import Trainer, evaluate


@pytest.fixture
def short_run(tiny_config):
    # Reduced-scale run: a few dozen Adam steps at a raised learning rate
    return tiny_config.with_overrides(epochs=16, lr=1e-2, bg_loss_mode="always_bg")


def test_training_lowers_the_loss(short_run, tiny_data):
    batch = tiny_data.train.subset(range(8))
    model = MavtModel(config=short_run)
    before = model.loss(batch).total.item()
    result = model.train(tiny_data.train)
    after = model.loss(batch).total.item()
    assert after < before
    losses = result.metrics["loss_total"].to_numpy()
    assert np.isfinite(losses).all()
    assert losses[-1] < losses[0]


def test_trained_model_beats_chance_on_training_pairs(short_run, tiny_data):
    model = MavtModel(config=short_run)
    model.train(tiny_data.train)
    row = evaluate(model, tiny_data.train)
    assert row["fg_acc"] > 1.0 / short_run.n_classes


def test_epoch_rows_follow_the_step_schedule(tiny_config, tiny_data):
    config = tiny_config.with_overrides(epochs=3, lr_step=2, lr_decay=0.5)
    result = MavtModel(config=config).train(tiny_data.train, tiny_data.test)
    assert result.metrics["lr"].tolist() == [lr_at(epoch, config) for epoch in range(3)]
    assert result.metrics["lr"].tolist() == [config.lr, config.lr, 0.5 * config.lr]


def test_batches_cover_the_epoch_with_mismatch_pairs(tiny_config, tiny_data):
    trainer = Trainer(MavtModel(config=tiny_config), tiny_config)
    batches = [batch for _, batch in trainer.batches(tiny_data.train, epoch=0)]
    assert [len(batch) for batch in batches] == [8, 8]
    expected = int(np.floor(tiny_config.mismatch_ratio * tiny_config.batch_size))
    assert all(int(batch.y_b.sum()) == expected for batch in batches)
