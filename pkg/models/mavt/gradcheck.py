import numpy as np

from autograd.gradcheck import fd_check
from autograd.tensor import Tape, grad
from data.synthetic import SynthSpec, gen_dataset, sample_mismatch
from models.model_factory import ModelFactory
from training.configs import SEED_KEY_MISMATCH

MODEL_TOLERANCE = 1e-4
PRIMITIVE_TOLERANCE = 1e-6

# Denominator floor of the whole-model check; attention key biases have zero gradient
MODEL_GRAD_FLOOR = 1e-5


def gradcheck_batch(config):
    """Small mixed batch: foreground samples with mismatch pairs applied."""
    small = config.with_overrides(train_size=config.gradcheck_batch, test_size=1)
    batch = gen_dataset(SynthSpec.from_config(small)).train
    return sample_mismatch(batch, config.mismatch_ratio, config.seed, SEED_KEY_MISMATCH, 0, 0)


def _coordinates(gradient, count):
    # Largest-magnitude analytic entries; ties broken by flat index
    flat = np.abs(gradient).reshape(-1)
    order = np.argsort(-flat, kind="stable")
    return np.sort(order[: min(count, flat.size)])


def check_model(config, h=None):
    """fd_check of the total loss w.r.t. every trainable tensor.

    BCE runs on every sample so the background head is exercised too.
    :return: {tensor name: max relative error over the checked coordinates}
    """
    config = config.with_overrides(bg_loss_mode="always_bg")
    h = config.gradcheck_h if h is None else h
    model = ModelFactory().create_model(config.model, config)
    batch = gradcheck_batch(config)
    params = model.trainable_parameters()

    def loss_of(_):
        return model.loss(batch).total

    with Tape():
        total = loss_of(None)
    analytic = grad(total, list(params.values()))

    errors = {}
    for (name, tensor), gradient in zip(params.items(), analytic):
        indices = _coordinates(gradient, config.gradcheck_coords)
        errors[name] = fd_check(loss_of, tensor, h=h, indices=indices, floor=MODEL_GRAD_FLOOR)
    return errors
