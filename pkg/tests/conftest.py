import pytest

from configs import RunConfig
from data.synthetic import SynthSpec, gen_dataset

# Tiny model and dataset so end-to-end tests finish in seconds
TINY = {
    "d": 8,
    "depth": 2,
    "heads": 2,
    "mlp_ratio": 2,
    "patch_size": 4,
    "image_hw": (8, 8),
    "spec_ft": (8, 8),
    "pos_embed_len": 4,
    "n_a": 2,
    "n_v": 2,
    "n_s": 2,
    "n_classes": 4,
    "noise_std": 0.05,
    "train_size": 16,
    "test_size": 8,
    "test_mismatch_ratio": 0.25,
    "batch_size": 8,
    "eval_batch_size": 8,
    "epochs": 2,
    "gradcheck_batch": 4,
    "gradcheck_coords": 3,
}


@pytest.fixture
def tiny_config():
    return RunConfig.build(TINY)


@pytest.fixture
def tiny_data(tiny_config):
    return gen_dataset(SynthSpec.from_config(tiny_config))
