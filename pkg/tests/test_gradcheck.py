import numpy as np
import pytest

from autograd import ops
from autograd.gradcheck import fd_check
from autograd.tensor import Tensor
from models.mavt.heads import Predictions
from models.mavt.losses import BG_LOSS_MODES, fg_bg_loss

Y_B = np.array([0, 1, 0, 1, 0])
Y_F = np.array([2, -1, 0, -1, 3])
N_CLASSES = 4


def _logits(seed):
    rng = np.random.default_rng(seed)
    bg = Tensor(rng.uniform(-0.5, 0.5, size=5), requires_grad=True)
    fg = Tensor(rng.uniform(-0.5, 0.5, size=(5, N_CLASSES)), requires_grad=True)
    return bg, fg


def _summed_loss(bg, fg, mode):
    pred = Predictions(bg_logit=bg, p_bg=ops.sigmoid(bg), fg_logits=fg)
    return ops.sum(fg_bg_loss(pred, Y_B, Y_F, N_CLASSES, mode=mode))


@pytest.mark.parametrize("mode", BG_LOSS_MODES)
def test_fg_bg_loss_gradient_wrt_fg_logits(mode):
    bg, fg = _logits(0)
    assert fd_check(lambda x: _summed_loss(bg, x, mode), fg) < 1e-8


@pytest.mark.parametrize("mode", BG_LOSS_MODES)
def test_fg_bg_loss_gradient_wrt_bg_logits(mode):
    bg, fg = _logits(1)
    assert fd_check(lambda x: _summed_loss(x, fg, mode), bg) < 1e-8
