import math

import numpy as np
import pytest

from autograd import ops
from autograd.gradcheck import fd_check
from autograd.tensor import Tape, Tensor, grad
from data.synthetic import sample_mismatch
from models.mavt.heads import (
    HeadParams,
    Predictions,
    bg_head_forward,
    bg_hidden_width,
    heads_forward,
    init_heads,
    unimodal_logits,
)
from models.mavt.losses import (
    block_loss_list,
    contrastive_blocks,
    fg_bg_loss,
    scl_block_loss,
    total_loss,
)
from models.mavt.model import MavtModel
from models.mavt.tokens import pool_shared
from training.optimizer import OptimState, adam_step
from utils.errors import ConfigError, ContractError


def _unit_rows(rng, count, d):
    rows = rng.normal(size=(count, d))
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def _loop_infonce(v, a, tau):
    count = len(v)

    def cos(x, y):
        return float(x @ y) / (np.linalg.norm(x) * np.linalg.norm(y))

    total = 0.0
    for i in range(count):
        row = [cos(v[i], a[j]) / tau for j in range(count)]
        col = [cos(v[j], a[i]) / tau for j in range(count)]
        for scores in (row, col):
            top = max(scores)
            lse = top + math.log(sum(math.exp(s - top) for s in scores))
            total += lse - scores[i]
    return total / (2 * count)


def _predictions(bg_logit, fg_logits):
    bg = Tensor(np.asarray(bg_logit, dtype=np.float64), requires_grad=True)
    fg = Tensor(np.asarray(fg_logits, dtype=np.float64), requires_grad=True)
    return Predictions(bg_logit=bg, p_bg=ops.sigmoid(bg), fg_logits=fg)


def test_single_pair_gives_zero():
    rng = np.random.default_rng(0)
    v, a = Tensor(rng.normal(size=(1, 6))), Tensor(rng.normal(size=(1, 6)))
    loss = scl_block_loss(v, a, 0.07, [1])
    assert loss.item() == 0.0


@pytest.mark.parametrize("tau", [0.01, 0.07, 0.5, 1.0, 10.0])
def test_identical_embeddings_give_log_batch_at_any_temperature(tau):
    row = np.random.default_rng(1).normal(size=6)
    batch = Tensor(np.tile(row, (5, 1)))
    loss = scl_block_loss(batch, batch, tau, np.ones(5))
    assert abs(loss.item() - math.log(5)) < 1e-12


def test_matches_loop_oracle():
    rng = np.random.default_rng(2)
    v, a = _unit_rows(rng, 4, 6), _unit_rows(rng, 4, 6)
    loss = scl_block_loss(Tensor(v), Tensor(a), 0.07, np.ones(4))
    assert abs(loss.item() - _loop_infonce(v, a, 0.07)) < 1e-10


def test_mask_equals_filtered_batch():
    rng = np.random.default_rng(3)
    v, a = rng.normal(size=(6, 5)), rng.normal(size=(6, 5))
    mask = np.array([1, 0, 1, 1, 0, 1])
    keep = mask.astype(bool)
    masked = scl_block_loss(Tensor(v), Tensor(a), 0.2, mask)
    filtered = scl_block_loss(Tensor(v[keep]), Tensor(a[keep]), 0.2, np.ones(4))
    assert abs(masked.item() - filtered.item()) < 1e-12


def test_invariant_to_joint_permutation():
    rng = np.random.default_rng(4)
    v, a = rng.normal(size=(5, 4)), rng.normal(size=(5, 4))
    order = rng.permutation(5)
    base = scl_block_loss(Tensor(v), Tensor(a), 0.1, np.ones(5)).item()
    permuted = scl_block_loss(Tensor(v[order]), Tensor(a[order]), 0.1, np.ones(5)).item()
    assert abs(base - permuted) < 1e-12


def test_empty_mask_gives_constant_zero():
    v = Tensor(np.ones((3, 4)), requires_grad=True)
    with Tape():
        loss = scl_block_loss(v, v, 0.07, np.zeros(3))
    assert loss.item() == 0.0
    assert not loss.requires_grad


@pytest.mark.parametrize("tau", [0.0, -0.1])
def test_non_positive_temperature_is_rejected(tau):
    with pytest.raises(ConfigError):
        scl_block_loss(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))), tau, np.ones(2))


def test_contrastive_gradient_matches_finite_differences():
    rng = np.random.default_rng(5)
    v = Tensor(rng.normal(size=(4, 6)), requires_grad=True)
    a = Tensor(rng.normal(size=(4, 6)))
    mask = np.array([1, 1, 0, 1])
    assert fd_check(lambda x: scl_block_loss(x, a, 0.07, mask), v) < 1e-5


def test_confident_background_loss_vanishes():
    pred = _predictions([25.0], np.zeros((1, 8)))
    loss = fg_bg_loss(pred, [1], [-1], 8)
    assert 0.0 <= loss.item() < 1e-10


def test_uniform_foreground_logits_give_log_classes():
    pred = _predictions([0.3], np.zeros((1, 8)))
    loss = fg_bg_loss(pred, [0], [5], 8)
    assert abs(loss.item() - math.log(8)) < 1e-12


def test_literal_mode_ignores_bg_head_on_foreground():
    pred = _predictions([0.7, -1.2], np.random.default_rng(6).normal(size=(2, 4)))
    with Tape():
        loss = ops.mean(fg_bg_loss(pred, [0, 0], [1, 3], 4, mode="literal"))
    (g_bg,) = grad(loss, [pred.bg_logit])
    assert not g_bg.any()


def test_always_bg_mode_adds_bce_on_foreground():
    pred = _predictions([0.7], np.zeros((1, 4)))
    literal = fg_bg_loss(pred, [0], [2], 4, mode="literal").item()
    always = fg_bg_loss(pred, [0], [2], 4, mode="always_bg").item()
    bce = -math.log(1.0 - 1.0 / (1.0 + math.exp(-0.7)))
    assert abs(always - literal - bce) < 1e-12


def test_background_samples_carry_no_ce():
    pred = _predictions([0.0, 0.0], np.random.default_rng(7).normal(size=(2, 4)))
    with Tape():
        loss = ops.sum(fg_bg_loss(pred, [1, 1], [-1, -1], 4))
    (g_fg,) = grad(loss, [pred.fg_logits])
    assert not g_fg.any()
    assert abs(loss.item() - 2 * math.log(2)) < 1e-12


def test_fg_bg_loss_checks_labels():
    pred = _predictions([0.0, 0.0], np.zeros((2, 3)))
    with pytest.raises(ContractError):
        fg_bg_loss(pred, [0, 0], [0, 3], 3)
    with pytest.raises(ContractError):
        fg_bg_loss(pred, [0], [0], 3)
    with pytest.raises(ConfigError):
        fg_bg_loss(pred, [1, 1], [-1, -1], 3, mode="sometimes")


def test_contrastive_blocks(tiny_config):
    assert contrastive_blocks(tiny_config) == [1, 2]
    assert contrastive_blocks(tiny_config.with_overrides(blockwise=False)) == [2]
    assert contrastive_blocks(tiny_config.with_overrides(contrastive_weight=0.0)) == []
    assert contrastive_blocks(tiny_config.with_overrides(n_s=0)) == []


def test_all_background_batch_is_fully_gated(tiny_config, tiny_data):
    model = MavtModel(config=tiny_config)
    batch = sample_mismatch(tiny_data.train.subset(range(8)), 1.0, 0)
    assert batch.y_b.all()

    params = model.trainable_parameters()
    watched = [params["heads/fg_weight"], params["tokens/z_s/0"]]
    with Tape():
        pred, state_a, state_v = model.forward(batch)
        bundle = total_loss(pred, state_a, state_v, batch.y_b, batch.y_f, tiny_config)
        bce_only = ops.mean(fg_bg_loss(pred, batch.y_b, batch.y_f, tiny_config.n_classes))
    g_fg, g_s = grad(bundle.total, watched)
    _, g_s_bce = grad(bce_only, watched)

    assert bundle.loss_cnt_sum == 0.0
    assert block_loss_list(bundle, tiny_config.depth) == [0.0, 0.0]
    assert not g_fg.any()
    np.testing.assert_array_equal(g_s, g_s_bce)
    assert abs(bundle.total.item() - bce_only.item()) < 1e-15


def test_loss_bundle_stays_finite_for_large_token_values(tiny_config, tiny_data):
    config = tiny_config.with_overrides(bg_loss_mode="always_bg")
    model = MavtModel(config=config)
    rng = np.random.default_rng(8)
    params = model.trainable_parameters()
    for name, tensor in params.items():
        if name.startswith("tokens/"):
            tensor.data = rng.uniform(-1e3, 1e3, size=tensor.shape)
    batch = sample_mismatch(tiny_data.train.subset(range(8)), 0.5, 0)
    with Tape():
        bundle = model.loss(batch)
    assert bundle.is_finite()
    assert all(np.isfinite(g).all() for g in grad(bundle.total, list(params.values())))


def test_large_embeddings_and_logits_keep_losses_finite():
    rng = np.random.default_rng(9)
    v, a = rng.uniform(-1e3, 1e3, size=(6, 5)), rng.uniform(-1e3, 1e3, size=(6, 5))
    contrastive = scl_block_loss(Tensor(v), Tensor(a), 0.01, np.ones(6))
    assert np.isfinite(contrastive.item())
    pred = _predictions(rng.uniform(-1e3, 1e3, size=3), rng.uniform(-1e3, 1e3, size=(3, 4)))
    loss = fg_bg_loss(pred, [1, 0, 0], [-1, 1, 3], 4, mode="always_bg")
    assert np.isfinite(loss.data).all()


def test_all_foreground_total_is_compositional(tiny_config, tiny_data):
    config = tiny_config.with_overrides(block_weights=(1.0, 0.5), contrastive_weight=0.3)
    model = MavtModel(config=config)
    batch = tiny_data.train.subset(range(8))
    with Tape():
        pred, state_a, state_v = model.forward(batch)
        bundle = total_loss(pred, state_a, state_v, batch.y_b, batch.y_f, config)

    ce = fg_bg_loss(pred, batch.y_b, batch.y_f, config.n_classes).data.mean()
    blocks = [
        scl_block_loss(pool_shared(state_v, k), pool_shared(state_a, k), config.tau, np.ones(8))
        for k in (1, 2)
    ]
    expected = ce + 0.3 * (blocks[0].item() + 0.5 * blocks[1].item())
    assert abs(bundle.total.item() - expected) < 1e-12
    assert bundle.diagnostics["n_foreground"] == 8
    assert bundle.diagnostics["n_background"] == 0
    assert set(bundle.diagnostics) >= {"loss_total", "loss_bf", "loss_cnt_1", "loss_cnt_2"}
    assert bundle.is_finite()


def test_total_loss_needs_a_term(tiny_config, tiny_data):
    config = tiny_config.with_overrides(class_tokens=False, contrastive_weight=0.0)
    model = MavtModel(config=config)
    batch = tiny_data.train.subset(range(4))
    pred, state_a, state_v = model.forward(batch)
    assert pred is None
    with pytest.raises(ContractError):
        total_loss(pred, state_a, state_v, batch.y_b, batch.y_f, config)


def test_whole_model_gradient_matches_finite_differences(tiny_config, tiny_data):
    config = tiny_config.with_overrides(bg_loss_mode="always_bg")
    model = MavtModel(config=config)
    batch = sample_mismatch(tiny_data.train.subset(range(4)), 0.5, 0)
    z_s = model.trainable_parameters()["tokens/z_s/0"]
    with Tape():
        loss = model.loss(batch).total
    (analytic,) = grad(loss, [z_s])
    strongest = np.argsort(-np.abs(analytic).reshape(-1))[:6]
    assert fd_check(lambda _: model.loss(batch).total, z_s, indices=strongest) < 1e-4


def test_zero_heads_give_half_and_zero_logits(tiny_config, tiny_data):
    model = MavtModel(config=tiny_config)
    d, c = tiny_config.d, tiny_config.n_classes
    hidden = bg_hidden_width(d)
    zero = HeadParams(
        bg_hidden_weight=Tensor(np.zeros((2 * d, hidden))),
        bg_hidden_bias=Tensor(np.zeros(hidden)),
        bg_weight=Tensor(np.zeros((hidden, 1))),
        bg_bias=Tensor(np.zeros(1)),
        fg_weight=Tensor(np.zeros((2 * d, c))),
        fg_bias=Tensor(np.zeros(c)),
    )
    _, state_a, state_v = model.forward(tiny_data.train.subset(range(3)))
    pred = heads_forward(zero, state_a, state_v)
    np.testing.assert_array_equal(pred.p_bg.data, np.full(3, 0.5))
    np.testing.assert_array_equal(pred.fg_logits.data, np.zeros((3, c)))


def test_fg_head_splits_into_modality_halves(tiny_config, tiny_data):
    model = MavtModel(config=tiny_config)
    d = tiny_config.d
    _, state_a, state_v = model.forward(tiny_data.train.subset(range(3)))
    heads = model.heads
    visual = state_v.class_output("fg").data
    audio = state_a.class_output("fg").data

    np.testing.assert_allclose(
        unimodal_logits(heads, state_v).data,
        visual @ heads.fg_weight.data[:d] + heads.fg_bias.data,
        atol=1e-12,
    )
    np.testing.assert_allclose(
        unimodal_logits(heads, state_a).data,
        audio @ heads.fg_weight.data[d:] + heads.fg_bias.data,
        atol=1e-12,
    )
    joint = heads_forward(heads, state_a, state_v).fg_logits.data
    halves = visual @ heads.fg_weight.data[:d] + audio @ heads.fg_weight.data[d:]
    np.testing.assert_allclose(joint, halves + heads.fg_bias.data, atol=1e-12)


def test_bg_head_separates_mismatched_pairs(tiny_config):
    # Every (visual class, audio class) pairing of fixed class features; an
    # additive per-modality score cannot rank the diagonal apart from the rest.
    rng = np.random.default_rng(3)
    d, c = tiny_config.d, tiny_config.n_classes
    visual, audio = rng.normal(size=(c, d)), rng.normal(size=(c, d))
    pairs = [(i, j) for i in range(c) for j in range(c)]
    bg_in = Tensor(np.stack([np.concatenate([visual[i], audio[j]]) for i, j in pairs]))
    y_b = np.array([float(i != j) for i, j in pairs])

    heads = init_heads(tiny_config, seed=0)
    params = {
        "bg_hidden_weight": heads.bg_hidden_weight,
        "bg_hidden_bias": heads.bg_hidden_bias,
        "bg_weight": heads.bg_weight,
        "bg_bias": heads.bg_bias,
    }
    state = OptimState(lr=0.02)
    for _ in range(1000):
        with Tape():
            logit = bg_head_forward(heads, bg_in)
            log_p = ops.log_sigmoid(logit)
            log_not_p = ops.log_sigmoid(ops.scale(logit, -1.0))
            bce = ops.add(ops.mul(log_p, Tensor(y_b)), ops.mul(log_not_p, Tensor(1.0 - y_b)))
            loss = ops.scale(ops.mean(bce), -1.0)
        grads = grad(loss, list(params.values()))
        adam_step(state, params, dict(zip(params, grads)))

    predicted = (bg_head_forward(heads, bg_in).data > 0).astype(np.float64)
    accuracy = float(np.mean(predicted == y_b))
    assert accuracy > max(y_b.mean(), 1.0 - y_b.mean())
    assert accuracy == 1.0
