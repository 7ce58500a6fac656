import dataclasses

import numpy as np
import pytest

from autograd import ops
from autograd.tensor import Tape, Tensor, grad
from configs import RunConfig
from models.mavt.attention import multi_head_attention
from models.mavt.backbone import frozen_count_closed_form, init_backbone, patchify_audio
from models.mavt.model import MavtModel
from models.mavt.tokens import (
    StreamState,
    assemble_stream,
    encode_pair,
    encode_stream,
    head_param_count,
    init_token_bank,
    lsa_forward,
    pool_shared,
    stream_layout,
    trainable_count_closed_form,
    unimodal_forward,
)
from utils.errors import ContractError, DimensionError


def _silence_lsa(bank):
    for name, params in bank.lsa.items():
        d = params.width
        bank.lsa[name] = dataclasses.replace(
            params, wo=Tensor(np.zeros((d, d))), bo=Tensor(np.zeros(d))
        )
    return bank


def _patches(rng, count, d, batch=None):
    shape = (count, d) if batch is None else (batch, count, d)
    return Tensor(rng.normal(size=shape))


def test_desk_stream_lengths():
    config = RunConfig.build({"depth": 1})
    bank = init_token_bank(config, 0)
    patches = Tensor(np.zeros((12, config.d)))
    assert assemble_stream("a", bank, patches, config).shape == (24, config.d)

    plain = config.with_overrides(class_tokens=False)
    bank = init_token_bank(plain, 0)
    assert assemble_stream("a", bank, patches, plain).shape == (22, config.d)


def test_layout_offsets_follow_slice_order(tiny_config):
    offsets = stream_layout(tiny_config, n_patches=4)
    assert offsets == {
        "bg": (0, 1),
        "unimodal": (1, 3),
        "patches": (3, 7),
        "shared": (7, 9),
        "fg": (9, 10),
    }
    unimodal = stream_layout(tiny_config, n_patches=4, include_shared=False)
    assert "shared" not in unimodal and unimodal["fg"] == (7, 8)


def test_silenced_lsa_is_identity(tiny_config):
    bank = init_token_bank(tiny_config, 0)
    params = bank.lsa["a"]
    silenced = dataclasses.replace(
        params, wo=Tensor(np.zeros((8, 8))), bo=Tensor(np.zeros(8))
    )
    x = Tensor(np.random.default_rng(0).normal(size=(3, 8)))
    np.testing.assert_array_equal(lsa_forward(silenced, x, 2).data, x.data)


def test_lsa_single_token(tiny_config):
    params = init_token_bank(tiny_config, 0).lsa["s"]
    x = np.random.default_rng(1).normal(size=(1, 8))
    out = lsa_forward(params, Tensor(x), 2).data
    expected = x + (x @ params.wv.data + params.bv.data) @ params.wo.data + params.bo.data
    np.testing.assert_allclose(out, expected, atol=1e-12)


def test_lsa_matches_unrolled_single_head(tiny_config):
    params = init_token_bank(tiny_config, 2).lsa["v"]
    x = np.random.default_rng(2).normal(size=(3, 8))
    out = lsa_forward(params, Tensor(x), heads=1).data
    q = x @ params.wq.data + params.bq.data
    k = x @ params.wk.data + params.bk.data
    v = x @ params.wv.data + params.bv.data
    expected = np.array(x)
    for i in range(3):
        scores = np.array([q[i] @ k[j] for j in range(3)]) / np.sqrt(8)
        weights = np.exp(scores - scores.max())
        weights /= weights.sum()
        context = sum(weights[j] * v[j] for j in range(3))
        expected[i] += context @ params.wo.data + params.bo.data
    np.testing.assert_allclose(out, expected, atol=1e-10)


def test_lsa_rejects_wrong_width(tiny_config):
    params = init_token_bank(tiny_config, 0).lsa["a"]
    with pytest.raises(DimensionError):
        lsa_forward(params, Tensor(np.ones((2, 6))), 2)
    with pytest.raises(DimensionError):
        multi_head_attention(params, Tensor(np.ones((2, 8))), 3)


def test_silenced_lsa_slices_recover_tokens(tiny_config):
    bank = _silence_lsa(init_token_bank(tiny_config, 0))
    patches = _patches(np.random.default_rng(3), 4, 8)
    stream = assemble_stream("v", bank, patches, tiny_config)
    offsets = stream_layout(tiny_config, 4, modality="v")

    def rows(name):
        start, stop = offsets[name]
        return stream.data[start:stop]

    np.testing.assert_array_equal(rows("unimodal"), bank.bag("v").data)
    np.testing.assert_array_equal(rows("shared"), bank.bag("s").data)
    np.testing.assert_array_equal(rows("patches"), patches.data)
    np.testing.assert_array_equal(rows("bg"), bank.bg["v"].data)
    np.testing.assert_array_equal(rows("fg"), bank.fg["v"].data)


def test_batched_assembly_broadcasts_tokens(tiny_config):
    bank = init_token_bank(tiny_config, 0)
    patches = _patches(np.random.default_rng(4), 4, 8, batch=3)
    stream = assemble_stream("a", bank, patches, tiny_config)
    assert stream.shape == (3, 10, 8)
    np.testing.assert_array_equal(stream.data[0, :3], stream.data[2, :3])


def test_identical_inputs_give_identical_states(tiny_config):
    bank = init_token_bank(tiny_config, 0)
    bank.prompts["v"] = bank.prompts["a"]
    bank.lsa["v"] = bank.lsa["a"]
    backbone = init_backbone(tiny_config, 0)
    patches = _patches(np.random.default_rng(5), 4, 8, batch=2)
    state_a, state_v = encode_pair(bank, backbone, patches, patches, tiny_config)
    assert state_a.depth == state_v.depth == tiny_config.depth
    for e_a, e_v in zip(state_a.embeddings, state_v.embeddings):
        np.testing.assert_array_equal(e_a.data, e_v.data)


def test_audio_tokens_never_reach_the_visual_stream(tiny_config):
    bank = init_token_bank(tiny_config, 0)
    backbone = init_backbone(tiny_config, 0)
    rng = np.random.default_rng(6)
    with Tape():
        _, state_v = encode_pair(
            bank, backbone, _patches(rng, 4, 8, 2), _patches(rng, 4, 8, 2), tiny_config
        )
        loss = ops.sum(state_v.embeddings[-1])
    g_a, g_s, g_b = grad(loss, [bank.bag("a"), bank.bag("s"), bank.bg["v"]])
    assert not g_a.any()
    assert np.abs(g_s).max() > 0
    assert np.abs(g_b).max() > 0


def test_shared_tokens_sum_both_stream_gradients(tiny_config):
    bank = init_token_bank(tiny_config, 0)
    backbone = init_backbone(tiny_config, 0)
    rng = np.random.default_rng(7)
    p_a, p_v = _patches(rng, 4, 8, 2), _patches(rng, 4, 8, 2)
    weights_a = rng.normal(size=(2, 10, 8))
    weights_v = rng.normal(size=(2, 10, 8))

    def scalar(state, weights):
        return ops.sum(ops.mul(state.embeddings[-1], Tensor(weights)))

    shared = [bank.bag("s"), bank.bg["a"], bank.fg["a"]]
    with Tape():
        state_a, state_v = encode_pair(bank, backbone, p_a, p_v, tiny_config)
        joint = ops.add(scalar(state_a, weights_a), scalar(state_v, weights_v))
    joint_grads = grad(joint, shared)

    with Tape():
        only_a = scalar(encode_stream("a", bank, backbone, p_a, tiny_config), weights_a)
    with Tape():
        only_v = scalar(encode_stream("v", bank, backbone, p_v, tiny_config), weights_v)
    for together, from_a, from_v in zip(joint_grads, grad(only_a, shared), grad(only_v, shared)):
        np.testing.assert_allclose(together, from_a + from_v, atol=1e-12)


def test_shared_class_tokens_are_one_object(tiny_config):
    bank = init_token_bank(tiny_config, 0)
    assert bank.bg["a"] is bank.bg["v"] and bank.fg["a"] is bank.fg["v"]
    assert "tokens/z_b" in bank.named_tensors()

    split = init_token_bank(tiny_config.with_overrides(share_class_tokens=False), 0)
    assert split.bg["a"] is not split.bg["v"]
    assert {"tokens/z_b/a", "tokens/z_b/v"} <= set(split.named_tensors())


def test_offsets_constant_across_blocks(tiny_config):
    bank = init_token_bank(tiny_config, 0)
    backbone = init_backbone(tiny_config, 0)
    patches = _patches(np.random.default_rng(8), 4, 8)
    state = encode_stream("a", bank, backbone, patches, tiny_config)
    for k in range(tiny_config.depth + 1):
        assert state.block_slice("shared", k).shape == (tiny_config.n_s, 8)


def _state(rows):
    embeddings = [Tensor(np.zeros_like(rows)), Tensor(rows)]
    return StreamState("v", embeddings, {"shared": (0, rows.shape[-2])})


def test_pool_shared_examples():
    u = np.array([0.3, -1.0, 2.0])
    np.testing.assert_array_equal(pool_shared(_state(np.stack([u, u, u])), 1).data, u)
    pooled = pool_shared(_state(np.array([[1.0, 0.0], [0.0, 1.0]])), 1)
    np.testing.assert_array_equal(pooled.data, [0.5, 0.5])


def test_pool_shared_matches_loop_mean():
    rows = np.random.default_rng(9).normal(size=(4, 5, 3))
    pooled = pool_shared(_state(rows), 1).data
    for b in range(4):
        expected = [sum(rows[b, i, j] for i in range(5)) / 5 for j in range(3)]
        np.testing.assert_allclose(pooled[b], expected, atol=1e-12)


def test_pool_shared_rejects_out_of_range_block():
    state = _state(np.ones((2, 3)))
    for k in (0, 2):
        with pytest.raises(ContractError):
            pool_shared(state, k)


def test_unimodal_stream_has_no_shared_tokens():
    config = RunConfig.build({"depth": 1})
    bank = init_token_bank(config, 0)
    backbone = init_backbone(config, 0)
    patches = patchify_audio(np.zeros((24, 32)), backbone, config)
    with Tape():
        state = unimodal_forward("a", bank, backbone, patches, config)
        loss = ops.sum(state.class_output("fg"))
    assert state.embeddings[0].shape == (19, config.d)
    assert "shared" not in state.offsets
    g_v, g_s = grad(loss, [bank.bag("v"), bank.bag("s")])
    assert not g_v.any() and not g_s.any()


def test_deep_prompts_use_fresh_tokens_per_block(tiny_config):
    config = tiny_config.with_overrides(deep_prompts=True)
    bank = init_token_bank(config, 0)
    assert len(bank.prompts["s"]) == config.depth
    backbone = init_backbone(config, 0)
    patches = _patches(np.random.default_rng(10), 4, 8)
    with Tape():
        state = encode_stream("v", bank, backbone, patches, config)
        loss = ops.sum(pool_shared(state, config.depth))
    g_first, g_last = grad(loss, bank.prompts["s"])
    assert np.abs(g_last).max() > 0
    assert np.abs(g_first).max() > 0
    assert not np.allclose(g_first, g_last)


CLOSED_FORM_CASES = [
    {},
    {"class_tokens": False},
    {"use_lsa": False},
    {"share_class_tokens": False},
    {"deep_prompts": True},
    {"n_a": 0, "n_s": 0},
    {"n_v": 3, "n_classes": 6, "d": 12, "heads": 3},
]


@pytest.mark.parametrize("overrides", CLOSED_FORM_CASES)
def test_trainable_count_matches_closed_form(tiny_config, overrides):
    config = tiny_config.with_overrides(**overrides)
    model = MavtModel(config=config)
    trainable, frozen = model.parameter_counts()
    assert trainable == trainable_count_closed_form(config)
    assert frozen == frozen_count_closed_form(config)
    assert all(t.requires_grad for t in model.trainable_parameters().values())
    assert not any(t.requires_grad for t in model.frozen_parameters().values())


def test_class_token_parameters(tiny_config):
    on = trainable_count_closed_form(tiny_config)
    off = trainable_count_closed_form(tiny_config.with_overrides(class_tokens=False))
    d, c = tiny_config.d, tiny_config.n_classes
    assert on - off == 2 * d + head_param_count(d, c)


def test_frozen_count_ignores_token_settings(tiny_config):
    base = MavtModel(config=tiny_config).parameter_counts()[1]
    tokens_off = tiny_config.with_overrides(n_a=0, n_v=0, use_lsa=False)
    assert MavtModel(config=tokens_off).parameter_counts()[1] == base
    separate = tiny_config.with_overrides(separate_backbones=True)
    assert MavtModel(config=separate).parameter_counts()[1] == 2 * base
