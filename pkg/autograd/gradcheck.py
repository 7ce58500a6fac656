import numpy as np

from autograd import ops
from autograd.configs import FD_FLOOR, FD_STEP
from autograd.tensor import Tape, Tensor, grad, no_grad
from utils.errors import ContractError
from utils.model_commons import make_rng


def _value(f, x):
    with no_grad():
        return f(x).item()


def fd_check(f, x: Tensor, h=FD_STEP, indices=None, floor=FD_FLOOR) -> float:
    """Compare backward() against central differences, element by element.

    :param f: pure function mapping the tensor (and anything it closes over)
        to a scalar Tensor.
    :param x: trainable tensor; its data is perturbed in place and restored.
    :param h: central-difference step.
    :param indices: optional flat indices to check; all elements by default.
    :param floor: lower bound of the relative-error denominator.
    :return: max over the checked elements of
        |analytic - numeric| / max(|analytic|, |numeric|, floor).
    """
    if not x.requires_grad:
        raise ContractError("fd_check needs a tensor with requires_grad=True")

    with Tape():
        loss = f(x)
    (analytic,) = grad(loss, [x])

    if indices is None:
        indices = range(x.size)

    worst = 0.0
    for flat_index in indices:
        position = np.unravel_index(int(flat_index), x.shape)
        original = x.data[position]
        x.data[position] = original + h
        f_plus = _value(f, x)
        x.data[position] = original - h
        f_minus = _value(f, x)
        x.data[position] = original

        numeric = (f_plus - f_minus) / (2.0 * h)
        exact = analytic[position]
        denom = max(abs(exact), abs(numeric), floor)
        worst = max(worst, abs(exact - numeric) / denom)
    return worst


def _uniform(rng, shape, low=-2.0, high=2.0):
    return rng.uniform(low, high, size=shape)


def _weighted_sum(out, weights):
    return ops.sum(ops.mul(out, Tensor(weights)))


# pylint: disable=too-many-locals
def primitive_cases(seed=0):
    """Build (name, f, x) triples covering every primitive on random inputs.

    Each f is a random linear read-out of the primitive's output so every
    output element contributes to the checked gradient.
    """
    rng = make_rng(seed, 7)
    cases = []

    def add_case(name, shape, build, low=-2.0, high=2.0):
        x = Tensor(_uniform(rng, shape, low, high), requires_grad=True)
        out_shape = build(Tensor(x.data)).shape
        weights = _uniform(rng, out_shape, -1.0, 1.0)
        cases.append((name, lambda t, b=build, w=weights: _weighted_sum(b(t), w), x))

    other = Tensor(_uniform(rng, (4, 2)))
    add_case("matmul", (3, 4), lambda t: ops.matmul(t, other))
    addend = Tensor(_uniform(rng, (4,)))
    add_case("add", (3, 4), lambda t: ops.add(t, addend))
    factor = Tensor(_uniform(rng, (3, 4)))
    add_case("mul", (3, 4), lambda t: ops.mul(t, factor))
    add_case("scale", (3, 4), lambda t: ops.scale(t, -1.5))
    add_case("softmax", (3, 4), lambda t: ops.softmax(t, axis=-1))
    add_case("log_softmax", (3, 4), lambda t: ops.log_softmax(t, axis=0))
    gain = Tensor(_uniform(rng, (4,)))
    bias = Tensor(_uniform(rng, (4,)))
    add_case("layernorm", (3, 4), lambda t: ops.layernorm(t, gain, bias))
    add_case("gelu", (3, 4), ops.gelu)
    add_case("sigmoid", (3, 4), ops.sigmoid)
    add_case("log_sigmoid", (3, 4), ops.log_sigmoid)
    add_case("exp", (3, 4), ops.exp)
    add_case("log", (3, 4), ops.log, low=0.5, high=2.0)
    add_case("mean", (3, 4), lambda t: ops.mean(t, axis=0))
    tail = Tensor(_uniform(rng, (2, 4)))
    add_case("concat", (3, 4), lambda t: ops.concat([t, tail], axis=0))
    add_case("slice", (3, 4), lambda t: ops.slice_axis(t, 1, 3, axis=1))
    add_case("transpose", (2, 3, 4), lambda t: ops.transpose(t, (2, 0, 1)))
    add_case("reshape", (3, 4), lambda t: ops.reshape(t, (2, 6)))
    add_case("expand", (3, 4), lambda t: ops.expand(t, 2))
    add_case("take_rows", (3, 4), lambda t: ops.take_rows(t, [2, 0, 2]))
    add_case("l2_normalize", (3, 4), ops.l2_normalize)
    partner = Tensor(_uniform(rng, (3, 4)))
    add_case("cosine_sim", (3, 4), lambda t: ops.cosine_sim(t, partner))
    return cases


def check_primitives(seed=0, h=FD_STEP):
    """Run fd_check on every primitive; returns {name: max relative error}."""
    return {name: fd_check(f, x, h=h) for name, f, x in primitive_cases(seed)}
