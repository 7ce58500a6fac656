import numpy as np

from autograd.configs import EPS, GELU_COEF
from autograd.tensor import Tensor, active_tape
from utils.errors import DimensionError

# Primitive operations. Each computes its forward value with numpy and, when a
# tape is recording and an input requires grad, records a backward rule that
# maps the output gradient to one gradient (or None) per input. Rules skip
# the work for inputs that do not require grad, such as frozen weights.


def as_tensor(value):
    if isinstance(value, Tensor):
        return value
    return Tensor.wrap(value)


def _wants(t):
    return t.requires_grad


def _emit(op, array, inputs, backward):
    out = Tensor.wrap(array)
    tape = active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        tape.record(op, inputs, out, backward)
    return out


def _reduce_to(grad, shape):
    """Sum a gradient over the leading dimensions that were broadcast."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_suffix(op, a, b):
    """Only leading-dimension broadcasting is allowed for elementwise ops."""
    short, long_ = (a, b) if a.ndim <= b.ndim else (b, a)
    if long_.shape[long_.ndim - short.ndim :] != short.shape:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} do not agree")


def _norm_axis(axis, ndim):
    if not -ndim <= axis < ndim:
        raise DimensionError(f"axis {axis} out of range for rank {ndim}")
    return axis % ndim


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_suffix("add", a, b)

    def backward(g):
        return (
            _reduce_to(g, a.shape) if _wants(a) else None,
            _reduce_to(g, b.shape) if _wants(b) else None,
        )

    return _emit("add", a.data + b.data, (a, b), backward)


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_suffix("sub", a, b)

    def backward(g):
        return (
            _reduce_to(g, a.shape) if _wants(a) else None,
            -_reduce_to(g, b.shape) if _wants(b) else None,
        )

    return _emit("sub", a.data - b.data, (a, b), backward)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_suffix("mul", a, b)

    def backward(g):
        return (
            _reduce_to(g * b.data, a.shape) if _wants(a) else None,
            _reduce_to(g * a.data, b.shape) if _wants(b) else None,
        )

    return _emit("mul", a.data * b.data, (a, b), backward)


def scale(x, factor):
    x = as_tensor(x)
    factor = float(factor)

    def backward(g):
        return (g * factor,)

    return _emit("scale", x.data * factor, (x,), backward)


def matmul(a, b):
    """Batched matrix product over the last two axes."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul: shapes {a.shape} and {b.shape} do not agree")
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError as e:
        raise DimensionError(f"matmul: shapes {a.shape} and {b.shape} do not agree") from e

    def backward(g):
        grad_a = grad_b = None
        if _wants(a):
            grad_a = _reduce_to(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape)
        if _wants(b):
            grad_b = _reduce_to(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape)
        return grad_a, grad_b

    return _emit("matmul", np.matmul(a.data, b.data), (a, b), backward)


def softmax(x, axis=-1):
    x = as_tensor(x)
    axis = _norm_axis(axis, x.ndim)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    exps = np.exp(shifted)
    y = exps / exps.sum(axis=axis, keepdims=True)

    def backward(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return _emit("softmax", y, (x,), backward)


def log_softmax(x, axis=-1):
    x = as_tensor(x)
    axis = _norm_axis(axis, x.ndim)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    y = shifted - log_norm

    def backward(g):
        return (g - np.exp(y) * g.sum(axis=axis, keepdims=True),)

    return _emit("log_softmax", y, (x,), backward)


def layernorm(x, gain, bias, eps=EPS):
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    width = x.shape[-1]
    if gain.shape != (width,) or bias.shape != (width,):
        raise DimensionError(
            f"layernorm: input {x.shape} vs gain {gain.shape} / bias {bias.shape}"
        )
    centered = x.data - x.data.mean(axis=-1, keepdims=True)
    rstd = 1.0 / np.sqrt((centered * centered).mean(axis=-1, keepdims=True) + eps)
    xhat = centered * rstd

    def backward(g):
        gx = g * gain.data
        grad_x = rstd * (
            gx
            - gx.mean(axis=-1, keepdims=True)
            - xhat * (gx * xhat).mean(axis=-1, keepdims=True)
        )
        grad_gain = _reduce_to(g * xhat, gain.shape) if _wants(gain) else None
        grad_bias = _reduce_to(g, bias.shape) if _wants(bias) else None
        return grad_x, grad_gain, grad_bias

    return _emit("layernorm", xhat * gain.data + bias.data, (x, gain, bias), backward)


def gelu(x):
    """GELU, tanh approximation."""
    x = as_tensor(x)
    c = np.sqrt(2.0 / np.pi)
    square = x.data * x.data
    t = np.tanh(c * x.data * (1.0 + GELU_COEF * square))
    half_x = 0.5 * x.data

    def backward(g):
        d_inner = c * (1.0 + 3.0 * GELU_COEF * square)
        return (g * (0.5 * (1.0 + t) + half_x * (1.0 - t * t) * d_inner),)

    return _emit("gelu", half_x * (1.0 + t), (x,), backward)


def sigmoid(x):
    x = as_tensor(x)
    y = 0.5 * (1.0 + np.tanh(0.5 * x.data))

    def backward(g):
        return (g * y * (1.0 - y),)

    return _emit("sigmoid", y, (x,), backward)


def log_sigmoid(x):
    """log(sigmoid(x)), finite for any finite x."""
    x = as_tensor(x)

    def backward(g):
        return (g * 0.5 * (1.0 - np.tanh(0.5 * x.data)),)

    return _emit("log_sigmoid", -np.logaddexp(0.0, -x.data), (x,), backward)


def exp(x):
    x = as_tensor(x)
    y = np.exp(x.data)

    def backward(g):
        return (g * y,)

    return _emit("exp", y, (x,), backward)


def log(x):
    x = as_tensor(x)

    def backward(g):
        return (g / x.data,)

    return _emit("log", np.log(x.data), (x,), backward)


def _restore_axes(g, shape, axis, keepdims):
    if axis is None:
        return np.broadcast_to(g, shape)
    if not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)


def sum(x, axis=None, keepdims=False):  # pylint: disable=redefined-builtin
    x = as_tensor(x)
    if axis is not None:
        axis = _norm_axis(axis, x.ndim)

    def backward(g):
        return (np.array(_restore_axes(g, x.shape, axis, keepdims)),)

    return _emit("sum", np.asarray(x.data.sum(axis=axis, keepdims=keepdims)), (x,), backward)


def mean(x, axis=None, keepdims=False):
    x = as_tensor(x)
    if axis is not None:
        axis = _norm_axis(axis, x.ndim)
    count = x.size if axis is None else x.shape[axis]

    def backward(g):
        return (np.array(_restore_axes(g, x.shape, axis, keepdims)) / count,)

    return _emit(
        "mean", np.asarray(x.data.mean(axis=axis, keepdims=keepdims)), (x,), backward
    )


def concat(tensors, axis=0):
    """Concatenate along `axis`; every other dimension must agree."""
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise DimensionError("concat needs at least one tensor")
    axis = _norm_axis(axis, tensors[0].ndim)
    reference = tensors[0].shape
    for t in tensors[1:]:
        if t.ndim != len(reference) or any(
            t.shape[i] != reference[i] for i in range(len(reference)) if i != axis
        ):
            raise DimensionError(f"concat: shapes {reference} and {t.shape} do not agree")
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        parts = np.split(g, bounds, axis=axis)
        return tuple(part if _wants(t) else None for part, t in zip(parts, tensors))

    return _emit(
        "concat", np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), backward
    )


def slice_axis(x, start, stop, axis=0):
    """Rows [start, stop) of `axis`; the inverse of concat."""
    x = as_tensor(x)
    axis = _norm_axis(axis, x.ndim)
    if not 0 <= start < stop <= x.shape[axis]:
        raise DimensionError(f"slice [{start}, {stop}) out of range for shape {x.shape}")
    index = [slice(None)] * x.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)

    def backward(g):
        full = np.zeros_like(x.data)
        full[index] = g
        return (full,)

    return _emit("slice", x.data[index].copy(), (x,), backward)


def take_rows(x, indices):
    """Gather rows of the first axis."""
    x = as_tensor(x)
    indices = np.asarray(indices, dtype=np.int64)

    def backward(g):
        full = np.zeros_like(x.data)
        np.add.at(full, indices, g)
        return (full,)

    return _emit("take_rows", x.data[indices], (x,), backward)


def transpose(x, axes=None):
    """Permute axes; the default swaps the last two."""
    x = as_tensor(x)
    if axes is None:
        if x.ndim < 2:
            raise DimensionError(f"transpose needs rank >= 2, got {x.shape}")
        axes = list(range(x.ndim - 2)) + [x.ndim - 1, x.ndim - 2]
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))

    def backward(g):
        return (np.transpose(g, inverse),)

    return _emit("transpose", np.transpose(x.data, axes).copy(), (x,), backward)


def reshape(x, shape):
    x = as_tensor(x)
    shape = tuple(shape)
    if int(np.prod(shape)) != x.size:
        raise DimensionError(f"cannot reshape {x.shape} to {shape}")

    def backward(g):
        return (g.reshape(x.shape),)

    return _emit("reshape", x.data.reshape(shape).copy(), (x,), backward)


def expand(x, count):
    """Repeat `x` along a new leading axis of length `count`."""
    x = as_tensor(x)

    def backward(g):
        return (g.sum(axis=0),)

    return _emit("expand", np.broadcast_to(x.data, (count,) + x.shape).copy(), (x,), backward)


def l2_normalize(x, eps=EPS):
    """x / max(||x||, eps) along the last axis."""
    x = as_tensor(x)
    norm = np.sqrt((x.data**2).sum(axis=-1, keepdims=True))
    denom = np.maximum(norm, eps)
    y = x.data / denom
    active = norm > eps

    def backward(g):
        projected = g - y * (g * y).sum(axis=-1, keepdims=True)
        return (np.where(active, projected, g) / denom,)

    return _emit("l2_normalize", y, (x,), backward)


def cosine_sim(u, v, eps=EPS):
    """u.v / max(||u|| ||v||, eps) along the last axis."""
    u, v = as_tensor(u), as_tensor(v)
    if u.shape != v.shape:
        raise DimensionError(f"cosine_sim: shapes {u.shape} and {v.shape} do not agree")
    dot = (u.data * v.data).sum(axis=-1)
    nu2 = (u.data**2).sum(axis=-1)
    nv2 = (v.data**2).sum(axis=-1)
    prod = np.sqrt(nu2 * nv2)
    denom = np.maximum(prod, eps)
    sim = dot / denom
    active = prod > eps

    def backward(g):
        g = np.expand_dims(g, -1)
        d = np.expand_dims(denom, -1)
        s = np.expand_dims(sim, -1)
        on = np.expand_dims(active, -1)
        safe_nu2 = np.expand_dims(np.where(active, nu2, 1.0), -1)
        safe_nv2 = np.expand_dims(np.where(active, nv2, 1.0), -1)
        grad_u = np.where(on, v.data / d - s * u.data / safe_nu2, v.data / d)
        grad_v = np.where(on, u.data / d - s * v.data / safe_nv2, u.data / d)
        return g * grad_u, g * grad_v

    return _emit("cosine_sim", np.asarray(sim), (u, v), backward)
