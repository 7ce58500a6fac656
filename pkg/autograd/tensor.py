import threading

import numpy as np

from utils.errors import ContractError, DimensionError

_local = threading.local()


def _stack():
    if not hasattr(_local, "tapes"):
        _local.tapes = []
    return _local.tapes


def active_tape():
    """Return the innermost recording tape of this thread, or None."""
    stack = _stack()
    return stack[-1] if stack else None


class Node:
    """One recorded primitive: its inputs, its output and the backward rule."""

    __slots__ = ("op", "inputs", "output", "backward")

    def __init__(self, op, inputs, output, backward):
        self.op = op
        self.inputs = inputs
        self.output = output
        self.backward = backward


class Tape:
    """Define-by-run record of primitive operations.

    Nodes are appended in execution order, which is a topological order of the
    traced graph. A tape is confined to the thread that entered it.

    Usage:
        with Tape():
            loss = ops.sum(ops.mul(x, x))
        backward(loss)
    """

    def __init__(self):
        self.nodes = []

    def __enter__(self):
        _stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _stack().pop()

    def __len__(self):
        return len(self.nodes)

    def record(self, op, inputs, output, backward):
        node = Node(op, inputs, output, backward)
        self.nodes.append(node)
        # pylint: disable=protected-access
        output._node = node
        output._tape = self
        return node


class no_grad:  # pylint: disable=invalid-name
    """Context manager that suspends recording on the current thread."""

    def __enter__(self):
        _stack().append(None)
        return self

    def __exit__(self, exc_type, exc, tb):
        _stack().pop()


class Tensor:
    """Dense row-major float64 array with optional gradient tape participation."""

    __array_priority__ = 100

    def __init__(self, data, requires_grad=False, name=None):
        array = np.array(data, dtype=np.float64)
        if any(size <= 0 for size in array.shape):
            raise DimensionError(f"Tensor dimensions must be positive, got {array.shape}")
        self.data = array
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.name = name
        self._node = None
        self._tape = None

    @classmethod
    def wrap(cls, array):
        """Wrap an ndarray without copying (result of a primitive)."""
        tensor = cls.__new__(cls)
        tensor.data = np.asarray(array, dtype=np.float64)
        tensor.requires_grad = False
        tensor.grad = None
        tensor.name = None
        tensor._node = None
        tensor._tape = None
        return tensor

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def is_leaf(self):
        return self._node is None

    def item(self):
        if self.data.size != 1:
            raise ContractError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self):
        return self.data.copy()

    def zero_grad(self):
        self.grad = None

    def accumulate_grad(self, grad):
        if not self.requires_grad:
            return
        if grad.shape != self.data.shape:
            raise DimensionError(
                f"gradient shape {grad.shape} does not match tensor shape {self.data.shape}"
            )
        self.grad = grad.copy() if self.grad is None else self.grad + grad

    def __repr__(self):
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"

    # Operator sugar; the primitives live in autograd.ops
    def __add__(self, other):
        from autograd import ops  # pylint: disable=import-outside-toplevel

        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from autograd import ops  # pylint: disable=import-outside-toplevel

        return ops.sub(self, other)

    def __mul__(self, other):
        from autograd import ops  # pylint: disable=import-outside-toplevel

        if np.isscalar(other):
            return ops.scale(self, float(other))
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        from autograd import ops  # pylint: disable=import-outside-toplevel

        return ops.scale(self, -1.0)

    def __matmul__(self, other):
        from autograd import ops  # pylint: disable=import-outside-toplevel

        return ops.matmul(self, other)


def _check_loss(loss):
    if loss.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss._tape is None:  # pylint: disable=protected-access
        raise ContractError("loss was not computed under a recording Tape")


def _propagate(loss, wanted=()):
    """Walk the loss's tape once in reverse order.

    Returns (leaf_grads, captured): leaf gradients keyed by id, and the
    gradients of any intermediate tensor whose id is in `wanted`.
    """
    grads = {id(loss): np.ones_like(loss.data)}
    leaf_grads = {}
    captured = {}
    wanted = set(wanted)
    # pylint: disable=protected-access
    for node in reversed(loss._tape.nodes):
        grad = grads.pop(id(node.output), None)
        if grad is None:
            continue
        if id(node.output) in wanted:
            captured[id(node.output)] = grad
        for tensor, input_grad in zip(node.inputs, node.backward(grad)):
            if input_grad is None or not tensor.requires_grad:
                continue
            key = id(tensor)
            if tensor._node is None:
                previous = leaf_grads.get(key)
                total = input_grad if previous is None else previous[1] + input_grad
                leaf_grads[key] = (tensor, total)
            else:
                grads[key] = input_grad if key not in grads else grads[key] + input_grad
    return leaf_grads, captured


def backward(loss):
    """Accumulate d(loss)/d(leaf) into every trainable leaf's grad."""
    _check_loss(loss)
    leaf_grads, _ = _propagate(loss)
    for tensor, grad in leaf_grads.values():
        tensor.accumulate_grad(grad)


def grad(loss, wrt):
    """Return d(loss)/d(t) for each t in wrt without touching any .grad buffer.

    Tensors in `wrt` may be leaves or intermediate results of the same tape;
    unreachable tensors get a zero gradient.
    """
    _check_loss(loss)
    leaf_grads, captured = _propagate(loss, wanted=[id(t) for t in wrt])
    results = []
    for tensor in wrt:
        if id(tensor) in captured:
            results.append(captured[id(tensor)].copy())
        elif id(tensor) in leaf_grads:
            results.append(leaf_grads[id(tensor)][1].copy())
        else:
            results.append(np.zeros_like(tensor.data))
    return results
