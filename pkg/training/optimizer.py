from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from utils.errors import ContractError


@dataclass
class OptimState:
    """Adam moment buffers keyed by parameter name, plus the step counter."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def from_config(cls, config):
        return cls(lr=config.lr, beta1=config.beta1, beta2=config.beta2, eps=config.adam_eps)

    def named_arrays(self):
        """Checkpoint view: optim/m/<name>, optim/v/<name> and optim/step."""
        named = {f"optim/m/{name}": array for name, array in self.m.items()}
        named.update({f"optim/v/{name}": array for name, array in self.v.items()})
        named["optim/step"] = np.array([float(self.step)])
        return named

    def restore(self, arrays, params):
        """Load buffers written by named_arrays for the given parameters."""
        step = arrays.get("optim/step")
        self.step = int(step[0]) if step is not None else 0
        for name, param in params.items():
            m, v = arrays.get(f"optim/m/{name}"), arrays.get(f"optim/v/{name}")
            if m is None or v is None:
                continue
            if m.shape != param.shape or v.shape != param.shape:
                raise ContractError(f"moment buffers of '{name}' do not match {param.shape}")
            self.m[name], self.v[name] = m.copy(), v.copy()
        return self


def lr_at(epoch, config):
    """Step decay: lr * decay ** floor(epoch / step)."""
    if epoch < 0:
        raise ContractError(f"epoch must be non-negative, got {epoch}")
    return config.lr * config.lr_decay ** (epoch // config.lr_step)


def adam_step(state: OptimState, params, grads=None):
    """One bias-corrected Adam update over named trainable tensors.

    Gradients are read from `grads` (name -> array) when given, else from each
    tensor's .grad. Parameters are replaced by new arrays, never edited in place.
    """
    missing = []
    for name, param in params.items():
        grad = grads.get(name) if grads is not None else param.grad
        if grad is None:
            missing.append(name)
    if missing:
        raise ContractError(f"no gradient for trainable tensors: {', '.join(missing)}")

    state.step += 1
    correction1 = 1.0 - state.beta1**state.step
    correction2 = 1.0 - state.beta2**state.step
    for name, param in params.items():
        if not param.requires_grad:
            raise ContractError(f"'{name}' is frozen and cannot be optimised")
        grad = grads[name] if grads is not None else param.grad
        m = state.m.get(name, np.zeros_like(param.data))
        v = state.v.get(name, np.zeros_like(param.data))
        m = state.beta1 * m + (1.0 - state.beta1) * grad
        v = state.beta2 * v + (1.0 - state.beta2) * grad * grad
        state.m[name], state.v[name] = m, v

        m_hat = m / correction1
        v_hat = v / correction2
        param.data = param.data - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params
