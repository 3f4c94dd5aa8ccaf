"""Adaptive-moment gradient descent (bias-corrected first/second moments).

State is kept per parameter, including the step count: task heads are
only updated on batches containing their task, and a shared global step
would mis-scale the bias correction of a head's first update.
"""

import numpy as np

from .errors import DimensionError, UsageError


class Adam:
    """Optimizer over a fixed list of parameter tensors.

    step(subset) applies one update to the given parameters (default:
    all registered ones) using their .grad, then clears those grads.
    Updates are deterministic functions of (state, grads).
    """

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self._slots = {
            id(p): [np.zeros_like(p.data), np.zeros_like(p.data), 0]
            for p in self.params
        }

    def step(self, params=None):
        for p in self.params if params is None else params:
            slot = self._slots.get(id(p))
            if slot is None:
                raise UsageError("parameter was not registered with this optimizer")
            grad = p.grad if p.grad is not None else np.zeros_like(p.data)
            if grad.shape != p.data.shape:
                raise DimensionError(
                    f"gradient shape {grad.shape} != parameter shape {p.data.shape}"
                )
            m, v, t = slot
            t += 1
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad
            m_hat = m / (1.0 - self.beta1 ** t)
            v_hat = v / (1.0 - self.beta2 ** t)
            p.data = p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
            slot[2] = t
            p.grad = None


def zero_grads(params):
    for p in params:
        p.grad = None
