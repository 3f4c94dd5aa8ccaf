"""Reverse-mode automatic differentiation over float64 numpy arrays.

A Tensor wraps one array plus the closure that routes gradients to its
parents; calling backward() on a scalar loss topologically sorts the
graph and accumulates exact gradients into every reachable leaf.  Only
the operations the models in this package need exist: broadcast add,
elementwise multiply, scalar scaling, a fused linear map, ReLU, causal
1-D convolution, last-timestep slicing, reshape and MSE.

Convolution ops take batched (B, C, T) arrays; the thin per-sample API
lives in reprogait.layers.  Every op is pure: inputs are never mutated.
"""

import numpy as np

from . import backend
from .errors import DimensionError, UsageError


class Tensor:
    """Node in the computation graph: value, gradient slot, parent links."""

    __slots__ = ("data", "grad", "_parents", "_backward")

    def __init__(self, data, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self):
        """Seed d(self)/d(self) = 1 and back-propagate through the graph."""
        if self.data.shape != ():
            raise UsageError(
                f"backward requires a scalar loss, got shape {self.data.shape}"
            )
        order = _toposort(self)
        self._accumulate(np.ones_like(self.data))
        for node in reversed(order):
            if node._backward is not None:
                node._backward(node.grad)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"


def _toposort(root):
    order, visited, stack = [], set(), [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(loss):
    """Spec-level entry point: populate .grad on every participating tensor."""
    loss.backward()


def as_tensor(value):
    return value if isinstance(value, Tensor) else Tensor(value)


def _unbroadcast(grad, shape):
    """Sum a broadcast gradient back down to the original operand shape."""
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data + b.data, (a, b))

    def _bw(g):
        a._accumulate(_unbroadcast(g, a.data.shape))
        b._accumulate(_unbroadcast(g, b.data.shape))

    out._backward = _bw
    return out


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data * b.data, (a, b))

    def _bw(g):
        a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    out._backward = _bw
    return out


def scale(a, s):
    """Multiply by a python float (no gradient w.r.t. the scalar)."""
    s = float(s)
    out = Tensor(a.data * s, (a,))

    def _bw(g):
        a._accumulate(g * s)

    out._backward = _bw
    return out


def sub(a, b):
    return add(a, scale(as_tensor(b), -1.0))


def relu(a):
    out = Tensor(np.maximum(a.data, 0.0), (a,))
    mask = a.data > 0.0  # subgradient at exactly 0 is 0

    def _bw(g):
        a._accumulate(g * mask)

    out._backward = _bw
    return out


def linear(x, w, b):
    """y = x @ w.T + b with x (B, F), w (O, F), b (O,) -> (B, O).

    einsum is kept un-optimized so each output element reduces over F in
    a fixed order, making batched results equal batch-of-one results.
    """
    if x.data.ndim != 2 or w.data.ndim != 2:
        raise DimensionError(
            f"linear expects 2-D operands, got x{x.data.shape} w{w.data.shape}"
        )
    if x.data.shape[1] != w.data.shape[1]:
        raise DimensionError(
            f"linear input features {x.data.shape[1]} != weight features "
            f"{w.data.shape[1]} (axis 1)"
        )
    out = Tensor(np.einsum("bf,of->bo", x.data, w.data) + b.data, (x, w, b))

    def _bw(g):
        x._accumulate(np.einsum("bo,of->bf", g, w.data))
        w._accumulate(np.einsum("bo,bf->of", g, x.data))
        b._accumulate(g.sum(axis=0))

    out._backward = _bw
    return out


def causal_conv(x, kernel, bias, dilation):
    """Causal dilated 1-D convolution on a batch: x (B, C_in, T) -> (B, C_out, T)."""
    if x.data.ndim != 3:
        raise DimensionError(f"causal_conv expects (B, C, T), got {x.data.shape}")
    if x.data.shape[1] != kernel.data.shape[1]:
        raise DimensionError(
            f"input channels {x.data.shape[1]} != kernel in_channels "
            f"{kernel.data.shape[1]} (axis 1 of x)"
        )
    if kernel.data.shape[0] != bias.data.shape[0]:
        raise DimensionError(
            f"kernel out_channels {kernel.data.shape[0]} != bias size "
            f"{bias.data.shape[0]} (axis 0 of kernel)"
        )
    y = backend.conv1d_forward(x.data, kernel.data, bias.data, int(dilation))
    out = Tensor(y, (x, kernel, bias))

    def _bw(g):
        gx, gk, gb = backend.conv1d_backward(x.data, kernel.data, int(dilation), g)
        x._accumulate(gx)
        kernel._accumulate(gk)
        bias._accumulate(gb)

    out._backward = _bw
    return out


def last_timestep(x):
    """Slice the final timestep: (B, C, T) -> (B, C)."""
    if x.data.ndim != 3:
        raise DimensionError(f"last_timestep expects (B, C, T), got {x.data.shape}")
    out = Tensor(np.ascontiguousarray(x.data[:, :, -1]), (x,))

    def _bw(g):
        gx = np.zeros_like(x.data)
        gx[:, :, -1] = g
        x._accumulate(gx)

    out._backward = _bw
    return out


def reshape(x, shape):
    out = Tensor(x.data.reshape(shape), (x,))

    def _bw(g):
        x._accumulate(g.reshape(x.data.shape))

    out._backward = _bw
    return out


def mse(pred, target):
    """Mean over all elements of the squared difference; scalar output."""
    pred, target = as_tensor(pred), as_tensor(target)
    if pred.data.shape != target.data.shape:
        raise DimensionError(
            f"mse shapes differ: pred {pred.data.shape} vs target "
            f"{target.data.shape}"
        )
    diff = pred.data - target.data
    out = Tensor(np.mean(diff * diff), (pred, target))
    n = diff.size

    def _bw(g):
        common = (2.0 * g / n) * diff
        pred._accumulate(common)
        target._accumulate(-common)

    out._backward = _bw
    return out
