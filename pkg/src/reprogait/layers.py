"""Network building blocks: causal conv stacks and two-layer MLPs.

The public functions accept per-sample arrays (channels x time, or a
flat feature vector) as well as batched arrays with a leading batch
axis; training code uses the batched form throughout.  A conv block is
relu(conv(x) + x) when input and output channel counts match (identity
residual, no projection) and relu(conv(x)) otherwise; a TCN's feature
vector is the last timestep of the final block.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, DimensionError


@dataclass
class ConvLayerParams:
    """One causal convolution layer: kernel (C_out, C_in, K), bias (C_out,)."""

    kernel: Tensor
    bias: Tensor
    dilation: int

    def __post_init__(self):
        if self.kernel.data.ndim != 3:
            raise DimensionError(
                f"conv kernel must be (C_out, C_in, K), got {self.kernel.data.shape}"
            )
        if self.bias.data.shape != (self.kernel.data.shape[0],):
            raise DimensionError(
                f"conv bias shape {self.bias.data.shape} != (out_channels,) "
                f"= ({self.kernel.data.shape[0]},)"
            )
        if self.kernel.data.shape[2] < 1:
            raise ConfigError("kernel_size must be >= 1")
        if self.dilation < 1:
            raise ConfigError("dilation must be >= 1")

    @property
    def out_channels(self):
        return self.kernel.data.shape[0]

    @property
    def in_channels(self):
        return self.kernel.data.shape[1]

    @property
    def kernel_size(self):
        return self.kernel.data.shape[2]

    def parameters(self):
        return [self.kernel, self.bias]


@dataclass
class MlpParams:
    """Two-layer perceptron: w1 (H, F), b1 (H,), w2 (O, H), b2 (O,)."""

    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor

    def __post_init__(self):
        if self.w2.data.shape[1] != self.w1.data.shape[0]:
            raise DimensionError(
                f"mlp inner dims inconsistent: w2 columns {self.w2.data.shape[1]} "
                f"!= w1 rows {self.w1.data.shape[0]}"
            )

    @property
    def in_dim(self):
        return self.w1.data.shape[1]

    @property
    def out_dim(self):
        return self.w2.data.shape[0]

    def parameters(self):
        return [self.w1, self.b1, self.w2, self.b2]


def _glorot(rng, shape, fan_in, fan_out):
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-limit, limit, size=shape))


def init_conv_layer(out_channels, in_channels, kernel_size, dilation, rng):
    kernel = _glorot(
        rng,
        (out_channels, in_channels, kernel_size),
        in_channels * kernel_size,
        out_channels * kernel_size,
    )
    bias = Tensor(np.zeros(out_channels))
    return ConvLayerParams(kernel=kernel, bias=bias, dilation=dilation)


def init_mlp(in_dim, hidden_dim, out_dim, rng):
    return MlpParams(
        w1=_glorot(rng, (hidden_dim, in_dim), in_dim, hidden_dim),
        b1=Tensor(np.zeros(hidden_dim)),
        w2=_glorot(rng, (out_dim, hidden_dim), hidden_dim, out_dim),
        b2=Tensor(np.zeros(out_dim)),
    )


def _as_batched(x, ndim_unbatched):
    """Lift a per-sample tensor to batch-of-one; report whether it was lifted."""
    x = ad.as_tensor(x)
    if x.data.ndim == ndim_unbatched:
        return ad.reshape(x, (1,) + x.data.shape), True
    if x.data.ndim == ndim_unbatched + 1:
        return x, False
    raise DimensionError(
        f"expected a {ndim_unbatched}-D sample or {ndim_unbatched + 1}-D batch, "
        f"got shape {x.data.shape}"
    )


def causal_conv_forward(x, p):
    """Causal dilated convolution; x (C_in, T) -> (C_out, T), batch-aware."""
    xb, lifted = _as_batched(x, 2)
    y = ad.causal_conv(xb, p.kernel, p.bias, p.dilation)
    return ad.reshape(y, y.data.shape[1:]) if lifted else y


def conv_block(x, p):
    """relu(conv(x) + x) when channels match, relu(conv(x)) otherwise."""
    y = ad.causal_conv(x, p.kernel, p.bias, p.dilation)
    if p.in_channels == p.out_channels:
        y = ad.add(y, x)
    return ad.relu(y)


def tcn_forward(x, layers):
    """Stack of conv blocks, then the last-timestep feature vector.

    x (C_in, T) -> (F,); a batched (B, C_in, T) input yields (B, F).
    """
    h, lifted = _as_batched(x, 2)
    for p in layers:
        h = conv_block(h, p)
    f = ad.last_timestep(h)
    return ad.reshape(f, f.data.shape[1:]) if lifted else f


def mlp_forward(f, p):
    """w2 @ relu(w1 @ f + b1) + b2; f (F,) -> (O,), batch-aware."""
    fb, lifted = _as_batched(f, 1)
    hidden = ad.relu(ad.linear(fb, p.w1, p.b1))
    y = ad.linear(hidden, p.w2, p.b2)
    return ad.reshape(y, y.data.shape[1:]) if lifted else y


# re-exported so the numeric core reads as one API
mse = ad.mse
backward = ad.backward
