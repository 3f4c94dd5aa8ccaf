"""Trainable input-correction network.

Maps a raw amputee window to a corrected window the frozen foundation
model understands: a small causal-conv stack (same block structure as
the foundation core) followed by a linear map reshaped back to the
foundation's (channels x time) input geometry.  Training minimizes

    alpha * MSE(h(x_amp), x_corr) + beta * MSE(g_frozen(h(x_amp)), y_amp)

over the training triples; only h's parameters receive updates, while
gradients flow through the frozen model's graph into h.
"""

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import foundation as fnd
from . import layers
from .autodiff import Tensor
from .errors import ConfigError, DimensionError
from .optim import Adam, zero_grads
from .rngtools import rng_for


@dataclass
class RefurbishModel:
    conv_layers: list  # list[ConvLayerParams]
    out_w: Tensor  # (C*T, C_h*T)
    out_b: Tensor  # (C*T,)
    in_channels: int
    window_len: int

    def parameters(self):
        params = []
        for layer in self.conv_layers:
            params.extend(layer.parameters())
        params.extend([self.out_w, self.out_b])
        return params

    def named_parameters(self):
        out = {}
        for i, layer in enumerate(self.conv_layers):
            out[f"conv.{i}.kernel"] = layer.kernel.data
            out[f"conv.{i}.bias"] = layer.bias.data
        out["out.w"] = self.out_w.data
        out["out.b"] = self.out_b.data
        return out


@dataclass
class RefurbishTrainConfig:
    alpha: float = 1.0
    beta: float = 20.0
    conv_channels: list = field(default_factory=lambda: [10])
    kernel_size: int = 3
    dilations: list = field(default_factory=lambda: [1])
    epochs: int = 60
    batch_size: int = 16
    learning_rate: float = 3e-3
    seed: int = 0

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ConfigError("alpha and beta must be nonnegative")
        if self.alpha + self.beta <= 0:
            raise ConfigError("alpha + beta must be positive")


@dataclass
class AmputeeTrainingTriple:
    x_amp: fnd.TimeWindow
    x_corr: fnd.TimeWindow
    y_amp: np.ndarray  # (O,)


def build_refurbish(in_channels, window_len, cfg):
    if len(cfg.conv_channels) != len(cfg.dilations):
        raise ConfigError(
            f"conv_channels has {len(cfg.conv_channels)} entries but dilations "
            f"has {len(cfg.dilations)}"
        )
    rng = rng_for(cfg.seed, "refurbish-init")
    conv_layers = []
    prev = in_channels
    for ch, dil in zip(cfg.conv_channels, cfg.dilations):
        conv_layers.append(layers.init_conv_layer(ch, prev, cfg.kernel_size, dil, rng))
        prev = ch
    flat_in = prev * window_len
    flat_out = in_channels * window_len
    limit = np.sqrt(6.0 / (flat_in + flat_out))
    return RefurbishModel(
        conv_layers=conv_layers,
        out_w=Tensor(rng.uniform(-limit, limit, size=(flat_out, flat_in))),
        out_b=Tensor(np.zeros(flat_out)),
        in_channels=in_channels,
        window_len=window_len,
    )


def forward_tensor(model, x):
    """Graph-building pass: x Tensor (B, C, T) -> corrected Tensor (B, C, T)."""
    if x.data.ndim != 3:
        raise DimensionError(f"expected (B, C, T), got {x.data.shape}")
    if x.data.shape[1] != model.in_channels or x.data.shape[2] != model.window_len:
        raise DimensionError(
            f"window geometry {x.data.shape[1:]} does not match model "
            f"({model.in_channels}, {model.window_len})"
        )
    h = x
    for p in model.conv_layers:
        h = layers.conv_block(h, p)
    b = h.data.shape[0]
    flat = ad.reshape(h, (b, h.data.shape[1] * h.data.shape[2]))
    out = ad.linear(flat, model.out_w, model.out_b)
    return ad.reshape(out, (b, model.in_channels, model.window_len))


def forward_batch(model, values):
    return forward_tensor(model, Tensor(values)).data


def refurbish_forward(model, x_amp):
    """Correct one amputee window; pure function of (model, window)."""
    values = np.asarray(x_amp.values, dtype=np.float64)
    corrected = forward_batch(model, values[None])[0]
    return fnd.TimeWindow(values=corrected, task=x_amp.task, time_index=x_amp.time_index)


def _dual_loss(model, g_frozen, task, x, x_corr, y, cfg):
    """alpha * template term + beta * frozen-prediction term on a batch."""
    corrected = forward_tensor(model, x)
    template_term = ad.mse(corrected, x_corr)
    pred_term = ad.mse(fnd.predict_tensor(g_frozen, corrected, task), y)
    return ad.add(ad.scale(template_term, cfg.alpha), ad.scale(pred_term, cfg.beta))


def refurbish_loss(triple, model, g_frozen, cfg):
    """Dual loss for one training triple; requires a frozen foundation model."""
    fnd.require_frozen(g_frozen, "refurbish_loss")
    x = Tensor(np.asarray(triple.x_amp.values, dtype=np.float64)[None])
    x_corr = Tensor(np.asarray(triple.x_corr.values, dtype=np.float64)[None])
    y = Tensor(np.asarray(triple.y_amp, dtype=np.float64)[None])
    return float(_dual_loss(model, g_frozen, triple.x_amp.task, x, x_corr, y, cfg).data)


def train_refurbish(triples, g_frozen, cfg):
    """Fit h on (x_amp, x_corr, y_amp) triples; returns (model, loss history).

    Gradients propagate through the frozen foundation graph but only h's
    parameters are updated; the batch loss is the mean per-sample loss.
    """
    fnd.require_frozen(g_frozen, "train_refurbish")
    if not triples:
        raise ConfigError("refurbish training data is empty")
    task = triples[0].x_amp.task
    for t in triples:
        if t.x_amp.task != task:
            raise ConfigError("all refurbish training triples must share one task")

    x_all = np.stack([t.x_amp.values for t in triples]).astype(np.float64)
    corr_all = np.stack([t.x_corr.values for t in triples]).astype(np.float64)
    y_all = np.stack([t.y_amp for t in triples]).astype(np.float64)

    model = build_refurbish(g_frozen.in_channels, g_frozen.window_len, cfg)
    opt = Adam(model.parameters(), lr=cfg.learning_rate)
    shuffle_rng = rng_for(cfg.seed, "refurbish-shuffle")
    history = []
    n = len(triples)
    for _ in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        epoch_losses = []
        for start in range(0, n, cfg.batch_size):
            rows = order[start:start + cfg.batch_size]
            loss = _dual_loss(
                model, g_frozen, task,
                Tensor(x_all[rows]), Tensor(corr_all[rows]), Tensor(y_all[rows]),
                cfg,
            )
            loss.backward()
            opt.step()
            zero_grads(g_frozen.parameters())  # flowed-through grads, never applied
            epoch_losses.append(float(loss.data))
        history.append(float(np.mean(epoch_losses)))
    return model, history
