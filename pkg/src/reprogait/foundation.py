"""Multi-task foundation model: shared causal-conv core + per-task MLP heads.

Training updates the shared core on every minibatch and each task head
only on batches containing that task.  Once frozen, parameters are
immutable (backing arrays are marked read-only) but gradients still flow
through the model to its inputs, which is what input-level retargeting
relies on.
"""

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import layers
from .autodiff import Tensor
from .errors import ConfigError, DimensionError, MissingHeadError, UsageError
from .layers import ConvLayerParams, MlpParams
from .optim import Adam
from .rngtools import rng_for

TaskId = int


@dataclass
class TimeWindow:
    """One model input: a (channels x time) sensor window from a stream."""

    values: np.ndarray  # (C, T)
    task: TaskId
    time_index: int


@dataclass
class LabeledSample:
    window: TimeWindow
    target: np.ndarray  # (O,) motion value one step after the window ends


@dataclass
class FoundationModel:
    shared: list  # list[ConvLayerParams]
    heads: dict  # TaskId -> MlpParams
    in_channels: int
    window_len: int
    out_dim: int
    frozen: bool = False

    def parameters(self):
        params = []
        for layer in self.shared:
            params.extend(layer.parameters())
        for task in sorted(self.heads):
            params.extend(self.heads[task].parameters())
        return params

    def shared_parameters(self):
        params = []
        for layer in self.shared:
            params.extend(layer.parameters())
        return params

    def named_parameters(self):
        out = {}
        for i, layer in enumerate(self.shared):
            out[f"shared.{i}.kernel"] = layer.kernel.data
            out[f"shared.{i}.bias"] = layer.bias.data
        for task in sorted(self.heads):
            head = self.heads[task]
            out[f"head.{task}.w1"] = head.w1.data
            out[f"head.{task}.b1"] = head.b1.data
            out[f"head.{task}.w2"] = head.w2.data
            out[f"head.{task}.b2"] = head.b2.data
        return out


@dataclass
class FoundationTrainConfig:
    tasks: list
    conv_channels: list = field(default_factory=lambda: [12, 12])
    kernel_size: int = 3
    dilations: list = field(default_factory=lambda: [1, 2])
    hidden_dim: int = 24
    epochs: int = 8
    batch_size: int = 64
    learning_rate: float = 3e-3
    seed: int = 0


def build_foundation(in_channels, window_len, out_dim, cfg):
    """Fresh unfrozen model with seeded Glorot-uniform weights."""
    if len(cfg.conv_channels) != len(cfg.dilations):
        raise ConfigError(
            f"conv_channels has {len(cfg.conv_channels)} entries but dilations "
            f"has {len(cfg.dilations)}"
        )
    if not cfg.tasks:
        raise ConfigError("tasks must be non-empty")
    rng = rng_for(cfg.seed, "foundation-init")
    shared = []
    prev = in_channels
    for ch, dil in zip(cfg.conv_channels, cfg.dilations):
        shared.append(layers.init_conv_layer(ch, prev, cfg.kernel_size, dil, rng))
        prev = ch
    heads = {
        task: layers.init_mlp(prev, cfg.hidden_dim, out_dim, rng)
        for task in sorted(cfg.tasks)
    }
    return FoundationModel(
        shared=shared,
        heads=heads,
        in_channels=in_channels,
        window_len=window_len,
        out_dim=out_dim,
    )


def _check_geometry(model, values):
    if values.shape[-2] != model.in_channels:
        raise DimensionError(
            f"window has {values.shape[-2]} channels, model expects "
            f"{model.in_channels} (axis -2)"
        )
    if values.shape[-1] != model.window_len:
        raise DimensionError(
            f"window has {values.shape[-1]} timesteps, model expects "
            f"{model.window_len} (axis -1)"
        )


def predict_tensor(model, x, task):
    """Graph-building forward pass: x Tensor (B, C, T) -> Tensor (B, O)."""
    if task not in model.heads:
        raise MissingHeadError(f"no head for task {task}")
    _check_geometry(model, x.data)
    features = layers.tcn_forward(x, model.shared)
    return layers.mlp_forward(features, model.heads[task])


def predict_batch(model, values, task):
    """values (B, C, T) -> predictions (B, O) as a plain array."""
    return predict_tensor(model, Tensor(values), task).data


def predict(model, window):
    """Single-window prediction g_task(g_shared(x)); read-only on the model."""
    values = np.asarray(window.values, dtype=np.float64)
    if values.ndim != 2:
        raise DimensionError(f"window values must be (C, T), got {values.shape}")
    return predict_batch(model, values[None], window.task)[0]


def freeze(model):
    """Mark the model immutable; backing arrays become read-only."""
    for p in model.parameters():
        p.data.flags.writeable = False
    model.frozen = True
    return model


def train_foundation(samples, cfg):
    """Train on mixed-task minibatches; returns (model, per-epoch loss history).

    Per-batch loss is the mean over batch samples of the per-sample MSE;
    the shared core is updated on every batch, a task head only when its
    task appears in the batch.
    """
    if not samples:
        raise ConfigError("training data is empty")
    declared = sorted(set(cfg.tasks))
    present = {s.window.task for s in samples}
    for task in declared:
        if task not in present:
            raise ConfigError(f"task {task} has no training samples")
    for task in sorted(present):
        if task not in declared:
            raise ConfigError(f"samples contain undeclared task {task}")

    first = samples[0]
    in_channels, window_len = first.window.values.shape
    out_dim = first.target.shape[0]
    for s in samples:
        if s.target.shape != (out_dim,):
            raise DimensionError(
                f"target shape {s.target.shape} != ({out_dim},) (axis 0)"
            )
    model = build_foundation(in_channels, window_len, out_dim, cfg)

    values = np.stack([s.window.values for s in samples]).astype(np.float64)
    targets = np.stack([s.target for s in samples]).astype(np.float64)
    tasks = np.asarray([s.window.task for s in samples])
    _check_geometry(model, values)

    opt = Adam(model.parameters(), lr=cfg.learning_rate)
    shuffle_rng = rng_for(cfg.seed, "foundation-shuffle")
    history = []
    n = len(samples)
    for _ in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        epoch_losses = []
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            loss, batch_tasks = _batch_loss(model, values, targets, tasks, batch)
            loss.backward()
            touched = list(model.shared_parameters())
            for task in batch_tasks:
                touched.extend(model.heads[task].parameters())
            opt.step(touched)
            epoch_losses.append(float(loss.data))
        history.append(float(np.mean(epoch_losses)))
    return model, history


def _batch_loss(model, values, targets, tasks, batch):
    """Mean per-sample MSE over one minibatch, grouped by task head."""
    batch_tasks = sorted(set(tasks[batch]))
    total = None
    for task in batch_tasks:
        rows = batch[tasks[batch] == task]
        pred = predict_tensor(model, Tensor(values[rows]), task)
        part = ad.scale(ad.mse(pred, Tensor(targets[rows])), len(rows) / len(batch))
        total = part if total is None else ad.add(total, part)
    return total, batch_tasks


def require_frozen(model, what):
    if not model.frozen:
        raise UsageError(f"{what} requires a frozen foundation model")
