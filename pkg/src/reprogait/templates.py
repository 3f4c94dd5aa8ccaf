"""Correction-template computation.

Builds an input-output index over one able-bodied stream with the frozen
foundation model, then for each desired output sequence finds the best
matching index position (sequence matching over a 2m+1 window, sum of
Euclidean output distances, ties to the smallest index) and averages the
n nearest able inputs inside an epsilon-ball around the match, weighted
linearly or exponentially by input-space distance.
"""

from dataclasses import dataclass, field

import numpy as np

from . import foundation as fnd
from .checkpoint import content_checksum, model_checksum
from .errors import ConfigError, DimensionError, InsufficientDataError

WEIGHTINGS = ("linear", "exponential")


@dataclass
class AbleBodiedIndex:
    """Temporally ordered (input window, frozen-model output) pairs."""

    windows: np.ndarray  # (N, C, T), source-stream order
    outputs: np.ndarray  # (N, O)
    time_indices: np.ndarray  # (N,)
    task: int
    model_checksum: str

    def __len__(self):
        return self.windows.shape[0]

    def entry(self, i):
        window = fnd.TimeWindow(
            values=self.windows[i], task=self.task, time_index=int(self.time_indices[i])
        )
        return window, self.outputs[i]


@dataclass
class TemplateConfig:
    m: int = 0  # matched sequence length is 2m+1
    n_neighbors: int = 5
    epsilon: float = 2.0
    weighting: str = "linear"

    def __post_init__(self):
        if self.m < 0:
            raise ConfigError("m must be nonnegative")
        if self.n_neighbors < 1:
            raise ConfigError("n_neighbors must be >= 1")
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if self.weighting not in WEIGHTINGS:
            raise ConfigError(
                f"weighting must be one of {WEIGHTINGS}, got '{self.weighting}'"
            )


@dataclass
class DesiredOutputSeries:
    """Desired outputs over time, one (O,) vector per amputee sample."""

    values: np.ndarray  # (N, O)
    phases: np.ndarray  # (N,)


@dataclass
class CorrectionTemplate:
    corrected: fnd.TimeWindow
    matched_center: int
    neighbor_indices: np.ndarray
    weights: np.ndarray
    sample_index: int = -1  # position in the amputee sample stream


@dataclass
class CorrectionResult:
    templates: list
    skipped: list = field(default_factory=list)  # boundary sample positions


def build_index(model, able_stream):
    """Index entries[i] = (stream[i], predict(model, stream[i])), order preserved."""
    fnd.require_frozen(model, "build_index")
    if not able_stream:
        return AbleBodiedIndex(
            windows=np.zeros((0, model.in_channels, model.window_len)),
            outputs=np.zeros((0, model.out_dim)),
            time_indices=np.zeros(0, dtype=int),
            task=-1,
            model_checksum=model_checksum(model),
        )
    task = able_stream[0].task
    for w in able_stream:
        if w.task != task:
            raise ConfigError("all index windows must share one task")
    windows = np.stack([w.values for w in able_stream]).astype(np.float64)
    outputs = fnd.predict_batch(model, windows, task)
    return AbleBodiedIndex(
        windows=windows,
        outputs=outputs,
        time_indices=np.array([w.time_index for w in able_stream], dtype=int),
        task=task,
        model_checksum=model_checksum(model),
    )


def index_checksum(index):
    """Content checksum of an index (entries + source-model identity)."""
    meta = {"task": index.task, "model_checksum": index.model_checksum}
    arrays = {
        "windows": index.windows,
        "outputs": index.outputs,
        "time_indices": index.time_indices.astype(np.float64),
    }
    return content_checksum("index", meta, arrays)


def sequence_match(index, y_seq):
    """Best matching center i* for a 2m+1-long desired output sequence.

    Minimizes sum_{j=-m..m} ||outputs[i-j] - y_seq[m-j]||_2 over admissible
    centers (full window in range); ties break to the smallest i.
    """
    y_seq = np.asarray(y_seq, dtype=np.float64)
    if y_seq.ndim == 1:
        y_seq = y_seq[:, None]
    if len(y_seq) % 2 != 1:
        raise DimensionError(f"sequence length must be odd (2m+1), got {len(y_seq)}")
    m = (len(y_seq) - 1) // 2
    n = len(index)
    if n < 2 * m + 1:
        raise InsufficientDataError(
            f"index has {n} entries, sequence matching with m={m} needs at "
            f"least {2 * m + 1}"
        )
    if y_seq.shape[1] != index.outputs.shape[1]:
        raise DimensionError(
            f"desired output dim {y_seq.shape[1]} != index output dim "
            f"{index.outputs.shape[1]}"
        )
    # distance of every entry output to every sequence element: (N, 2m+1)
    diffs = index.outputs[:, None, :] - y_seq[None, :, :]
    dists = np.sqrt(np.einsum("npo,npo->np", diffs, diffs))
    # cost over centers i (admissible range [m, n-1-m]): entry i-j pairs with
    # sequence element m-j; accumulate in the printed order j = -m..m
    width = n - 2 * m
    cost = np.zeros(width)
    for j in range(-m, m + 1):
        jj = m - j
        cost += dists[jj:jj + width, jj]
    return int(np.argmin(cost)) + m


def neighborhood_average(index, i_star, cfg):
    """Weighted average of the n nearest inputs within epsilon of entry i*."""
    n_entries = len(index)
    if not 0 <= i_star < n_entries:
        raise InsufficientDataError(f"center {i_star} outside index of {n_entries}")
    flat = index.windows.reshape(n_entries, -1)
    deltas = flat - flat[i_star]
    dists = np.sqrt(np.einsum("nf,nf->n", deltas, deltas))
    candidates = np.flatnonzero(dists <= cfg.epsilon)
    order = np.argsort(dists[candidates], kind="stable")  # ties keep index order
    chosen = candidates[order][: cfg.n_neighbors]
    d = dists[chosen]
    if cfg.weighting == "linear":
        raw = 1.0 - d / cfg.epsilon
    else:
        raw = np.exp(-d / (cfg.epsilon / 3.0))
    weights = raw / raw.sum()
    if len(chosen) == 1:
        corrected = index.windows[chosen[0]].copy()  # exact degenerate reduction
    else:
        corrected = np.einsum("n,nct->ct", weights, index.windows[chosen])
    window = fnd.TimeWindow(
        values=corrected, task=index.task, time_index=int(index.time_indices[i_star])
    )
    return CorrectionTemplate(
        corrected=window,
        matched_center=int(i_star),
        neighbor_indices=chosen.copy(),
        weights=weights,
    )


def compute_corrections(index, desired, cfg):
    """One template per desired sample with a full 2m+1 window; edges skipped."""
    values = np.asarray(desired.values, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    n = len(values)
    if n == 0:
        raise InsufficientDataError("desired output series is empty")
    if len(index) < 2 * cfg.m + 1:
        raise InsufficientDataError(
            f"index has {len(index)} entries, no admissible centers for m={cfg.m}"
        )
    result = CorrectionResult(templates=[])
    for k in range(n):
        if k - cfg.m < 0 or k + cfg.m > n - 1:
            result.skipped.append(k)
            continue
        i_star = sequence_match(index, values[k - cfg.m:k + cfg.m + 1])
        template = neighborhood_average(index, i_star, cfg)
        template.sample_index = k
        result.templates.append(template)
    return result
