"""Seeded synthetic gait data.

Streams are truncated Fourier series in gait phase: each channel of a
subject/task stream is dc + scale * sum_h amp[h] * cos(2*pi*h*phase +
shift[h]) plus Gaussian sensor noise, where scale grows with the
subject's anthropometry.  The prediction target (the motion variable of
the limb of interest) is a separate noise-free series of the same form.
Amputee streams distort the channels (dropped sensors, phase lag,
half-cycle amplitude asymmetry, a compensatory harmonic) while keeping
the undistorted target: the desired motion of the missing limb.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    ConfigError,
    ConstantChannelError,
    DimensionError,
    FormatError,
    InsufficientDataError,
)
from .foundation import LabeledSample, TimeWindow
from .rngtools import rng_for
from .templates import DesiredOutputSeries

REF_HEIGHT = 1.70  # m
REF_MASS = 70.0  # kg


@dataclass
class SubjectMeta:
    id: str
    height: float
    mass: float
    age: float
    kind: str  # "able" | "amputee"

    def __post_init__(self):
        if self.height <= 0 or self.mass <= 0 or self.age <= 0:
            raise ConfigError(f"subject {self.id}: anthropometrics must be positive")
        if self.kind not in ("able", "amputee"):
            raise ConfigError(f"subject {self.id}: kind must be able|amputee")


@dataclass
class GaitStream:
    subject: SubjectMeta
    task: int
    channels: np.ndarray  # (C, L)
    phase: np.ndarray  # (L,) in [0, 1)
    target_series: np.ndarray  # (L, O)


@dataclass
class FourierTable:
    """Per-task coefficients; harmonic h of row c is amp[c, h-1]."""

    channel_dc: np.ndarray  # (C,)
    channel_amp: np.ndarray  # (C, H)
    channel_shift: np.ndarray  # (C, H)
    target_dc: float
    target_amp: np.ndarray  # (H,)
    target_shift: np.ndarray  # (H,)


@dataclass
class AmputeeDistortion:
    dropout_channels: list = field(default_factory=list)
    phase_lag: float = 0.0  # fraction of a gait cycle
    asymmetry: float = 1.0  # amplitude factor on even half-cycles
    comp_harmonic: int = 3
    comp_amplitude: float = 0.0
    noise_scale: float = 1.0  # sensor-noise multiplier vs the able setup

    def __post_init__(self):
        if self.asymmetry <= 0:
            raise ConfigError("asymmetry factor must be positive")
        if self.comp_harmonic < 1:
            raise ConfigError("comp_harmonic must be >= 1")
        if self.noise_scale < 0:
            raise ConfigError("noise_scale must be nonnegative")


@dataclass
class SynthConfig:
    tables: dict  # task -> FourierTable
    samples_per_cycle: int = 25
    noise_std: float = 0.03
    cycle_amp_jitter: float = 0.0  # per-stride amplitude variability (std)
    cycle_phase_jitter: float = 0.0  # per-stride timing wobble (std, cycles)
    distortion: AmputeeDistortion = field(default_factory=AmputeeDistortion)
    seed: int = 0

    def __post_init__(self):
        if self.samples_per_cycle < 2:
            raise ConfigError("samples_per_cycle must be >= 2")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be nonnegative")
        if self.cycle_amp_jitter < 0 or self.cycle_phase_jitter < 0:
            raise ConfigError("cycle jitter parameters must be nonnegative")
        if not self.tables:
            raise ConfigError("tables must define at least one task")


def default_tables(tasks, n_channels, harmonics, seed):
    """Seeded coefficient tables; every channel carries the fundamental."""
    tables = {}
    for task in tasks:
        rng = rng_for(seed, "fourier-table", task)
        decay = 1.0 / np.arange(1, harmonics + 1)
        tables[task] = FourierTable(
            channel_dc=rng.uniform(-0.5, 0.5, size=n_channels),
            channel_amp=rng.uniform(0.4, 1.2, size=(n_channels, harmonics)) * decay,
            channel_shift=rng.uniform(0, 2 * np.pi, size=(n_channels, harmonics)),
            target_dc=float(rng.uniform(-0.3, 0.3)),
            target_amp=rng.uniform(0.6, 1.1, size=harmonics) * decay,
            target_shift=rng.uniform(0, 2 * np.pi, size=harmonics),
        )
    return tables


def subject_scale(subject):
    return 0.5 * (subject.height / REF_HEIGHT + subject.mass / REF_MASS)


def _harmonic_sum(amp, shift, phase):
    """sum_h amp[..., h-1] * cos(2*pi*h*phase + shift[..., h-1])."""
    harmonics = np.arange(1, amp.shape[-1] + 1)
    angles = 2.0 * np.pi * harmonics[:, None] * phase[None, :]  # (H, L)
    if amp.ndim == 1:
        return np.einsum("h,hl->l", amp, np.cos(angles + shift[:, None]))
    return np.einsum("ch,chl->cl", amp, np.cos(angles[None] + shift[:, :, None]))


def _phase_grid(cfg, cycles):
    spc = cfg.samples_per_cycle
    t = np.arange(cycles * spc)
    return (t % spc) / float(spc)


def _cycle_latents(cfg, subject, task, cycles):
    """Per-stride variability, expanded per timestep; shared by the able and
    amputee variants of one subject/task stream (same rng derivation)."""
    rng = rng_for(cfg.seed, "stream-latent", subject.id, task)
    amp = 1.0 + rng.normal(0.0, cfg.cycle_amp_jitter, size=cycles)
    timing = rng.normal(0.0, cfg.cycle_phase_jitter, size=cycles)
    return (
        np.repeat(amp, cfg.samples_per_cycle),
        np.repeat(timing, cfg.samples_per_cycle),
    )


def _stream_noise(cfg, subject, task, shape):
    # keyed by (seed, subject, task) only: the able and amputee variants of
    # one subject/task share noise draws, so identity distortion is exact
    rng = rng_for(cfg.seed, "stream-noise", subject.id, task)
    return rng.normal(0.0, cfg.noise_std, size=shape)


def _check_synth_args(cfg, task, cycles):
    if cycles < 1:
        raise ConfigError("cycles must be >= 1")
    if task not in cfg.tables:
        raise ConfigError(f"no coefficient table for task {task}")


def synth_able(cfg, subject, task, cycles):
    """Able-bodied stream: Fourier channels + noise, noise-free target."""
    _check_synth_args(cfg, task, cycles)
    table = cfg.tables[task]
    scale = subject_scale(subject)
    phase = _phase_grid(cfg, cycles)
    amp_l, timing_l = _cycle_latents(cfg, subject, task, cycles)
    eff_phase = np.mod(phase + timing_l, 1.0)
    det = table.channel_dc[:, None] + (scale * amp_l)[None, :] * _harmonic_sum(
        table.channel_amp, table.channel_shift, eff_phase
    )
    target = table.target_dc + (scale * amp_l) * _harmonic_sum(
        table.target_amp, table.target_shift, eff_phase
    )
    channels = det + _stream_noise(cfg, subject, task, det.shape)
    return GaitStream(
        subject=subject,
        task=task,
        channels=channels,
        phase=phase,
        target_series=target[:, None],
    )


def synth_amputee(cfg, subject, task, cycles):
    """Amputee stream: distorted channels, undistorted (desired-motion) target."""
    _check_synth_args(cfg, task, cycles)
    table = cfg.tables[task]
    dist = cfg.distortion
    scale = subject_scale(subject)
    phase = _phase_grid(cfg, cycles)
    spc = cfg.samples_per_cycle
    amp_l, timing_l = _cycle_latents(cfg, subject, task, cycles)
    eff_phase = np.mod(phase + timing_l, 1.0)

    chan_phase = (
        eff_phase if dist.phase_lag == 0 else np.mod(eff_phase - dist.phase_lag, 1.0)
    )
    det = table.channel_dc[:, None] + (scale * amp_l)[None, :] * _harmonic_sum(
        table.channel_amp, table.channel_shift, chan_phase
    )
    if dist.asymmetry != 1.0:
        half_cycle = (2 * np.arange(det.shape[1])) // spc
        even = half_cycle % 2 == 0
        det[:, even] *= dist.asymmetry
    if dist.comp_amplitude != 0.0:
        det += dist.comp_amplitude * np.cos(
            2.0 * np.pi * dist.comp_harmonic * eff_phase
        )[None, :]
    noise = _stream_noise(cfg, subject, task, det.shape)
    if dist.noise_scale != 1.0:
        noise = noise * dist.noise_scale
    channels = det + noise
    for c in dist.dropout_channels:
        if not 0 <= c < channels.shape[0]:
            raise ConfigError(f"dropout channel {c} out of range")
        channels[c, :] = 0.0
    target = table.target_dc + (scale * amp_l) * _harmonic_sum(
        table.target_amp, table.target_shift, eff_phase
    )
    return GaitStream(
        subject=subject,
        task=task,
        channels=channels,
        phase=phase,
        target_series=target[:, None],
    )


def match_anthropometry(amputee, able_pool):
    """Nearest able subject by z-scored (height, mass, age); ties to smaller id."""
    if not able_pool:
        raise ConfigError("able pool is empty")
    feats = np.array([[s.height, s.mass, s.age] for s in able_pool])
    mean = feats.mean(axis=0)
    std = feats.std(axis=0)
    std[std == 0.0] = 1.0
    target = (np.array([amputee.height, amputee.mass, amputee.age]) - mean) / std
    z = (feats - mean) / std
    dists = np.sqrt(((z - target) ** 2).sum(axis=1))
    best = min(
        range(len(able_pool)), key=lambda i: (dists[i], able_pool[i].id)
    )
    return able_pool[best]


def _cycle_bounds(phase):
    """Start indices of each cycle (positions where phase wraps)."""
    starts = [0]
    for i in range(1, len(phase)):
        if phase[i] < phase[i - 1]:
            starts.append(i)
    starts.append(len(phase))
    return starts


def derive_desired_outputs(amputee_stream, matched_able):
    """Desired output at each amputee timestep: the matched able subject's
    target at the same gait phase, linearly interpolated (periodic) within
    the corresponding cycle."""
    if amputee_stream.task != matched_able.task:
        raise ConfigError(
            f"streams do not share a task: {amputee_stream.task} vs "
            f"{matched_able.task}"
        )
    for stream, name in ((amputee_stream, "amputee"), (matched_able, "able")):
        if stream.phase is None or len(stream.phase) == 0:
            raise FormatError(f"{name} stream is missing the phase column")

    able_bounds = _cycle_bounds(matched_able.phase)
    n_able_cycles = len(able_bounds) - 1
    amp_bounds = _cycle_bounds(amputee_stream.phase)
    out_dim = matched_able.target_series.shape[1]
    n = len(amputee_stream.phase)
    values = np.empty((n, out_dim))
    for cycle in range(len(amp_bounds) - 1):
        lo, hi = amp_bounds[cycle], amp_bounds[cycle + 1]
        able_cycle = min(cycle, n_able_cycles - 1)
        alo, ahi = able_bounds[able_cycle], able_bounds[able_cycle + 1]
        grid = matched_able.phase[alo:ahi]
        for o in range(out_dim):
            values[lo:hi, o] = np.interp(
                amputee_stream.phase[lo:hi],
                grid,
                matched_able.target_series[alo:ahi, o],
                period=1.0,
            )
    return DesiredOutputSeries(values=values, phases=amputee_stream.phase.copy())


def make_windows(stream, window_len, stride=1):
    """Sliding windows ending at k with the target one step ahead (k+1)."""
    if stride < 1:
        raise ConfigError("stride must be >= 1")
    length = stream.channels.shape[1]
    if length < window_len + 1:
        raise InsufficientDataError(
            f"stream length {length} < window length {window_len} + 1"
        )
    samples = []
    for k in range(window_len - 1, length - 1, stride):
        samples.append(
            LabeledSample(
                window=TimeWindow(
                    values=stream.channels[:, k - window_len + 1:k + 1].copy(),
                    task=stream.task,
                    time_index=k,
                ),
                target=stream.target_series[k + 1].copy(),
            )
        )
    return samples


@dataclass
class NormalizationStats:
    mean: np.ndarray  # (C,)
    std: np.ndarray  # (C,)


def fit_normalizer(streams):
    """Per-channel mean/std over the given (training-split) streams."""
    if not streams:
        raise ConfigError("cannot fit a normalizer on zero streams")
    stacked = np.concatenate([s.channels for s in streams], axis=1)
    mean = stacked.mean(axis=1)
    std = stacked.std(axis=1)
    flat = np.flatnonzero(std == 0.0)
    if flat.size:
        raise ConstantChannelError(
            f"channel {int(flat[0])} is constant and cannot be normalized"
        )
    return NormalizationStats(mean=mean, std=std)


def apply_normalizer(stats, stream):
    if stream.channels.shape[0] != stats.mean.shape[0]:
        raise DimensionError(
            f"stream has {stream.channels.shape[0]} channels, stats have "
            f"{stats.mean.shape[0]} (axis 0)"
        )
    channels = (stream.channels - stats.mean[:, None]) / stats.std[:, None]
    return replace(stream, channels=channels)


def invert_normalizer(stats, stream):
    channels = stream.channels * stats.std[:, None] + stats.mean[:, None]
    return replace(stream, channels=channels)


def slice_stream(stream, lo, hi):
    """Temporal sub-stream [lo, hi) with channels, phase and targets aligned."""
    return replace(
        stream,
        channels=stream.channels[:, lo:hi],
        phase=stream.phase[lo:hi],
        target_series=stream.target_series[lo:hi],
    )


def generate_subjects(n_able, n_amputee, seed):
    """Seeded anthropometric metadata for the able pool and the amputees."""
    able, amputees = [], []
    for i in range(n_able):
        rng = rng_for(seed, "subject", "able", i)
        able.append(
            SubjectMeta(
                id=f"able{i:02d}",
                height=float(rng.normal(1.72, 0.07)),
                mass=float(rng.normal(72.0, 8.0)),
                age=float(rng.uniform(20.0, 60.0)),
                kind="able",
            )
        )
    for i in range(n_amputee):
        rng = rng_for(seed, "subject", "amputee", i)
        amputees.append(
            SubjectMeta(
                id=f"amp{i:02d}",
                height=float(rng.normal(1.72, 0.07)),
                mass=float(rng.normal(72.0, 8.0)),
                age=float(rng.uniform(20.0, 60.0)),
                kind="amputee",
            )
        )
    return able, amputees


@dataclass
class Dataset:
    """In-memory form of one synthetic data directory."""

    able_subjects: list
    amputee_subjects: list
    tasks: list
    amputee_task: int
    able_streams: dict  # (subject_id, task) -> GaitStream
    amputee_streams: dict  # subject_id -> GaitStream (amputee_task only)


def generate_dataset(synth_cfg, n_able, n_amputee, tasks, amputee_task,
                     cycles_able, cycles_amputee):
    if amputee_task not in tasks:
        raise ConfigError(f"amputee_task {amputee_task} not in tasks {tasks}")
    able, amputees = generate_subjects(n_able, n_amputee, synth_cfg.seed)
    able_streams = {
        (s.id, task): synth_able(synth_cfg, s, task, cycles_able)
        for s in able
        for task in tasks
    }
    amputee_streams = {
        s.id: synth_amputee(synth_cfg, s, amputee_task, cycles_amputee)
        for s in amputees
    }
    return Dataset(
        able_subjects=able,
        amputee_subjects=amputees,
        tasks=list(tasks),
        amputee_task=amputee_task,
        able_streams=able_streams,
        amputee_streams=amputee_streams,
    )
