"""Experiment configuration: one JSON document drives the whole pipeline.

Every field is validated with an error naming the offending key.  The
defaults encode the grid-search winners used throughout: a matched
sequence of length 1 (m=0), 5 neighbors with linear weighting, and dual
loss weights alpha=1, beta=20.
"""

import json
from dataclasses import asdict, dataclass, field

from . import datagen
from .errors import ConfigError
from .refurbish import RefurbishTrainConfig
from .rngtools import derive_seed
from .templates import WEIGHTINGS, TemplateConfig


@dataclass
class DataSection:
    n_able: int = 10
    n_amputee: int = 3
    tasks: list = field(default_factory=lambda: [0, 1, 2])
    amputee_task: int = 0
    cycles_able: int = 60
    cycles_amputee: int = 30
    samples_per_cycle: int = 25
    n_channels: int = 6
    harmonics: int = 5
    noise_std: float = 0.10
    cycle_amp_jitter: float = 0.08
    cycle_phase_jitter: float = 0.015
    dropout_channels: list = field(default_factory=lambda: [0])
    phase_lag: float = 0.10
    asymmetry: float = 1.25
    comp_harmonic: int = 3
    comp_amplitude: float = 0.35
    amputee_noise_scale: float = 5.0


@dataclass
class WindowSection:
    length: int = 20
    stride: int = 1


@dataclass
class FoundationSection:
    conv_channels: list = field(default_factory=lambda: [12, 12])
    kernel_size: int = 3
    dilations: list = field(default_factory=lambda: [1, 2])
    hidden_dim: int = 24
    epochs: int = 8
    batch_size: int = 64
    learning_rate: float = 3e-3
    holdout_fraction: float = 0.2


@dataclass
class TemplateSection:
    m: int = 0
    n_neighbors: int = 5
    epsilon: float = 2.0
    weighting: str = "linear"


@dataclass
class RefurbishSection:
    alpha: float = 1.0
    beta: float = 20.0
    conv_channels: list = field(default_factory=lambda: [10])
    kernel_size: int = 3
    dilations: list = field(default_factory=lambda: [1])
    epochs: int = 60
    batch_size: int = 16
    learning_rate: float = 3e-3
    pooled: bool = False


@dataclass
class DirectSection:
    epochs: int = 60
    batch_size: int = 16
    learning_rate: float = 3e-3


@dataclass
class EvalSection:
    ratios: list = field(default_factory=lambda: [0.05, 0.1, 0.2, 0.4])
    strategies: list = field(default_factory=lambda: ["cross", "direct", "refurbished"])


@dataclass
class ExperimentConfig:
    seed: int = 7
    data: DataSection = field(default_factory=DataSection)
    window: WindowSection = field(default_factory=WindowSection)
    foundation: FoundationSection = field(default_factory=FoundationSection)
    template: TemplateSection = field(default_factory=TemplateSection)
    refurbish: RefurbishSection = field(default_factory=RefurbishSection)
    direct: DirectSection = field(default_factory=DirectSection)
    eval: EvalSection = field(default_factory=EvalSection)

    def to_dict(self):
        return asdict(self)


_SECTIONS = {
    "data": DataSection,
    "window": WindowSection,
    "foundation": FoundationSection,
    "template": TemplateSection,
    "refurbish": RefurbishSection,
    "direct": DirectSection,
    "eval": EvalSection,
}


def _check_type(path, value, expect):
    if expect is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path} must be a number, got {value!r}")
        return float(value)
    if expect is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path} must be an integer, got {value!r}")
        return value
    if expect is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path} must be a boolean, got {value!r}")
        return value
    if expect is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path} must be a string, got {value!r}")
        return value
    if expect is list:
        if not isinstance(value, list):
            raise ConfigError(f"{path} must be a list, got {value!r}")
        return list(value)
    raise AssertionError(expect)


def _fill_section(cls, payload, path):
    if not isinstance(payload, dict):
        raise ConfigError(f"{path} must be an object")
    section = cls()
    fields = {f: type(getattr(section, f)) for f in section.__dataclass_fields__}
    for key, value in payload.items():
        if key not in fields:
            raise ConfigError(f"unknown config field {path}.{key}")
        setattr(section, key, _check_type(f"{path}.{key}", value, fields[key]))
    return section


def config_from_dict(doc):
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    cfg = ExperimentConfig()
    for key, value in doc.items():
        if key == "seed":
            cfg.seed = _check_type("seed", value, int)
        elif key in _SECTIONS:
            setattr(cfg, key, _fill_section(_SECTIONS[key], value, key))
        else:
            raise ConfigError(f"unknown config field {key}")
    validate_config(cfg)
    return cfg


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return config_from_dict(doc)


def validate_config(cfg):
    d = cfg.data
    if d.n_able < 1:
        raise ConfigError("data.n_able must be >= 1")
    if d.n_amputee < 1:
        raise ConfigError("data.n_amputee must be >= 1")
    if not d.tasks:
        raise ConfigError("data.tasks must be non-empty")
    if len(set(d.tasks)) != len(d.tasks):
        raise ConfigError("data.tasks must be unique")
    if d.amputee_task not in d.tasks:
        raise ConfigError("data.amputee_task must be one of data.tasks")
    if d.cycles_able < 1 or d.cycles_amputee < 1:
        raise ConfigError("data.cycles_able and data.cycles_amputee must be >= 1")
    if d.samples_per_cycle < 2:
        raise ConfigError("data.samples_per_cycle must be >= 2")
    if d.n_channels < 1:
        raise ConfigError("data.n_channels must be >= 1")
    if d.harmonics < 1:
        raise ConfigError("data.harmonics must be >= 1")
    if d.noise_std < 0:
        raise ConfigError("data.noise_std must be nonnegative")
    if d.cycle_amp_jitter < 0 or d.cycle_phase_jitter < 0:
        raise ConfigError("data cycle jitter fields must be nonnegative")
    if d.amputee_noise_scale < 0:
        raise ConfigError("data.amputee_noise_scale must be nonnegative")
    if any(not 0 <= c < d.n_channels for c in d.dropout_channels):
        raise ConfigError("data.dropout_channels must be valid channel indices")
    if d.asymmetry <= 0:
        raise ConfigError("data.asymmetry must be positive")
    if d.comp_harmonic < 1:
        raise ConfigError("data.comp_harmonic must be >= 1")

    if cfg.window.length < 1:
        raise ConfigError("window.length must be >= 1")
    if cfg.window.stride < 1:
        raise ConfigError("window.stride must be >= 1")
    if cfg.window.length + 1 > d.cycles_amputee * d.samples_per_cycle:
        raise ConfigError("window.length too long for the amputee stream length")

    f = cfg.foundation
    if not f.conv_channels or any(c < 1 for c in f.conv_channels):
        raise ConfigError("foundation.conv_channels must be positive")
    if len(f.conv_channels) != len(f.dilations):
        raise ConfigError(
            "foundation.dilations must match foundation.conv_channels in length"
        )
    if f.kernel_size < 1 or any(x < 1 for x in f.dilations):
        raise ConfigError("foundation.kernel_size and dilations must be >= 1")
    if f.hidden_dim < 1 or f.epochs < 1 or f.batch_size < 1:
        raise ConfigError("foundation.hidden_dim/epochs/batch_size must be >= 1")
    if f.learning_rate <= 0:
        raise ConfigError("foundation.learning_rate must be positive")
    if not 0.0 < f.holdout_fraction < 1.0:
        raise ConfigError("foundation.holdout_fraction must lie in (0, 1)")

    t = cfg.template
    if t.m < 0:
        raise ConfigError("template.m must be nonnegative")
    if t.n_neighbors < 1:
        raise ConfigError("template.n_neighbors must be >= 1")
    if t.epsilon <= 0:
        raise ConfigError("template.epsilon must be positive")
    if t.weighting not in WEIGHTINGS:
        raise ConfigError(f"template.weighting must be one of {WEIGHTINGS}")

    r = cfg.refurbish
    if r.alpha < 0 or r.beta < 0:
        raise ConfigError("refurbish.alpha and refurbish.beta must be nonnegative")
    if r.alpha + r.beta <= 0:
        raise ConfigError("refurbish.alpha + refurbish.beta must be positive")
    if not r.conv_channels or len(r.conv_channels) != len(r.dilations):
        raise ConfigError(
            "refurbish.dilations must match refurbish.conv_channels in length"
        )
    if r.epochs < 1 or r.batch_size < 1 or r.learning_rate <= 0:
        raise ConfigError("refurbish.epochs/batch_size/learning_rate invalid")

    if cfg.direct.epochs < 1 or cfg.direct.batch_size < 1:
        raise ConfigError("direct.epochs/batch_size must be >= 1")
    if cfg.direct.learning_rate <= 0:
        raise ConfigError("direct.learning_rate must be positive")

    e = cfg.eval
    if not e.ratios:
        raise ConfigError("eval.ratios must be non-empty")
    if any(not 0.0 < r_ < 1.0 for r_ in e.ratios):
        raise ConfigError("eval.ratios must lie in (0, 1)")
    if sorted(e.ratios) != e.ratios:
        raise ConfigError("eval.ratios must be sorted ascending")
    unknown = set(e.strategies) - {"cross", "direct", "refurbished"}
    if unknown:
        raise ConfigError(f"eval.strategies contains unknown entries {sorted(unknown)}")
    return cfg


# --- bridges from config sections to module-level config objects --------

def synth_config(cfg):
    d = cfg.data
    return datagen.SynthConfig(
        tables=datagen.default_tables(d.tasks, d.n_channels, d.harmonics, cfg.seed),
        samples_per_cycle=d.samples_per_cycle,
        noise_std=d.noise_std,
        cycle_amp_jitter=d.cycle_amp_jitter,
        cycle_phase_jitter=d.cycle_phase_jitter,
        distortion=datagen.AmputeeDistortion(
            dropout_channels=list(d.dropout_channels),
            phase_lag=d.phase_lag,
            asymmetry=d.asymmetry,
            comp_harmonic=d.comp_harmonic,
            comp_amplitude=d.comp_amplitude,
            noise_scale=d.amputee_noise_scale,
        ),
        seed=cfg.seed,
    )


def foundation_train_config(cfg):
    from .foundation import FoundationTrainConfig

    f = cfg.foundation
    return FoundationTrainConfig(
        tasks=list(cfg.data.tasks),
        conv_channels=list(f.conv_channels),
        kernel_size=f.kernel_size,
        dilations=list(f.dilations),
        hidden_dim=f.hidden_dim,
        epochs=f.epochs,
        batch_size=f.batch_size,
        learning_rate=f.learning_rate,
        seed=derive_seed(cfg.seed, "foundation"),
    )


def template_config(cfg):
    t = cfg.template
    return TemplateConfig(
        m=t.m, n_neighbors=t.n_neighbors, epsilon=t.epsilon, weighting=t.weighting
    )


def refurbish_train_config(cfg, run_seed):
    r = cfg.refurbish
    return RefurbishTrainConfig(
        alpha=r.alpha,
        beta=r.beta,
        conv_channels=list(r.conv_channels),
        kernel_size=r.kernel_size,
        dilations=list(r.dilations),
        epochs=r.epochs,
        batch_size=r.batch_size,
        learning_rate=r.learning_rate,
        seed=run_seed,
    )


def direct_train_config(cfg, task, run_seed):
    from .foundation import FoundationTrainConfig

    f = cfg.foundation
    return FoundationTrainConfig(
        tasks=[task],
        conv_channels=list(f.conv_channels),
        kernel_size=f.kernel_size,
        dilations=list(f.dilations),
        hidden_dim=f.hidden_dim,
        epochs=cfg.direct.epochs,
        batch_size=cfg.direct.batch_size,
        learning_rate=cfg.direct.learning_rate,
        seed=run_seed,
    )
