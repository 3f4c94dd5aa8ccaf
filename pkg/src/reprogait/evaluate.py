"""Experiment harness: the three mapping strategies and the ratio sweep.

Strategies compared on each synthetic amputee, all against the desired
outputs derived from the anthropometry-matched able subject:

  cross       zero-shot: frozen foundation on raw amputee windows;
  direct      fresh per-amputee model trained on the first
              floor(ratio*N) windows, evaluated on the rest;
  refurbished correction templates computed on the training split only,
              a refurbish module trained on them, then the frozen
              foundation evaluated on corrected held-out windows.

Splits are temporal (train prefix, evaluation suffix) and every run's
seed is derived from (base seed, strategy, ratio, amputee), so results
are independent of execution order.
"""

from dataclasses import dataclass, field

import numpy as np

from . import config as cfgmod
from . import datagen, foundation, refurbish, templates
from .checkpoint import fmt17, model_checksum
from .errors import ConfigError, DimensionError, MetricError
from .rngtools import derive_seed

STRATEGIES = ("cross", "direct", "refurbished")


def r2(preds, targets):
    """Coefficient of determination 1 - SS_res/SS_tot over a sample list."""
    preds = np.asarray(preds, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if preds.shape != targets.shape:
        raise DimensionError(
            f"prediction shape {preds.shape} != target shape {targets.shape}"
        )
    if preds.size == 0:
        raise MetricError("r2 is undefined on empty inputs")
    if preds.ndim == 1:
        preds, targets = preds[:, None], targets[:, None]
    ybar = targets.mean(axis=0)
    ss_tot = float(((targets - ybar) ** 2).sum())
    if ss_tot == 0.0:
        raise MetricError("r2 is undefined for a constant target")
    ss_res = float(((targets - preds) ** 2).sum())
    return 1.0 - ss_res / ss_tot


@dataclass
class AmputeeCase:
    """Everything one amputee contributes to a strategy run."""

    subject_id: str
    matched_able_id: str
    task: int
    windows: np.ndarray  # (N, C, T) normalized amputee windows, stream order
    targets: np.ndarray  # (N, O) desired outputs, one step past each window
    target_phases: np.ndarray  # (N,) gait phase of each target
    index: templates.AbleBodiedIndex


@dataclass
class StrategyResult:
    strategy: str
    train_ratio: float
    amputee_ids: list
    r2_values: list
    mean: float
    std: float
    seed: int
    config_snapshot: dict = field(default_factory=dict)


@dataclass
class SweepReport:
    results: list
    provenance: dict
    aggregation: str = "amputees"  # the +/- spread is across amputees


def _aggregate(strategy, ratio, ids, scores, seed, snapshot):
    values = [float(v) for v in scores]
    return StrategyResult(
        strategy=strategy,
        train_ratio=float(ratio),
        amputee_ids=list(ids),
        r2_values=values,
        mean=float(np.mean(values)),
        std=float(np.std(values)),  # population std over amputees
        seed=seed,
        config_snapshot=snapshot or {},
    )


def _split_point(case, ratio):
    n_train = int(np.floor(ratio * len(case.windows)))
    if n_train < 1:
        raise ConfigError(
            f"ratio {ratio} leaves {case.subject_id} with no training samples"
        )
    if n_train >= len(case.windows):
        raise ConfigError(
            f"ratio {ratio} leaves {case.subject_id} with no evaluation samples"
        )
    return n_train


def run_cross_mapping(model, cases, seed=0, snapshot=None):
    """Zero-shot baseline: no amputee training at all, scored on everything."""
    foundation.require_frozen(model, "run_cross_mapping")
    scores = []
    for case in cases:
        preds = foundation.predict_batch(model, case.windows, case.task)
        scores.append(r2(preds, case.targets))
    return _aggregate(
        "cross", 1.0, [c.subject_id for c in cases], scores, seed, snapshot
    )


def run_direct_mapping(cases, ratio, exp_cfg, seed=0, snapshot=None):
    """Per-amputee model trained from scratch on the training prefix."""
    scores = []
    for case in cases:
        n_train = _split_point(case, ratio)
        run_seed = derive_seed(seed, "direct", fmt17(ratio), case.subject_id)
        train_cfg = cfgmod.direct_train_config(exp_cfg, case.task, run_seed)
        train_cfg.batch_size = min(train_cfg.batch_size, n_train)
        samples = [
            foundation.LabeledSample(
                window=foundation.TimeWindow(case.windows[i], case.task, i),
                target=case.targets[i],
            )
            for i in range(n_train)
        ]
        model, _ = foundation.train_foundation(samples, train_cfg)
        preds = foundation.predict_batch(model, case.windows[n_train:], case.task)
        scores.append(r2(preds, case.targets[n_train:]))
    return _aggregate(
        "direct", ratio, [c.subject_id for c in cases], scores, seed, snapshot
    )


def make_training_triples(case, n_train, template_cfg):
    """Correction templates over the training prefix only -> training triples."""
    desired = templates.DesiredOutputSeries(
        values=case.targets[:n_train],
        phases=case.target_phases[:n_train],
    )
    result = templates.compute_corrections(case.index, desired, template_cfg)
    triples = []
    for t in result.templates:
        k = t.sample_index
        triples.append(
            refurbish.AmputeeTrainingTriple(
                x_amp=foundation.TimeWindow(case.windows[k], case.task, k),
                x_corr=t.corrected,
                y_amp=case.targets[k],
            )
        )
    return triples, result.skipped


def train_refurbished_models(model, cases, ratio, template_cfg, exp_cfg, seed,
                             pooled=False):
    """One refurbish module per amputee (or one shared, pooled=True)."""
    foundation.require_frozen(model, "train_refurbished_models")
    if pooled:
        pool = []
        for case in cases:
            triples, _ = make_training_triples(
                case, _split_point(case, ratio), template_cfg
            )
            pool.extend(triples)
        run_seed = derive_seed(seed, "refurbish", fmt17(ratio), "pooled")
        h, _ = refurbish.train_refurbish(
            pool, model, cfgmod.refurbish_train_config(exp_cfg, run_seed)
        )
        return {case.subject_id: h for case in cases}
    out = {}
    for case in cases:
        triples, _ = make_training_triples(
            case, _split_point(case, ratio), template_cfg
        )
        run_seed = derive_seed(seed, "refurbish", fmt17(ratio), case.subject_id)
        h, _ = refurbish.train_refurbish(
            triples, model, cfgmod.refurbish_train_config(exp_cfg, run_seed)
        )
        out[case.subject_id] = h
    return out


def run_refurbished(model, cases, ratio, template_cfg, exp_cfg, seed=0,
                    snapshot=None, pooled=False):
    """Frozen foundation fed with refurbished held-out windows."""
    models = train_refurbished_models(
        model, cases, ratio, template_cfg, exp_cfg, seed, pooled=pooled
    )
    scores = []
    for case in cases:
        n_train = _split_point(case, ratio)
        h = models[case.subject_id]
        corrected = refurbish.forward_batch(h, case.windows[n_train:])
        preds = foundation.predict_batch(model, corrected, case.task)
        scores.append(r2(preds, case.targets[n_train:]))
    return _aggregate(
        "refurbished", ratio, [c.subject_id for c in cases], scores, seed, snapshot
    )


def template_tracking_rmse(model_h, case, ratio, template_cfg):
    """Held-out per-amputee RMSE of h(x_amp) vs x_corr, next to the no-op
    RMSE of x_amp vs x_corr (templates computed here for evaluation only)."""
    n_train = _split_point(case, ratio)
    desired = templates.DesiredOutputSeries(
        values=case.targets[n_train:], phases=case.target_phases[n_train:]
    )
    result = templates.compute_corrections(case.index, desired, template_cfg)
    ks = np.array([t.sample_index for t in result.templates]) + n_train
    corr = np.stack([t.corrected.values for t in result.templates])
    raw = case.windows[ks]
    mapped = refurbish.forward_batch(model_h, raw)
    rmse_mapped = float(np.sqrt(np.mean((mapped - corr) ** 2)))
    rmse_raw = float(np.sqrt(np.mean((raw - corr) ** 2)))
    return rmse_mapped, rmse_raw


def sweep(model, cases, exp_cfg, seed, snapshot=None):
    """Cartesian (strategy x ratio) runs: cross once, the others per ratio."""
    ratios = list(exp_cfg.eval.ratios)
    if sorted(ratios) != ratios:
        raise ConfigError("ratios must be sorted ascending")
    strategies = list(exp_cfg.eval.strategies)
    for s in strategies:
        if s not in STRATEGIES:
            raise ConfigError(f"unknown strategy '{s}'")
    template_cfg = cfgmod.template_config(exp_cfg)
    results = []
    if "cross" in strategies:
        results.append(run_cross_mapping(model, cases, seed=seed, snapshot=snapshot))
    for ratio in ratios:
        if "direct" in strategies:
            results.append(
                run_direct_mapping(cases, ratio, exp_cfg, seed=seed, snapshot=snapshot)
            )
        if "refurbished" in strategies:
            results.append(
                run_refurbished(
                    model, cases, ratio, template_cfg, exp_cfg, seed=seed,
                    snapshot=snapshot, pooled=exp_cfg.refurbish.pooled,
                )
            )
    provenance = {
        "foundation_checksum": model_checksum(model),
        "indices": {
            c.subject_id: {
                "matched_able": c.matched_able_id,
                "checksum": templates.index_checksum(c.index),
            }
            for c in cases
        },
        "seed": seed,
    }
    return SweepReport(results=results, provenance=provenance)


# --- suite assembly ------------------------------------------------------

@dataclass
class EvalSuite:
    dataset: datagen.Dataset
    stats: datagen.NormalizationStats
    model: foundation.FoundationModel
    history: list
    holdout_r2: dict  # task -> r2 on held-out able windows
    cases: list
    config: object


def split_able_stream(stream, holdout_fraction):
    cut = int(np.floor(stream.channels.shape[1] * (1.0 - holdout_fraction)))
    return datagen.slice_stream(stream, 0, cut), datagen.slice_stream(stream, cut, None)


def build_amputee_index(dataset, model, stats, window_len, exp_cfg, amputee):
    """Index over the anthropometry-matched able subject's training sub-stream."""
    matched = datagen.match_anthropometry(amputee, dataset.able_subjects)
    able_stream = dataset.able_streams[(matched.id, dataset.amputee_task)]
    able_train, _ = split_able_stream(
        able_stream, exp_cfg.foundation.holdout_fraction
    )
    able_norm = datagen.apply_normalizer(stats, able_train)
    index_windows = [
        s.window for s in datagen.make_windows(able_norm, window_len, stride=1)
    ]
    return matched.id, templates.build_index(model, index_windows)


def prepare_cases(dataset, model, stats, window_len, exp_cfg, indices=None):
    """Normalized amputee windows + desired outputs + per-amputee able index.

    indices: optional {amputee_id: (matched_able_id, AbleBodiedIndex)} as
    loaded from a build-index artifact; built in place when omitted.
    """
    holdout = exp_cfg.foundation.holdout_fraction
    cases = []
    for amputee in dataset.amputee_subjects:
        if indices is None:
            matched_id, index = build_amputee_index(
                dataset, model, stats, window_len, exp_cfg, amputee
            )
        else:
            if amputee.id not in indices:
                raise ConfigError(f"no index for amputee {amputee.id}")
            matched_id, index = indices[amputee.id]
        able_stream = dataset.able_streams[(matched_id, dataset.amputee_task)]
        able_train, _ = split_able_stream(able_stream, holdout)
        amp_stream = datagen.apply_normalizer(
            stats, dataset.amputee_streams[amputee.id]
        )
        desired = datagen.derive_desired_outputs(amp_stream, able_train)
        samples = datagen.make_windows(amp_stream, window_len, stride=1)
        ks = np.array([s.window.time_index for s in samples])
        cases.append(
            AmputeeCase(
                subject_id=amputee.id,
                matched_able_id=matched_id,
                task=dataset.amputee_task,
                windows=np.stack([s.window.values for s in samples]),
                targets=desired.values[ks + 1],
                target_phases=desired.phases[ks + 1],
                index=index,
            )
        )
    return cases


def build_suite(exp_cfg, dataset=None):
    """In-memory end-to-end pipeline: dataset -> trained frozen model -> cases."""
    d = exp_cfg.data
    if dataset is None:
        dataset = datagen.generate_dataset(
            cfgmod.synth_config(exp_cfg), d.n_able, d.n_amputee, list(d.tasks),
            d.amputee_task, d.cycles_able, d.cycles_amputee,
        )
    holdout = exp_cfg.foundation.holdout_fraction
    train_streams, holdout_streams = {}, {}
    for key, stream in dataset.able_streams.items():
        train_streams[key], holdout_streams[key] = split_able_stream(stream, holdout)
    stats = datagen.fit_normalizer(
        [train_streams[k] for k in sorted(train_streams)]
    )
    window_len, stride = exp_cfg.window.length, exp_cfg.window.stride
    train_samples = []
    for key in sorted(train_streams):
        normalized = datagen.apply_normalizer(stats, train_streams[key])
        train_samples.extend(datagen.make_windows(normalized, window_len, stride))
    model, history = foundation.train_foundation(
        train_samples, cfgmod.foundation_train_config(exp_cfg)
    )
    foundation.freeze(model)

    holdout_r2 = {}
    for task in d.tasks:
        preds, targets = [], []
        for key in sorted(holdout_streams):
            if key[1] != task:
                continue
            normalized = datagen.apply_normalizer(stats, holdout_streams[key])
            samples = datagen.make_windows(normalized, window_len, stride)
            values = np.stack([s.window.values for s in samples])
            preds.append(foundation.predict_batch(model, values, task))
            targets.append(np.stack([s.target for s in samples]))
        holdout_r2[task] = r2(np.concatenate(preds), np.concatenate(targets))

    cases = prepare_cases(dataset, model, stats, window_len, exp_cfg)
    return EvalSuite(
        dataset=dataset, stats=stats, model=model, history=history,
        holdout_r2=holdout_r2, cases=cases, config=exp_cfg,
    )
