"""Command-line pipeline.

Subcommands mirror the pipeline stages; every stage is a pure function
of (input files, config, seed) to output files, stages communicate only
via files, and cross-stage checksums are validated so an artifact built
from a different model is rejected with a provenance error.

Exit codes: 0 success, 2 validation/config/usage, 3 I/O,
4 provenance mismatch, 5 numeric/data error.
"""

import argparse
import json
import sys

import numpy as np

from . import checkpoint as ckpt
from . import config as cfgmod
from . import dataio, datagen, evaluate, report
from . import foundation as fnd
from . import templates as tmpl
from .errors import (
    ConfigError,
    DimensionError,
    FormatError,
    InsufficientDataError,
    MissingHeadError,
    NumericError,
    ProvenanceError,
    UsageError,
)
from .rngtools import derive_seed

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_PROVENANCE = 4
EXIT_NUMERIC = 5

_VALIDATION_ERRORS = (
    ConfigError,
    DimensionError,
    UsageError,
    MissingHeadError,
    InsufficientDataError,
    FormatError,
)


def _load_config(args):
    cfg = cfgmod.load_config(args.config) if args.config else cfgmod.ExperimentConfig()
    cfgmod.validate_config(cfg)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    return cfg


def _write_json(path, doc):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _read_json(path):
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON ({exc})") from None


def _array_payload(arr):
    return {"shape": list(arr.shape), "values": ckpt.array_to_text(arr)}


def _array_from_payload(payload):
    return ckpt.text_to_array(payload["values"], tuple(payload["shape"]))


# --- synth ---------------------------------------------------------------

def cmd_synth(args):
    cfg = _load_config(args)
    d = cfg.data
    dataset = datagen.generate_dataset(
        cfgmod.synth_config(cfg), d.n_able, d.n_amputee, list(d.tasks),
        d.amputee_task, d.cycles_able, d.cycles_amputee,
    )
    dataio.write_dataset(dataset, args.out, cfg.seed)
    n_files = len(dataset.able_streams) + len(dataset.amputee_streams)
    print(f"wrote {n_files} stream files + manifest to {args.out}")
    return EXIT_OK


# --- train-foundation ----------------------------------------------------

def _train_foundation_pipeline(cfg, dataset):
    holdout = cfg.foundation.holdout_fraction
    window_len, stride = cfg.window.length, cfg.window.stride
    train_streams, holdout_streams = {}, {}
    for key, stream in dataset.able_streams.items():
        train_streams[key], holdout_streams[key] = evaluate.split_able_stream(
            stream, holdout
        )
    stats = datagen.fit_normalizer([train_streams[k] for k in sorted(train_streams)])
    train_samples = []
    for key in sorted(train_streams):
        normalized = datagen.apply_normalizer(stats, train_streams[key])
        train_samples.extend(datagen.make_windows(normalized, window_len, stride))
    model, history = fnd.train_foundation(
        train_samples, cfgmod.foundation_train_config(cfg)
    )
    fnd.freeze(model)
    holdout_r2 = {}
    for task in cfg.data.tasks:
        preds, targets = [], []
        for key in sorted(holdout_streams):
            if key[1] != task:
                continue
            normalized = datagen.apply_normalizer(stats, holdout_streams[key])
            samples = datagen.make_windows(normalized, window_len, stride)
            values = np.stack([s.window.values for s in samples])
            preds.append(fnd.predict_batch(model, values, task))
            targets.append(np.stack([s.target for s in samples]))
        holdout_r2[task] = evaluate.r2(np.concatenate(preds), np.concatenate(targets))
    return model, stats, history, holdout_r2


def cmd_train_foundation(args):
    cfg = _load_config(args)
    dataset = dataio.load_dataset(args.data)
    model, stats, history, holdout_r2 = _train_foundation_pipeline(cfg, dataset)
    ckpt.save_foundation_bundle(args.out, model, stats, cfg.to_dict())
    print(f"final training loss {history[-1]:.6f} over {len(history)} epochs")
    for task in sorted(holdout_r2):
        print(f"task {task}: held-out R^2 = {holdout_r2[task]:.4f}")
    print(f"saved foundation checkpoint to {args.out}")
    return EXIT_OK


def _load_frozen_foundation(path, cfg):
    model, stats, _ = ckpt.load_foundation_bundle(path)
    if not model.frozen:
        fnd.freeze(model)
    if model.window_len != cfg.window.length:
        raise ConfigError(
            f"checkpoint window length {model.window_len} != config "
            f"window.length {cfg.window.length}"
        )
    return model, stats


# --- build-index ---------------------------------------------------------

def cmd_build_index(args):
    cfg = _load_config(args)
    dataset = dataio.load_dataset(args.data)
    model, stats = _load_frozen_foundation(args.model, cfg)
    entries = {}
    for amputee in dataset.amputee_subjects:
        matched_id, index = evaluate.build_amputee_index(
            dataset, model, stats, cfg.window.length, cfg, amputee
        )
        entries[amputee.id] = {
            "matched_able": matched_id,
            "task": index.task,
            "model_checksum": index.model_checksum,
            "checksum": tmpl.index_checksum(index),
            "windows": _array_payload(index.windows),
            "outputs": _array_payload(index.outputs),
            "time_indices": _array_payload(index.time_indices.astype(np.float64)),
        }
        print(f"{amputee.id}: index of {len(index)} entries "
              f"(matched {matched_id})")
    doc = {
        "format_version": 1,
        "kind": "indices",
        "amputee_task": dataset.amputee_task,
        "foundation_checksum": ckpt.model_checksum(model),
        "entries": entries,
    }
    _write_json(args.out, doc)
    print(f"saved indices to {args.out}")
    return EXIT_OK


def _load_indices(path, model):
    doc = _read_json(path)
    for key in ("kind", "foundation_checksum", "entries"):
        if key not in doc:
            raise FormatError(f"{path}: missing key '{key}'")
    if doc["kind"] != "indices":
        raise FormatError(f"{path}: expected an indices artifact")
    current = ckpt.model_checksum(model)
    if doc["foundation_checksum"] != current:
        raise ProvenanceError(
            f"{path}: indices were built from foundation "
            f"{doc['foundation_checksum'][:12]}..., loaded checkpoint is "
            f"{current[:12]}..."
        )
    indices = {}
    for sid, entry in doc["entries"].items():
        index = tmpl.AbleBodiedIndex(
            windows=_array_from_payload(entry["windows"]),
            outputs=_array_from_payload(entry["outputs"]),
            time_indices=_array_from_payload(entry["time_indices"]).astype(int),
            task=int(entry["task"]),
            model_checksum=entry["model_checksum"],
        )
        if entry["model_checksum"] != current:
            raise ProvenanceError(
                f"{path}: index for {sid} was built from a different foundation "
                f"checkpoint ({entry['model_checksum'][:12]}...)"
            )
        if tmpl.index_checksum(index) != entry["checksum"]:
            raise ProvenanceError(f"{path}: index for {sid} fails its checksum")
        indices[sid] = (entry["matched_able"], index)
    return indices


# --- map-templates -------------------------------------------------------

def cmd_map_templates(args):
    cfg = _load_config(args)
    if not 0.0 < args.ratio <= 1.0:
        raise ConfigError("--ratio must lie in (0, 1]")
    dataset = dataio.load_dataset(args.data)
    model, stats = _load_frozen_foundation(args.model, cfg)
    indices = _load_indices(args.indices, model)
    cases = evaluate.prepare_cases(
        dataset, model, stats, cfg.window.length, cfg, indices=indices
    )
    template_cfg = cfgmod.template_config(cfg)
    records = {}
    for case in cases:
        n = len(case.windows)
        n_train = n if args.ratio == 1.0 else int(np.floor(args.ratio * n))
        if n_train < 1:
            raise ConfigError(f"--ratio {args.ratio} leaves no samples")
        desired = tmpl.DesiredOutputSeries(
            values=case.targets[:n_train], phases=case.target_phases[:n_train]
        )
        result = tmpl.compute_corrections(case.index, desired, template_cfg)
        records[case.subject_id] = {
            "matched_able": case.matched_able_id,
            "n_samples": n_train,
            "skipped": result.skipped,
            "templates": [
                {
                    "k": t.sample_index,
                    "center": t.matched_center,
                    "neighbors": [int(i) for i in t.neighbor_indices],
                    "weights": ckpt.array_to_text(t.weights),
                    "corrected": _array_payload(t.corrected.values),
                }
                for t in result.templates
            ],
        }
        print(
            f"{case.subject_id}: {len(result.templates)} templates, "
            f"{len(result.skipped)} skipped boundary samples"
        )
    doc = {
        "format_version": 1,
        "kind": "templates",
        "ratio": args.ratio,
        "foundation_checksum": ckpt.model_checksum(model),
        "index_checksums": {
            sid: tmpl.index_checksum(index) for sid, (_, index) in indices.items()
        },
        "template_config": {
            "m": template_cfg.m,
            "n_neighbors": template_cfg.n_neighbors,
            "epsilon": template_cfg.epsilon,
            "weighting": template_cfg.weighting,
        },
        "records": records,
    }
    _write_json(args.out, doc)
    print(f"saved templates to {args.out}")
    return EXIT_OK


# --- train-refurbish -----------------------------------------------------

def cmd_train_refurbish(args):
    import os

    from . import refurbish as rfb

    cfg = _load_config(args)
    dataset = dataio.load_dataset(args.data)
    model, stats = _load_frozen_foundation(args.model, cfg)
    doc = _read_json(args.templates)
    if doc.get("kind") != "templates":
        raise FormatError(f"{args.templates}: expected a templates artifact")
    current = ckpt.model_checksum(model)
    if doc["foundation_checksum"] != current:
        raise ProvenanceError(
            f"{args.templates}: templates were computed against foundation "
            f"{doc['foundation_checksum'][:12]}..., loaded checkpoint is "
            f"{current[:12]}..."
        )
    cases = evaluate.prepare_cases(dataset, model, stats, cfg.window.length, cfg)
    by_id = {c.subject_id: c for c in cases}
    os.makedirs(args.out, exist_ok=True)
    for sid, record in sorted(doc["records"].items()):
        case = by_id.get(sid)
        if case is None:
            raise ConfigError(f"{args.templates}: unknown amputee '{sid}'")
        triples = []
        for entry in record["templates"]:
            k = int(entry["k"])
            corrected = _array_from_payload(entry["corrected"])
            triples.append(
                rfb.AmputeeTrainingTriple(
                    x_amp=fnd.TimeWindow(case.windows[k], case.task, k),
                    x_corr=fnd.TimeWindow(corrected, case.task, k),
                    y_amp=case.targets[k],
                )
            )
        run_seed = derive_seed(cfg.seed, "refurbish-cli", sid)
        h, history = rfb.train_refurbish(
            triples, model, cfgmod.refurbish_train_config(cfg, run_seed)
        )
        out_path = os.path.join(args.out, f"refurbish_{sid}.json")
        snapshot = cfg.to_dict()
        snapshot["provenance"] = {"foundation_checksum": current, "amputee": sid}
        ckpt.save_model(out_path, h, snapshot)
        print(
            f"{sid}: trained on {len(triples)} triples, final loss "
            f"{history[-1]:.6f}, saved {out_path}"
        )
    return EXIT_OK


# --- eval ----------------------------------------------------------------

def cmd_eval(args):
    cfg = _load_config(args)
    if args.strategy != "all":
        cfg.eval.strategies = [args.strategy]
    if args.ratios:
        try:
            cfg.eval.ratios = [float(tok) for tok in args.ratios.split(",")]
        except ValueError:
            raise ConfigError(f"--ratios '{args.ratios}' is not a comma list") from None
        cfgmod.validate_config(cfg)
    dataset = dataio.load_dataset(args.data)
    model, stats = _load_frozen_foundation(args.model, cfg)
    indices = _load_indices(args.indices, model)
    cases = evaluate.prepare_cases(
        dataset, model, stats, cfg.window.length, cfg, indices=indices
    )
    sweep_report = evaluate.sweep(model, cases, cfg, cfg.seed,
                                  snapshot=cfg.to_dict())
    doc = {
        "format_version": 1,
        "kind": "results",
        "aggregation": sweep_report.aggregation,
        "provenance": sweep_report.provenance,
        "config": cfg.to_dict(),
        "results": [
            {
                "strategy": r.strategy,
                "train_ratio": r.train_ratio,
                "seed": r.seed,
                "amputee_ids": r.amputee_ids,
                "r2_values": ckpt.array_to_text(np.array(r.r2_values)),
                "mean": r.mean,
                "std": r.std,
            }
            for r in sweep_report.results
        ],
    }
    _write_json(args.out, doc)
    for r in sweep_report.results:
        print(
            f"{r.strategy:<12} ratio {r.train_ratio:<5g} "
            f"R^2 {r.mean:+.3f} +/- {r.std:.3f}"
        )
    print(f"saved results to {args.out}")
    return EXIT_OK


# --- report --------------------------------------------------------------

def cmd_report(args):
    doc = _read_json(args.results)
    if doc.get("kind") != "results":
        raise FormatError(f"{args.results}: expected a results artifact")
    results = []
    for entry in doc["results"]:
        values = [float(tok) for tok in entry["r2_values"].split()]
        results.append(
            evaluate.StrategyResult(
                strategy=entry["strategy"],
                train_ratio=float(entry["train_ratio"]),
                amputee_ids=list(entry["amputee_ids"]),
                r2_values=values,
                mean=float(entry["mean"]),
                std=float(entry["std"]),
                seed=int(entry["seed"]),
            )
        )
    sweep_report = evaluate.SweepReport(
        results=results,
        provenance=doc.get("provenance", {}),
        aggregation=doc.get("aggregation", "amputees"),
    )
    paths = report.emit_report(sweep_report, args.out)
    for name, path in sorted(paths.items()):
        print(f"wrote {name}: {path}")
    return EXIT_OK


# --- parser / entry ------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="reprogait",
        description=(
            "Missing-limb joint-motion prediction by reprogramming a frozen "
            "multi-task gait model at the input level."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON experiment config (defaults used if omitted)")
        p.add_argument("--seed", type=int, help="override the config seed")

    p = sub.add_parser("synth", help="generate the synthetic dataset directory")
    common(p)
    p.add_argument("--out", required=True, help="output dataset directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train-foundation", help="train + freeze the multi-task model")
    common(p)
    p.add_argument("--data", required=True, help="dataset directory from synth")
    p.add_argument("--out", required=True, help="checkpoint path to write")
    p.set_defaults(func=cmd_train_foundation)

    p = sub.add_parser("build-index", help="build per-amputee able input-output indices")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True, help="foundation checkpoint")
    p.add_argument("--out", required=True, help="indices artifact path")
    p.set_defaults(func=cmd_build_index)

    p = sub.add_parser("map-templates", help="compute correction templates")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--indices", required=True)
    p.add_argument("--ratio", type=float, default=0.1,
                   help="training prefix fraction to map (default 0.1)")
    p.add_argument("--out", required=True, help="templates artifact path")
    p.set_defaults(func=cmd_map_templates)

    p = sub.add_parser("train-refurbish", help="train per-amputee refurbish modules")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--templates", required=True)
    p.add_argument("--out", required=True, help="directory for refurbish checkpoints")
    p.set_defaults(func=cmd_train_refurbish)

    p = sub.add_parser("eval", help="run the strategy comparison")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--indices", required=True)
    p.add_argument("--strategy", default="all",
                   choices=["all", "cross", "direct", "refurbished"])
    p.add_argument("--ratios", help="comma-separated train ratios (overrides config)")
    p.add_argument("--out", required=True, help="results artifact path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="emit CSV + summary + chart from results")
    common(p)
    p.add_argument("--results", required=True, help="results artifact from eval")
    p.add_argument("--out", required=True, help="report output directory")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ProvenanceError as exc:
        print(f"provenance error: {exc}", file=sys.stderr)
        return EXIT_PROVENANCE
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
