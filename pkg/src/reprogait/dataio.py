"""CSV stream files and dataset directories.

Stream schema (UTF-8, comma-separated, '.' decimal): header row
`time,phase,target,<channel names...>`, one row per timestep, no missing
cells, every value finite.  Floats are written with 17 significant
digits so an export/load round trip is bitwise exact and repeated
exports are byte-identical.

A dataset directory holds one CSV per (subject, task) plus a
manifest.json describing subjects, tasks and file names.
"""

import json
import math
import os

import numpy as np

from .checkpoint import fmt17
from .datagen import Dataset, GaitStream, SubjectMeta
from .errors import DataError, FormatError

MANIFEST_NAME = "manifest.json"


def save_stream_csv(stream, path):
    n_channels, length = stream.channels.shape
    if stream.target_series.shape[1] != 1:
        raise FormatError(
            f"csv schema has exactly one target column, stream has "
            f"{stream.target_series.shape[1]}"
        )
    header = ["time", "phase", "target"] + [f"c{i}" for i in range(n_channels)]
    lines = [",".join(header)]
    for t in range(length):
        row = [str(t), fmt17(stream.phase[t]), fmt17(stream.target_series[t, 0])]
        row.extend(fmt17(stream.channels[c, t]) for c in range(n_channels))
        lines.append(",".join(row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_float(token, line_no, column):
    try:
        value = float(token)
    except ValueError:
        raise FormatError(
            f"line {line_no}: column '{column}' value '{token}' is not a number"
        ) from None
    if not math.isfinite(value):
        raise DataError(f"line {line_no}: column '{column}' has non-finite value")
    return value


def load_stream_csv(path, subject=None, task=0):
    """Parse one stream file; errors cite 1-based file line numbers."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise FormatError("line 1: file is empty, expected a header row")
    header = lines[0].split(",")
    expected_prefix = ["time", "phase", "target"]
    for i, name in enumerate(expected_prefix):
        if i >= len(header) or header[i] != name:
            raise FormatError(
                f"line 1: header must start with 'time,phase,target', column "
                f"{i + 1} is '{header[i] if i < len(header) else ''}' "
                f"(missing '{name}')"
            )
    channel_names = header[3:]
    if not channel_names:
        raise FormatError("line 1: header declares no channel columns")

    n_rows = len(lines) - 1
    if n_rows == 0:
        raise FormatError("line 2: no data rows")
    phase = np.empty(n_rows)
    target = np.empty((n_rows, 1))
    channels = np.empty((len(channel_names), n_rows))
    for r, line in enumerate(lines[1:]):
        line_no = r + 2
        cells = line.split(",")
        if len(cells) != len(header):
            raise FormatError(
                f"line {line_no}: expected {len(header)} cells, got {len(cells)}"
            )
        _parse_float(cells[0], line_no, "time")
        phase[r] = _parse_float(cells[1], line_no, "phase")
        if not 0.0 <= phase[r] < 1.0:
            raise FormatError(f"line {line_no}: phase must lie in [0, 1)")
        target[r, 0] = _parse_float(cells[2], line_no, "target")
        for c, name in enumerate(channel_names):
            channels[c, r] = _parse_float(cells[3 + c], line_no, name)

    if subject is None:
        stem = os.path.splitext(os.path.basename(path))[0]
        subject = SubjectMeta(id=stem, height=1.70, mass=70.0, age=40.0, kind="able")
    return GaitStream(
        subject=subject, task=task, channels=channels, phase=phase,
        target_series=target,
    )


def _subject_to_dict(s):
    return {"id": s.id, "height": s.height, "mass": s.mass, "age": s.age,
            "kind": s.kind}


def _subject_from_dict(d):
    return SubjectMeta(
        id=d["id"], height=float(d["height"]), mass=float(d["mass"]),
        age=float(d["age"]), kind=d["kind"],
    )


def stream_filename(subject_id, task):
    return f"{subject_id}_task{task}.csv"


def write_dataset(dataset, out_dir, seed):
    os.makedirs(out_dir, exist_ok=True)
    files = {}
    for (sid, task), stream in sorted(dataset.able_streams.items()):
        name = stream_filename(sid, task)
        save_stream_csv(stream, os.path.join(out_dir, name))
        files[name] = {"subject": sid, "task": task}
    for sid, stream in sorted(dataset.amputee_streams.items()):
        name = stream_filename(sid, dataset.amputee_task)
        save_stream_csv(stream, os.path.join(out_dir, name))
        files[name] = {"subject": sid, "task": dataset.amputee_task}
    manifest = {
        "format_version": 1,
        "seed": seed,
        "tasks": dataset.tasks,
        "amputee_task": dataset.amputee_task,
        "able_subjects": [_subject_to_dict(s) for s in dataset.able_subjects],
        "amputee_subjects": [_subject_to_dict(s) for s in dataset.amputee_subjects],
        "files": files,
    }
    with open(os.path.join(out_dir, MANIFEST_NAME), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_dataset(data_dir):
    manifest_path = os.path.join(data_dir, MANIFEST_NAME)
    if not os.path.exists(manifest_path):
        raise FileNotFoundError(f"{manifest_path} does not exist")
    with open(manifest_path, encoding="utf-8") as fh:
        try:
            manifest = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{manifest_path}: invalid JSON ({exc})") from None
    for key in ("tasks", "amputee_task", "able_subjects", "amputee_subjects", "files"):
        if key not in manifest:
            raise FormatError(f"{manifest_path}: missing manifest key '{key}'")

    able = [_subject_from_dict(d) for d in manifest["able_subjects"]]
    amputees = [_subject_from_dict(d) for d in manifest["amputee_subjects"]]
    by_id = {s.id: s for s in able + amputees}
    able_streams, amputee_streams = {}, {}
    for name, info in sorted(manifest["files"].items()):
        subject = by_id.get(info["subject"])
        if subject is None:
            raise FormatError(
                f"{manifest_path}: file '{name}' references unknown subject "
                f"'{info['subject']}'"
            )
        stream = load_stream_csv(
            os.path.join(data_dir, name), subject=subject, task=int(info["task"])
        )
        if subject.kind == "able":
            able_streams[(subject.id, stream.task)] = stream
        else:
            amputee_streams[subject.id] = stream
    return Dataset(
        able_subjects=able,
        amputee_subjects=amputees,
        tasks=[int(t) for t in manifest["tasks"]],
        amputee_task=int(manifest["amputee_task"]),
        able_streams=able_streams,
        amputee_streams=amputee_streams,
    )
