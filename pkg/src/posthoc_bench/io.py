"""File formats: binary matrices with text sidecars, dataset folders, model and results CSVs.

Matrix files (``.phlb``) are bit-exact: the 4 magic bytes ``PHLB``, then
little-endian uint32 ``version``, ``rows``, ``cols``, then ``rows * cols``
little-endian float64 values in row-major order. Metadata lives in a sibling
``.meta`` file of ``key: value`` lines.
"""

from __future__ import annotations

import csv
import math
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .labeling import LabeledDataset, SourceDescriptor
from .signal import EpochSet, TimeSeriesMatrix
from .source_space import LeadField
from .spoc import SpocModel

MAGIC = b"PHLB"
VERSION = 1
_HEADER = struct.Struct("<4sIII")

RESULTS_HEADER = ["config_id", "n_epochs", "xi", "rel_power", "fold", "rho", "alpha_rad", "seed"]
LABELS_HEADER = ["epoch_index", "label", "good", "start_sample"]


def write_matrix(path, matrix) -> None:
    m = np.asarray(matrix, dtype="<f8")
    if m.ndim == 1:
        m = m[None, :]
    if m.ndim != 2:
        raise FormatError(f"only 2-D matrices can be stored, got shape {m.shape}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, m.shape[0], m.shape[1]))
        fh.write(np.ascontiguousarray(m).tobytes())


def read_matrix(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, rows, cols = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    expected = _HEADER.size + 8 * rows * cols
    if len(raw) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(raw)}")
    return np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(rows, cols).astype(float)


def meta_path(path) -> Path:
    return Path(path).with_suffix(".meta")


def write_meta(path, meta: dict) -> None:
    lines = []
    for key, value in meta.items():
        if isinstance(value, (list, tuple)):
            value = ",".join(str(v) for v in value)
        lines.append(f"{key}: {value}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_meta(path) -> dict[str, str]:
    meta = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        key, sep, value = line.partition(":")
        if not sep:
            raise FormatError(f"{path}: malformed metadata line {line!r}")
        meta[key.strip()] = value.strip()
    return meta


def save_recording(path, x: TimeSeriesMatrix) -> None:
    write_matrix(path, x.data)
    write_meta(
        meta_path(path),
        {"sample_rate_hz": repr(x.sample_rate_hz), "channel_labels": x.channel_labels},
    )


def load_recording(path) -> TimeSeriesMatrix:
    meta = read_meta(meta_path(path))
    labels = tuple(meta["channel_labels"].split(",")) if meta.get("channel_labels") else ()
    return TimeSeriesMatrix(read_matrix(path), float(meta["sample_rate_hz"]), labels)


def save_lead_field(path, lead_field: LeadField) -> None:
    write_matrix(path, lead_field.A)
    write_meta(
        meta_path(path),
        {"channel_labels": lead_field.channel_labels, "n_sources": lead_field.n_sources},
    )


def load_lead_field(path) -> LeadField:
    a = read_matrix(path)
    meta = read_meta(meta_path(path))
    if "n_sources" in meta and int(meta["n_sources"]) != a.shape[1]:
        raise FormatError(f"{path}: metadata says {meta['n_sources']} sources, matrix has {a.shape[1]}")
    labels = tuple(meta["channel_labels"].split(",")) if meta.get("channel_labels") else ()
    return LeadField(a, labels)


def save_dataset(directory, dataset: LabeledDataset) -> None:
    """Write ``epochs.phlb`` (row ``e * N_c + c`` is channel c of epoch e), ``labels.csv``
    and ``dataset.meta``; ``pattern.phlb`` holds the ground-truth pattern if known."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    ep = dataset.epochs
    n_e, n_c, length = ep.epochs.shape
    write_matrix(d / "epochs.phlb", ep.epochs.reshape(n_e * n_c, length))
    meta = {
        "sample_rate_hz": repr(ep.sample_rate_hz),
        "channel_labels": ep.channel_labels,
        "n_epochs": n_e,
        "n_channels": n_c,
        "epoch_length": length,
        "window_s": repr(ep.window_s),
        "band_low": repr(dataset.band[0]),
        "band_high": repr(dataset.band[1]),
    }
    if dataset.source is not None:
        meta["projection"] = dataset.source.projection
        meta["source_index"] = dataset.source.source_index
        meta["relative_power"] = repr(dataset.source.relative_power)
    write_meta(d / "dataset.meta", meta)
    with open(d / "labels.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LABELS_HEADER)
        for i in range(n_e):
            writer.writerow(
                [i, repr(float(dataset.labels[i])), int(dataset.good_mask[i]), int(ep.epoch_starts[i])]
            )
    if dataset.ground_truth_pattern is not None:
        write_matrix(d / "pattern.phlb", dataset.ground_truth_pattern[:, None])


def load_dataset(directory) -> LabeledDataset:
    d = Path(directory)
    meta = read_meta(d / "dataset.meta")
    n_e, n_c, length = (int(meta[k]) for k in ("n_epochs", "n_channels", "epoch_length"))
    flat = read_matrix(d / "epochs.phlb")
    if flat.shape != (n_e * n_c, length):
        raise FormatError(f"{d}: epochs matrix {flat.shape} disagrees with metadata")
    with open(d / "labels.csv", newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if len(rows) != n_e:
        raise FormatError(f"{d}: {len(rows)} label rows for {n_e} epochs")
    labels = tuple(meta["channel_labels"].split(",")) if meta.get("channel_labels") else ()
    epochs = EpochSet(
        flat.reshape(n_e, n_c, length),
        float(meta["window_s"]),
        np.array([int(r["start_sample"]) for r in rows], dtype=np.int64),
        float(meta["sample_rate_hz"]),
        labels,
    )
    source = None
    if "projection" in meta:
        source = SourceDescriptor(
            meta["projection"], int(meta["source_index"]), float(meta["relative_power"])
        )
    pattern = None
    if (d / "pattern.phlb").exists():
        pattern = read_matrix(d / "pattern.phlb")[:, 0]
    return LabeledDataset(
        epochs,
        np.array([float(r["label"]) for r in rows]),
        np.array([r["good"] == "1" for r in rows]),
        (float(meta["band_low"]), float(meta["band_high"])),
        source,
        pattern,
    )


def save_model(path, model: SpocModel) -> None:
    """CSV with header ``field,index,value``: rows for ``w``, ``pattern``, ``eigenvalue``, ``band``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["field", "index", "value"])
        for i, v in enumerate(model.w):
            writer.writerow(["w", i, repr(float(v))])
        for i, v in enumerate(model.pattern):
            writer.writerow(["pattern", i, repr(float(v))])
        writer.writerow(["eigenvalue", 0, repr(model.eigenvalue)])
        writer.writerow(["band", 0, repr(model.band[0])])
        writer.writerow(["band", 1, repr(model.band[1])])


def load_model(path) -> SpocModel:
    fields: dict[str, dict[int, float]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            fields.setdefault(row["field"], {})[int(row["index"])] = float(row["value"])

    def vector(name):
        entries = fields[name]
        return np.array([entries[i] for i in range(len(entries))])

    w = vector("w")
    return SpocModel(
        w,
        vector("pattern"),
        fields["eigenvalue"][0],
        (fields["band"][0], fields["band"][1]),
        training_C=np.full((w.size, w.size), np.nan),
    )


def format_float(value) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    return repr(float(value))


def parse_float(text) -> float:
    return float(text) if text != "" else math.nan
