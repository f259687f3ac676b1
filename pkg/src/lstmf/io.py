"""On-disk formats.

Feature files are a small JSON header followed by fixed-size float32 LE
records (5 metadata values + the five descriptor vectors). Encoder, model
and report files are JSON; manifests are JSON lines. Every artifact embeds
the extraction-config hash so stage mismatches are caught before compute.
"""

import json
import os

import numpy as np

from .config import DESCRIPTOR_TYPES
from .errors import InputError, ManifestError

FEATURE_MAGIC = b"LSTMF01"
REPRESENTATION_MAGIC = b"LSTMFR1"

_METADATA_FIELDS = ("length", "scale", "start_frame", "mean_x", "mean_y")


def _write_header(fh, magic, header):
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    fh.write(magic)
    fh.write(len(blob).to_bytes(4, "little"))
    fh.write(blob)


def _read_header(fh, magic, path):
    got = fh.read(len(magic))
    if got != magic:
        raise InputError(f"{path}: bad magic {got!r}, expected {magic!r}")
    size = int.from_bytes(fh.read(4), "little")
    try:
        return json.loads(fh.read(size).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise InputError(f"{path}: corrupt header: {exc}") from exc


def record_size(dims):
    return len(_METADATA_FIELDS) + sum(dims[t] for t in DESCRIPTOR_TYPES)


def descriptor_row(ds, dims):
    """Flatten one DescriptorSet into a float32 record."""
    parts = [np.array([ds.length, ds.scale, ds.start_frame, ds.mean_x, ds.mean_y],
                      dtype=np.float32)]
    for kind in DESCRIPTOR_TYPES:
        vec = np.asarray(ds.vector(kind), dtype=np.float32)
        if vec.shape != (dims[kind],):
            raise ValueError(f"{kind} descriptor has dim {vec.shape}, expected {dims[kind]}")
        parts.append(vec)
    return np.concatenate(parts)


class FeatureWriter:
    """Streams descriptor records to disk in emission order."""

    def __init__(self, path, config_hash, video_id, dims):
        self.path = path
        self.dims = dict(dims)
        self._fh = open(path, "wb")
        _write_header(self._fh, FEATURE_MAGIC, {
            "version": 1,
            "config_hash": config_hash,
            "video_id": video_id,
            "dims": self.dims,
        })
        self.n_records = 0

    def write(self, ds):
        self._fh.write(descriptor_row(ds, self.dims).tobytes())
        self.n_records += 1

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_features(path):
    """Load a feature file into (header, column dict of arrays)."""
    with open(path, "rb") as fh:
        header = _read_header(fh, FEATURE_MAGIC, path)
        payload = fh.read()
    dims = header["dims"]
    rsize = record_size(dims)
    data = np.frombuffer(payload, dtype="<f4")
    if data.size % rsize != 0:
        raise InputError(f"{path}: payload of {data.size} floats is not a "
                         f"multiple of the record size {rsize}")
    table = data.reshape(-1, rsize)
    columns = {
        "length": table[:, 0].astype(np.int64),
        "scale": table[:, 1].astype(np.int64),
        "start_frame": table[:, 2].astype(np.int64),
        "mean_x": table[:, 3].astype(np.float64),
        "mean_y": table[:, 4].astype(np.float64),
    }
    offset = len(_METADATA_FIELDS)
    for kind in DESCRIPTOR_TYPES:
        columns[kind] = table[:, offset:offset + dims[kind]].astype(np.float64)
        offset += dims[kind]
    return header, columns


def descriptors_by_length(columns):
    """Group feature-file columns into {length: {type: (n, D) array}}."""
    grouped = {}
    for l in np.unique(columns["length"]):
        mask = columns["length"] == l
        grouped[int(l)] = {kind: columns[kind][mask] for kind in DESCRIPTOR_TYPES}
    return grouped


def write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def read_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON: {exc}") from exc


def write_representation(path, rep, config_hash):
    vec = np.asarray(rep.vector, dtype="<f8")
    with open(path, "wb") as fh:
        _write_header(fh, REPRESENTATION_MAGIC, {
            "version": 1,
            "video_id": rep.video_id,
            "mode": rep.mode,
            "lengths": list(rep.lengths),
            "dim": int(vec.size),
            "n_blocks": int(rep.n_blocks),
            "config_hash": config_hash,
        })
        fh.write(vec.tobytes())


def read_representation(path):
    with open(path, "rb") as fh:
        header = _read_header(fh, REPRESENTATION_MAGIC, path)
        vec = np.frombuffer(fh.read(), dtype="<f8")
    if vec.size != header["dim"]:
        raise InputError(f"{path}: expected {header['dim']} values, found {vec.size}")
    return header, vec.astype(np.float64)


def save_model(path, model, config_hash=""):
    classes = []
    for label, bias, weights in zip(model.classes_, model.intercept_, model.coef_):
        classes.append({"label": label if isinstance(label, str) else int(label),
                        "bias": float(bias),
                        "weights": weights.tolist()})
    write_json(path, {"version": 1, "C": model.C, "classes": classes,
                      "config_hash": config_hash})


def load_model(path):
    from .svm import OneVsRestLinearSVM

    data = read_json(path)
    model = OneVsRestLinearSVM(C=data["C"])
    model.classes_ = [c["label"] for c in data["classes"]]
    model.intercept_ = np.array([c["bias"] for c in data["classes"]])
    model.coef_ = np.array([c["weights"] for c in data["classes"]])
    return model


def read_manifest(path):
    """JSON-lines manifest: one {id, path, labels, group, split} per line."""
    entries = []
    seen = set()
    base = os.path.dirname(os.path.abspath(path))
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        for field in ("id", "path"):
            if field not in raw:
                raise ManifestError(f"{path}:{lineno}: missing field {field!r}")
        if raw["id"] in seen:
            raise ManifestError(f"{path}:{lineno}: duplicate id {raw['id']!r}")
        seen.add(raw["id"])
        labels = raw.get("labels", [])
        if not isinstance(labels, list):
            labels = [labels]
        if not labels:
            raise ManifestError(f"{path}:{lineno}: entry needs at least one label")
        file_path = raw["path"]
        if not os.path.isabs(file_path):
            file_path = os.path.join(base, file_path)
        entries.append({
            "id": raw["id"],
            "path": file_path,
            "labels": labels,
            "group": raw.get("group"),
            "split": raw.get("split"),
        })
    if not entries:
        raise ManifestError(f"{path}: manifest is empty")
    return entries


def load_manifest_representations(entries):
    """Read every representation referenced by a manifest into a matrix.

    Dimensions and config hashes must agree across files.
    """
    vectors = []
    hashes = set()
    for entry in entries:
        if not os.path.exists(entry["path"]):
            raise ManifestError(f"representation file missing: {entry['path']}")
        header, vec = read_representation(entry["path"])
        hashes.add(header.get("config_hash", ""))
        if vectors and vec.size != vectors[0].size:
            raise ManifestError(
                f"{entry['path']}: dimension {vec.size} != {vectors[0].size} of earlier files")
        vectors.append(vec)
    if len(hashes) > 1:
        raise ManifestError(f"representation files mix config hashes: {sorted(hashes)}")
    return np.stack(vectors), hashes.pop()
