"""Datasets: in-memory model, on-disk format, validation splits, synthetic data.

On-disk layout of a dataset directory (all binary data little-endian)::

    features.bin            magic b"DEMF", u32 version, u32 N, u32 D,
                            then N x D float32, one row per sample
    features.csv            alternative: header sample_index,f0..f{D-1}
    labels.csv              sample_index,class_id
    semantic_<name>.csv     class_id,v0..v{L-1}; one row per class
    split_seen.txt          one class id per line
    split_unseen.txt        one class id per line
    descriptions.tsv        optional: sample_index<TAB>text (repeatable)
"""

import csv
import os
import struct
from dataclasses import dataclass, field, replace

import numpy as np

FEATURE_MAGIC = b"DEMF"
FEATURE_VERSION = 1
_FEATURE_HEADER = struct.Struct("<4sIII")


class DatasetError(ValueError):
    """A dataset failed validation; the message names the file and record."""


@dataclass
class PrototypeSet:
    """Semantic vectors of a set of classes, optionally with their embeddings.

    ``semantic`` maps modality name to an ``(L_m, C)`` matrix whose columns
    follow ``class_ids``; ``embedded`` is ``(D, C)`` once computed.
    """

    class_ids: np.ndarray
    semantic: dict
    embedded: np.ndarray = None

    def __post_init__(self):
        self.class_ids = np.asarray(self.class_ids, dtype=np.int64)
        if len(np.unique(self.class_ids)) != len(self.class_ids):
            raise ValueError("prototype class ids must be unique")
        for name, m in self.semantic.items():
            if np.ndim(m) == 2 and m.shape[1] != len(self.class_ids):
                raise ValueError(f"modality {name}: {m.shape[1]} columns for {len(self.class_ids)} classes")

    def __len__(self):
        return len(self.class_ids)


@dataclass
class Dataset:
    """Visual features (``D x N``), labels and per-class semantic tables.

    ``semantic[name]`` is ``(L_name, len(class_ids))`` with columns ordered
    like ``class_ids`` (sorted). ``descriptions`` optionally maps a sample
    index to its list of text descriptions.
    """

    features: np.ndarray
    labels: np.ndarray
    class_ids: np.ndarray
    semantic: dict
    seen: np.ndarray
    unseen: np.ndarray
    descriptions: dict = None
    generator: list = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.class_ids = np.asarray(self.class_ids, dtype=np.int64)
        self.seen = np.sort(np.asarray(self.seen, dtype=np.int64))
        self.unseen = np.sort(np.asarray(self.unseen, dtype=np.int64))
        self.validate()

    def validate(self):
        if self.features.ndim != 2:
            raise DatasetError("features must be a D x N matrix")
        if self.labels.shape != (self.features.shape[1],):
            raise DatasetError(
                f"sample count mismatch: {self.features.shape[1]} feature columns, "
                f"{self.labels.size} labels"
            )
        if not np.all(np.isfinite(self.features)):
            raise DatasetError("features contain NaN or Inf")
        if np.any(np.diff(self.class_ids) <= 0):
            raise DatasetError("class ids must be sorted and unique")
        both = np.intersect1d(self.seen, self.unseen)
        if both.size:
            raise DatasetError(f"split overlap: class {int(both[0])} is both seen and unseen")
        split = np.union1d(self.seen, self.unseen)
        stray = np.setdiff1d(self.labels, split)
        if stray.size:
            raise DatasetError(f"label {int(stray[0])} is in neither split")
        missing = np.setdiff1d(split, self.class_ids)
        if missing.size:
            raise DatasetError(f"class {int(missing[0])} has no semantic vector")
        for name, m in self.semantic.items():
            if m.ndim != 2 or m.shape[1] != self.class_ids.size:
                raise DatasetError(f"semantic table {name!r} has wrong shape {m.shape}")

    @property
    def dim(self):
        return self.features.shape[0]

    @property
    def num_samples(self):
        return self.features.shape[1]

    @property
    def modalities(self):
        return sorted(self.semantic)

    def semantic_dim(self, modality):
        return self.semantic[modality].shape[0]

    def _cols(self, ids):
        pos = np.searchsorted(self.class_ids, ids)
        if np.any(pos >= self.class_ids.size) or np.any(self.class_ids[np.minimum(pos, self.class_ids.size - 1)] != ids):
            raise DatasetError("unknown class id")
        return pos

    def class_vectors(self, modality, ids):
        """``(L, len(ids))`` semantic vectors of the given classes."""
        return self.semantic[modality][:, self._cols(np.asarray(ids, dtype=np.int64))]

    def sample_indices(self, classes):
        return np.flatnonzero(np.isin(self.labels, classes))

    def sample_semantic(self, modality, idx):
        """Per-image semantic matrix: each sample gets its class vector."""
        return self.class_vectors(modality, self.labels[idx])

    def prototypes(self, classes, modalities=None):
        classes = np.sort(np.asarray(classes, dtype=np.int64))
        mods = modalities or self.modalities
        return PrototypeSet(classes, {m: self.class_vectors(m, classes) for m in mods})

    def with_split(self, seen, unseen):
        """Copy restricted to samples of ``seen`` and ``unseen`` classes."""
        keep = self.sample_indices(np.union1d(seen, unseen))
        desc = None
        if self.descriptions is not None:
            desc = {new: self.descriptions[old] for new, old in enumerate(keep) if old in self.descriptions}
        return replace(
            self,
            features=self.features[:, keep],
            labels=self.labels[keep],
            seen=seen,
            unseen=unseen,
            descriptions=desc,
        )


def make_validation_split(dataset, fraction=0.2, seed=0):
    """Hold out a fraction of the seen *classes* as pseudo-unseen classes.

    Returns
    -------
    train_classes, val_classes : ndarray
        Sorted class ids; use ``dataset.with_split(train, val)`` to get the
        validation fold.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    seen = dataset.seen
    if seen.size < 2:
        raise ValueError("need at least 2 seen classes for a validation split")
    n_val = int(round(fraction * seen.size))
    n_val = min(max(n_val, 1), seen.size - 1)
    perm = np.random.default_rng(seed).permutation(seen.size)
    val = np.sort(seen[perm[:n_val]])
    train = np.sort(seen[perm[n_val:]])
    return train, val


# -- synthetic benchmark ------------------------------------------------------


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of the synthetic zero-shot benchmark.

    Class semantic vectors are standard Gaussian; a fixed random tanh
    network of ``depth`` layers (width ``hidden``, weights scaled by
    ``gain / sqrt(fan_in)``) maps them to visual class means, and samples
    add isotropic Gaussian noise of scale ``noise``.
    """

    dim: int = 100
    semantic_dim: int = 20
    num_seen: int = 30
    num_unseen: int = 10
    samples_per_class: int = 50
    noise: float = 0.3
    depth: int = 2
    hidden: int = 8
    gain: float = 2.5
    seed: int = 0

    def __post_init__(self):
        for name in ("dim", "semantic_dim", "num_seen", "num_unseen",
                     "samples_per_class", "depth", "hidden"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.noise < 0:
            raise ValueError("noise must be nonnegative")


def synth_generate(spec=SynthSpec()):
    """Draw a synthetic dataset; the generator weights are kept on ``.generator``."""
    rng = np.random.default_rng(spec.seed)
    n_cls = spec.num_seen + spec.num_unseen
    sem = rng.standard_normal((spec.semantic_dim, n_cls))
    sizes = [spec.semantic_dim] + [spec.hidden] * (spec.depth - 1) + [spec.dim]
    weights = [
        rng.standard_normal((o, i)) * (spec.gain / np.sqrt(i))
        for i, o in zip(sizes[:-1], sizes[1:])
    ]
    means = sem
    for w in weights:
        means = np.tanh(w @ means)
    labels = np.repeat(np.arange(n_cls), spec.samples_per_class)
    noise = rng.standard_normal((spec.dim, labels.size)) * spec.noise
    # stored as float32 on disk; rounding here keeps write/load bit-exact
    feats = (means[:, labels] + noise).astype(np.float32).astype(np.float64)
    perm = rng.permutation(n_cls)
    return Dataset(
        features=feats,
        labels=labels,
        class_ids=np.arange(n_cls),
        semantic={"attribute": sem},
        seen=perm[:spec.num_seen],
        unseen=perm[spec.num_seen:],
        generator=weights,
    )


def class_means(dataset, classes):
    """Mean visual feature per class, ``(D, len(classes))``."""
    return np.stack(
        [dataset.features[:, dataset.labels == c].mean(axis=1) for c in classes], axis=1
    )


# -- file format --------------------------------------------------------------


def write_features_bin(path, features):
    """``features`` is ``D x N``; written as N rows of D float32 values."""
    d, n = features.shape
    with open(path, "wb") as fh:
        fh.write(_FEATURE_HEADER.pack(FEATURE_MAGIC, FEATURE_VERSION, n, d))
        fh.write(np.ascontiguousarray(features.T, dtype="<f4").tobytes())


def read_features_bin(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _FEATURE_HEADER.size:
        raise DatasetError(f"{path}: truncated header")
    magic, version, n, d = _FEATURE_HEADER.unpack_from(raw)
    if magic != FEATURE_MAGIC:
        raise DatasetError(f"{path}: bad magic {magic!r}")
    if version != FEATURE_VERSION:
        raise DatasetError(f"{path}: unsupported version {version}")
    body = raw[_FEATURE_HEADER.size:]
    if len(body) != 4 * n * d:
        raise DatasetError(f"{path}: header declares {n}x{d} floats, payload has {len(body) // 4}")
    return np.frombuffer(body, dtype="<f4").reshape(n, d).astype(np.float64).T


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DatasetError(f"{path}: empty file")
    return rows[0], rows[1:]


def _parse_indexed_matrix(path, prefix):
    """Rows ``key,v0..`` -> (keys, matrix with one column per row)."""
    header, rows = _read_csv(path)
    width = len(header) - 1
    if width < 1 or any(h != f"{prefix}{i}" for i, h in enumerate(header[1:])):
        raise DatasetError(f"{path}: line 1: bad header")
    keys, cols = [], []
    for lineno, row in enumerate(rows, start=2):
        if len(row) != width + 1:
            raise DatasetError(f"{path}: line {lineno}: expected {width + 1} fields, got {len(row)}")
        try:
            keys.append(int(row[0]))
            cols.append([float(v) for v in row[1:]])
        except ValueError as exc:
            raise DatasetError(f"{path}: line {lineno}: {exc}") from None
    mat = np.array(cols, dtype=np.float64).reshape(len(cols), width).T
    return np.array(keys, dtype=np.int64), mat


def read_features_csv(path):
    keys, mat = _parse_indexed_matrix(path, "f")
    if not np.array_equal(np.sort(keys), np.arange(keys.size)):
        raise DatasetError(f"{path}: sample indices must be 0..N-1, each once")
    return mat[:, np.argsort(keys)]


def write_features_csv(path, features):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_index"] + [f"f{i}" for i in range(features.shape[0])])
        for j in range(features.shape[1]):
            w.writerow([j] + [repr(float(v)) for v in features[:, j]])


def _read_split(path):
    ids = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                ids.append((int(line), lineno))
            except ValueError:
                raise DatasetError(f"{path}: line {lineno}: bad class id {line!r}") from None
    return ids


def load_dataset(directory):
    """Read and validate a dataset directory (see module docstring)."""
    from .text import read_descriptions

    def p(name):
        return os.path.join(directory, name)

    if os.path.exists(p("features.bin")):
        feats = read_features_bin(p("features.bin"))
    elif os.path.exists(p("features.csv")):
        feats = read_features_csv(p("features.csv"))
    else:
        raise DatasetError(f"{directory}: no features.bin or features.csv")

    header, rows = _read_csv(p("labels.csv"))
    if header != ["sample_index", "class_id"]:
        raise DatasetError(f"{p('labels.csv')}: line 1: expected header sample_index,class_id")
    if len(rows) != feats.shape[1]:
        raise DatasetError(
            f"sample count mismatch: {p('labels.csv')} has {len(rows)} records, "
            f"features have {feats.shape[1]} samples"
        )
    labels = np.full(feats.shape[1], -1, dtype=np.int64)
    for lineno, row in enumerate(rows, start=2):
        try:
            idx, cid = int(row[0]), int(row[1])
        except (ValueError, IndexError):
            raise DatasetError(f"{p('labels.csv')}: line {lineno}: malformed record") from None
        if not 0 <= idx < labels.size or labels[idx] != -1:
            raise DatasetError(f"{p('labels.csv')}: line {lineno}: bad or repeated sample index {idx}")
        labels[idx] = cid

    semantic, class_ids = {}, None
    for name in sorted(os.listdir(directory)):
        if not (name.startswith("semantic_") and name.endswith(".csv")):
            continue
        modality = name[len("semantic_"):-len(".csv")]
        keys, mat = _parse_indexed_matrix(p(name), "v")
        order = np.argsort(keys)
        keys, mat = keys[order], mat[:, order]
        if np.any(np.diff(keys) == 0):
            raise DatasetError(f"{p(name)}: duplicate class id")
        if class_ids is None:
            class_ids = keys
        elif not np.array_equal(keys, class_ids):
            raise DatasetError(f"{p(name)}: class ids differ from other semantic files")
        semantic[modality] = mat
    if class_ids is None:
        raise DatasetError(f"{directory}: no semantic_<modality>.csv file")

    seen = _read_split(p("split_seen.txt"))
    unseen = _read_split(p("split_unseen.txt"))
    unseen_lines = dict(unseen)
    for cid, lineno in seen:
        if cid in unseen_lines:
            raise DatasetError(
                f"split overlap: class {cid} in split_seen.txt line {lineno} "
                f"and split_unseen.txt line {unseen_lines[cid]}"
            )
    split = {c for c, _ in seen} | set(unseen_lines)
    for j, cid in enumerate(labels):
        if cid not in split:
            raise DatasetError(f"{p('labels.csv')}: sample {j}: class {cid} is in neither split file")
    for cid in sorted(split):
        if cid not in set(class_ids.tolist()):
            raise DatasetError(f"missing class vector: class {cid} has no row in the semantic files")

    desc = None
    if os.path.exists(p("descriptions.tsv")):
        desc = read_descriptions(p("descriptions.tsv"))
        bad = [k for k in desc if not 0 <= k < labels.size]
        if bad:
            raise DatasetError(f"{p('descriptions.tsv')}: sample index {bad[0]} out of range")

    return Dataset(
        features=feats,
        labels=labels,
        class_ids=class_ids,
        semantic=semantic,
        seen=[c for c, _ in seen],
        unseen=[c for c, _ in unseen],
        descriptions=desc,
    )


def write_dataset(dataset, directory, features_format="bin"):
    """Write ``dataset`` in the directory layout read by :func:`load_dataset`.

    The binary feature file stores float32, so only float32-representable
    features round-trip exactly (synthetic datasets are generated that way).
    """
    from .text import write_descriptions

    os.makedirs(directory, exist_ok=True)

    def p(name):
        return os.path.join(directory, name)

    if features_format == "bin":
        write_features_bin(p("features.bin"), dataset.features)
    elif features_format == "csv":
        write_features_csv(p("features.csv"), dataset.features)
    else:
        raise ValueError(f"unknown features format {features_format!r}")
    with open(p("labels.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_index", "class_id"])
        w.writerows((j, int(c)) for j, c in enumerate(dataset.labels))
    for name, mat in dataset.semantic.items():
        with open(p(f"semantic_{name}.csv"), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["class_id"] + [f"v{i}" for i in range(mat.shape[0])])
            for cid, col in zip(dataset.class_ids, mat.T):
                w.writerow([int(cid)] + [repr(float(v)) for v in col])
    for fname, ids in (("split_seen.txt", dataset.seen), ("split_unseen.txt", dataset.unseen)):
        with open(p(fname), "w", encoding="utf-8", newline="\n") as fh:
            fh.writelines(f"{int(c)}\n" for c in ids)
    if dataset.descriptions:
        write_descriptions(p("descriptions.tsv"), dataset.descriptions)
