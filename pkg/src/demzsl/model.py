"""The deep embedding model: semantic encoder -> visual feature space.

The semantic representation unit sums one linear branch per semantic
modality (plus the BiLSTM projection when descriptions are used), adds an
optional bias and applies ReLU for a single branch or the scaled tanh when
several branches are fused. A second fully connected layer maps the hidden
vector to the ``D``-dimensional visual feature space. Zero-shot
classification is nearest-neighbour search among embedded prototypes.
"""

import hashlib
import io
import logging
import struct
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .data import PrototypeSet
from .neighbors import pairwise_distance, rank_targets
from .optim import make_optimizer
from .text import BiLstmEncoder, LstmCell, TokenBatch, Vocabulary, average_prototypes

log = logging.getLogger(__name__)

TEXT = "description"
VISUAL = "visual"
VARIANTS = ("single", "fused", "text")


@dataclass
class TrainConfig:
    """Training and architecture settings; defaults follow the published setup."""

    optimizer: str = "adam"
    lr: float = 1e-4
    lam: float = 1e-3
    batch_size: int = 64
    epochs: int = 100
    seed: int = 0
    loss: str = "ls"
    margin: float = nn.DEFAULT_MARGIN
    clip_norm: float = None
    hidden: int = None            # None: 300 single / 900 fused
    layers: int = 2
    bias: bool = False
    output_activation: str = "auto"
    modalities: tuple = None      # None: every semantic table in the dataset
    direction: str = "s2v"
    max_len: int = 30
    embed_dim: int = 512
    lstm_hidden: int = 512

    def __post_init__(self):
        if self.loss not in nn.LOSSES:
            raise ValueError(f"loss must be one of {nn.LOSSES}")
        if self.direction not in ("s2v", "v2s"):
            raise ValueError("direction must be 's2v' or 'v2s'")
        if self.layers not in (1, 2):
            raise ValueError("layers must be 1 or 2")
        if self.lam < 0 or self.lr <= 0 or self.epochs < 0:
            raise ValueError("need lam >= 0, lr > 0 and epochs >= 0")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be positive")


@dataclass
class DemModel:
    branches: dict                 # modality -> (out_unit, L_m) weight
    layer2: nn.DenseLayer = None   # None for the one-layer variant
    hidden_bias: np.ndarray = None
    text: BiLstmEncoder = None
    hidden_activation: str = "relu"
    direction: str = "s2v"
    target_modality: str = None    # v2s only: semantic space embedded into
    vocab: Vocabulary = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        n_branches = len(self.branches) + (self.text is not None)
        if n_branches == 0:
            raise ValueError("model needs at least one semantic branch")
        units = {w.shape[0] for w in self.branches.values()}
        if self.text is not None:
            units.add(self.text.out_dim)
            if self.layer2 is None:
                raise ValueError("the text variant needs two layers")
        if len(units) != 1:
            raise ValueError("all branches must share the same output size")
        if self.layer2 is not None and self.layer2.in_dim != units.pop():
            raise ValueError("layer 2 input size does not match the hidden size")

    # -- construction --------------------------------------------------------

    @classmethod
    def create(cls, input_dims, out_dim, hidden=None, layers=2, bias=False,
               output_activation="relu", text=None, seed=0, direction="s2v",
               target_modality=None):
        """Randomly initialised model.

        Parameters
        ----------
        input_dims : dict
            ``modality -> L_m`` for the dense semantic inputs.
        text : dict, optional
            ``vocab_size``, ``embed_dim``, ``hidden`` and ``max_len`` of the
            description encoder.
        """
        rng = np.random.default_rng(seed)
        n_branches = len(input_dims) + (text is not None)
        if hidden is None:
            hidden = 300 if n_branches == 1 else 900
        unit = hidden if layers == 2 else out_dim
        branches = {m: nn.uniform_init(rng, unit, l) for m, l in sorted(input_dims.items())}
        act = "relu" if n_branches == 1 else "scaled_tanh"
        enc = None
        if text is not None:
            enc = BiLstmEncoder.init(
                rng, text["vocab_size"], unit, text.get("embed_dim", 512),
                text.get("hidden", 512), act, text.get("max_len", 30),
            )
        layer2 = None
        if layers == 2:
            layer2 = nn.DenseLayer(
                nn.uniform_init(rng, out_dim, hidden),
                np.zeros(out_dim) if bias else None,
                output_activation,
            )
        if layers == 1:
            act = output_activation
        return cls(branches, layer2, np.zeros(unit) if bias else None, enc, act,
                   direction, target_modality)

    # -- introspection -------------------------------------------------------

    @property
    def variant(self):
        if self.text is not None:
            return "text"
        return "fused" if len(self.branches) > 1 else "single"

    @property
    def modalities(self):
        mods = sorted(self.branches)
        return mods + [TEXT] if self.text is not None else mods

    @property
    def out_dim(self):
        if self.layer2 is not None:
            return self.layer2.out_dim
        return next(iter(self.branches.values())).shape[0]

    @property
    def hidden_dim(self):
        return self.layer2.in_dim if self.layer2 is not None else 0

    @property
    def output_activation(self):
        return self.layer2.activation if self.layer2 is not None else self.hidden_activation

    def parameters(self):
        p = {f"W1.{m}": w for m, w in sorted(self.branches.items())}
        if self.hidden_bias is not None:
            p["b1"] = self.hidden_bias
        if self.text is not None:
            p.update(self.text.parameters())
        if self.layer2 is not None:
            p["W2"] = self.layer2.weight
            if self.layer2.bias is not None:
                p["b2"] = self.layer2.bias
        return p

    def penalized(self):
        names = [f"W1.{m}" for m in sorted(self.branches)]
        if self.text is not None:
            names += BiLstmEncoder.penalized()
        if self.layer2 is not None:
            names.append("W2")
        return names

    # -- forward / backward --------------------------------------------------

    def _normalise_inputs(self, inputs):
        if not isinstance(inputs, dict):
            if len(self.modalities) != 1:
                raise ValueError(f"model expects inputs for {self.modalities}")
            inputs = {self.modalities[0]: inputs}
        missing = set(self.modalities) - set(inputs)
        if missing:
            raise ValueError(f"missing inputs for modalities {sorted(missing)}")
        return inputs

    def forward(self, inputs):
        """Embed a batch; returns ``(out, cache)`` with ``out`` of shape ``(D, N)``.

        ``inputs`` maps modality to an ``(L_m, N)`` matrix; the description
        modality takes a :class:`TokenBatch`, or an already averaged
        encoding matrix (see :meth:`prototype_inputs`).
        """
        inputs = self._normalise_inputs(inputs)
        pre = None
        dense_x = {}
        for m, w in sorted(self.branches.items()):
            x = np.asarray(inputs[m], dtype=np.float64)
            if x.ndim != 2 or x.shape[0] != w.shape[1]:
                raise ValueError(
                    f"dimension mismatch for {m}: expected {w.shape[1]} rows, got {np.shape(x)}"
                )
            dense_x[m] = x
            term = w @ x
            pre = term if pre is None else pre + term
        text_cache = None
        encoded_hidden = None
        if self.text is not None:
            t_in = inputs[TEXT]
            if isinstance(t_in, TokenBatch):
                proj, text_cache = self.text.project(t_in)
                pre = proj if pre is None else pre + proj
            elif self.branches:
                pre = pre + np.asarray(t_in, dtype=np.float64)
            else:
                encoded_hidden = np.asarray(t_in, dtype=np.float64)
        if encoded_hidden is not None:
            hidden = encoded_hidden
        else:
            if self.hidden_bias is not None:
                pre = pre + self.hidden_bias[:, None]
            hidden = nn.activate(self.hidden_activation, pre)
        if self.layer2 is None:
            out, l2_cache = hidden, None
        else:
            out, l2_cache = self.layer2.forward(hidden)
        return out, (dense_x, text_cache, pre, hidden, l2_cache)

    def backward(self, cache, d_out):
        dense_x, text_cache, pre, hidden, l2_cache = cache
        grads = {}
        if self.layer2 is not None:
            d_hidden, d_w2, d_b2 = self.layer2.backward(l2_cache, d_out)
            grads["W2"] = d_w2
            if d_b2 is not None:
                grads["b2"] = d_b2
        else:
            d_hidden = d_out
        if pre is None:
            raise ValueError("cannot backpropagate through pre-encoded text inputs")
        d_pre = nn.activation_grad(self.hidden_activation, pre, hidden, d_hidden)
        if self.hidden_bias is not None:
            grads["b1"] = d_pre.sum(axis=1)
        for m, x in dense_x.items():
            grads[f"W1.{m}"] = d_pre @ x.T
        if self.text is not None:
            if text_cache is None:
                raise ValueError("cannot backpropagate through pre-encoded text inputs")
            grads.update(self.text.backprop(text_cache, d_pre))
        return {k: grads[k] for k in self.parameters()}

    def embed(self, inputs):
        return self.forward(inputs)[0]

    # -- zero-shot inference -------------------------------------------------

    def prototype_inputs(self, prototypes):
        """Model inputs for a :class:`PrototypeSet` (``s2v`` models)."""
        return {m: prototypes.semantic[m] for m in self.modalities}

    def embed_prototypes(self, prototypes):
        emb = self.embed(self.prototype_inputs(prototypes))
        prototypes.embedded = emb
        return emb

    def zsl_space(self, features, prototypes):
        """Queries and targets for NN search in this model's embedding space."""
        features = np.asarray(features, dtype=np.float64)
        if self.direction == "s2v":
            if features.shape[0] != self.out_dim:
                raise ValueError(f"features are {features.shape[0]}-D, model embeds into {self.out_dim}-D")
            return features, self.embed_prototypes(prototypes)
        return self.embed({VISUAL: features}), prototypes.semantic[self.target_modality]


def embed(model, semantic):
    """Embed semantic inputs into the visual space (``D x N``)."""
    return model.embed(semantic)


def _ordered(prototypes):
    order = np.argsort(prototypes.class_ids, kind="stable")
    return order, prototypes.class_ids[order]


def rank_classes(model, features, prototypes, distance="sqeuclidean"):
    """Class ids ordered nearest first for every feature column, ``(N, C)``."""
    if len(prototypes) == 0:
        raise ValueError("empty prototype set")
    queries, targets = model.zsl_space(features, prototypes)
    order, ids = _ordered(prototypes)
    dist = pairwise_distance(queries, targets[:, order], distance)
    return ids[rank_targets(dist)]


def classify(model, feature, prototypes, distance="sqeuclidean"):
    """Nearest prototype's class id; ties go to the lowest class id."""
    feature = np.asarray(feature, dtype=np.float64).reshape(-1, 1)
    return int(rank_classes(model, feature, prototypes, distance)[0, 0])


def hit_at_k(model, dataset, prototypes, k=1, distance="sqeuclidean"):
    """Fraction of samples of the prototype classes with the true class in the top k."""
    if not 1 <= k <= len(prototypes):
        raise ValueError(f"k must be in [1, {len(prototypes)}], got {k}")
    idx = dataset.sample_indices(prototypes.class_ids)
    if idx.size == 0:
        raise ValueError("no test samples belong to the prototype classes")
    ranked = rank_classes(model, dataset.features[:, idx], prototypes, distance)[:, :k]
    return float(np.mean(np.any(ranked == dataset.labels[idx][:, None], axis=1)))


# -- data plumbing for training ------------------------------------------------


def _resolve_modalities(dataset, config):
    mods = list(config.modalities) if config.modalities else list(dataset.modalities)
    if TEXT in mods and not dataset.descriptions:
        raise ValueError("description modality requested but the dataset has no descriptions")
    for m in mods:
        if m != TEXT and m not in dataset.semantic:
            raise ValueError(f"dataset has no semantic table {m!r}")
    return mods


def _descriptions_by_class(dataset, classes):
    out = {}
    for c in classes:
        texts = []
        for j in dataset.sample_indices([c]):
            texts.extend(dataset.descriptions.get(int(j), []))
        if not texts:
            raise ValueError(f"class {c} has no descriptions")
        out[int(c)] = texts
    return out


def build_model(dataset, config):
    """Fresh model sized for ``dataset`` according to ``config``."""
    mods = _resolve_modalities(dataset, config)
    if config.direction == "v2s":
        if len(mods) != 1 or mods[0] == TEXT:
            raise ValueError("v2s models map into exactly one dense semantic space")
        target = mods[0]
        out_act = _auto_activation(config.output_activation, dataset.semantic[target])
        return DemModel.create(
            {VISUAL: dataset.dim}, dataset.semantic_dim(target), config.hidden or 300,
            config.layers, config.bias, out_act, seed=config.seed,
            direction="v2s", target_modality=target,
        )
    dense = {m: dataset.semantic_dim(m) for m in mods if m != TEXT}
    text = None
    vocab = None
    if TEXT in mods:
        seen_idx = dataset.sample_indices(dataset.seen)
        vocab = Vocabulary.build(t for j in seen_idx for t in dataset.descriptions.get(int(j), []))
        text = {"vocab_size": len(vocab), "embed_dim": config.embed_dim,
                "hidden": config.lstm_hidden, "max_len": config.max_len}
    out_act = _auto_activation(config.output_activation, dataset.features)
    model = DemModel.create(dense, dataset.dim, config.hidden, config.layers, config.bias,
                            out_act, text, config.seed)
    model.vocab = vocab
    return model


def _auto_activation(choice, target_values):
    # ReLU output only makes sense when every target coordinate is >= 0
    if choice != "auto":
        return choice
    return "relu" if np.all(target_values >= 0) else "identity"


def prototypes_for(model, dataset, classes):
    """Test prototypes for ``classes`` in the form ``model`` consumes.

    Description prototypes average the encodings of every description of a
    class (projections before the fusion nonlinearity for fused models).
    """
    classes = np.sort(np.asarray(classes, dtype=np.int64))
    if model.direction == "v2s":
        return dataset.prototypes(classes, [model.target_modality])
    dense = [m for m in model.modalities if m != TEXT]
    protos = dataset.prototypes(classes, dense)
    if model.text is not None:
        descs = _descriptions_by_class(dataset, classes)
        avg = average_prototypes(model.text, descs, model.vocab, pre_activation=bool(dense))
        protos.semantic[TEXT] = avg.semantic[TEXT]
    return protos


class _Sampler:
    """Builds minibatch inputs and targets from the seen-class samples."""

    def __init__(self, model, dataset, config, rng):
        self.model = model
        self.dataset = dataset
        self.config = config
        self.rng = rng
        self.idx = dataset.sample_indices(dataset.seen)
        if self.idx.size == 0:
            raise ValueError("empty training set: no samples of seen classes")
        self.classes = dataset.seen
        if model.direction == "s2v" and dataset.dim != model.out_dim:
            raise ValueError(f"model embeds into {model.out_dim}-D but features are {dataset.dim}-D")
        if model.text is not None:
            self.desc_idx = {}
            for j in self.idx:
                texts = dataset.descriptions.get(int(j))
                if not texts:
                    raise ValueError(f"training sample {j} has no description")
                self.desc_idx[int(j)] = texts

    def _text_batch(self, sample_idx):
        texts = []
        for j in sample_idx:
            options = self.desc_idx[int(j)]
            texts.append(options[int(self.rng.integers(len(options)))])
        return TokenBatch.from_texts(texts, self.model.vocab, self.model.text.max_len)

    def ls_batch(self, b):
        """``(inputs, target)`` for samples ``b`` under the least-square loss."""
        ds = self.dataset
        if self.model.direction == "v2s":
            return {VISUAL: ds.features[:, b]}, ds.sample_semantic(self.model.target_modality, b)
        inputs = {m: ds.sample_semantic(m, b) for m in self.model.branches}
        if self.model.text is not None:
            inputs[TEXT] = self._text_batch(b)
        return inputs, ds.features[:, b]

    def hinge_batch(self, b):
        """``(inputs, target, labels)`` for the ranking loss."""
        ds = self.dataset
        labels = np.searchsorted(self.classes, ds.labels[b])
        if self.model.direction == "v2s":
            protos = ds.class_vectors(self.model.target_modality, self.classes)
            return {VISUAL: ds.features[:, b]}, protos, labels
        inputs = {m: ds.class_vectors(m, self.classes) for m in self.model.branches}
        if self.model.text is not None:
            reps = [int(self.rng.choice(ds.sample_indices([c]))) for c in self.classes]
            inputs[TEXT] = self._text_batch(reps)
        return inputs, ds.features[:, b], labels


def batch_objective(model, batch, config):
    """Loss value and gradients for one prepared batch."""
    if config.loss == "ls":
        inputs, target = batch
        return nn.backward(model, inputs, target, "ls", config.lam)
    inputs, target, labels = batch
    return nn.backward(model, inputs, target, "hinge", config.lam, labels, config.margin)


def train(model, dataset, config):
    """Minibatch training on the seen classes.

    Returns
    -------
    model : DemModel
        The same object, trained in place.
    history : list of float
        Mean training objective of each epoch (sample-weighted over batches).
    """
    rng = np.random.default_rng(config.seed)
    sampler = _Sampler(model, dataset, config, rng)
    opt = make_optimizer(config.optimizer, config.lr, config.clip_norm)
    n = sampler.idx.size
    bs = n if config.batch_size is None else min(config.batch_size, n)
    params = model.parameters()
    history = []
    for _ in range(config.epochs):
        perm = sampler.idx[rng.permutation(n)]
        total = 0.0
        for start in range(0, n, bs):
            b = perm[start:start + bs]
            batch = sampler.ls_batch(b) if config.loss == "ls" else sampler.hinge_batch(b)
            value, grads = batch_objective(model, batch, config)
            opt.step(params, grads)
            total += value * b.size
        history.append(total / n)
        if not np.isfinite(history[-1]):
            raise FloatingPointError("training diverged (non-finite loss)")
    return model, history


def train_reverse_direction(dataset, config):
    """Train the visual -> semantic model (two FC layers on the feature side)."""
    cfg = config if config.direction == "v2s" else _with(config, direction="v2s")
    model = build_model(dataset, cfg)
    return train(model, dataset, cfg)


def _with(config, **changes):
    from dataclasses import replace

    return replace(config, **changes)


def evaluate(model, dataset, classes=None, ks=(1,), distance="sqeuclidean"):
    """``{k: hit@k}`` on the samples of ``classes`` (default: unseen)."""
    classes = dataset.unseen if classes is None else classes
    protos = prototypes_for(model, dataset, classes)
    return {k: hit_at_k(model, dataset, protos, k, distance) for k in ks}


LAMBDA_GRID = (1e-4, 1e-3, 1e-2, 1e-1, 1.0)


def select_lambda(dataset, config, grid=LAMBDA_GRID, fraction=0.2, repeats=1,
                  distance="sqeuclidean"):
    """Pick ``lam`` by hit@1 on pseudo-unseen validation classes.

    ``repeats > 1`` averages over that many independently seeded splits.
    Returns ``(best_lambda, mean_scores)``; ties go to the smaller lambda.
    """
    from .data import make_validation_split

    scores = np.zeros(len(grid))
    for r in range(repeats):
        train_c, val_c = make_validation_split(dataset, fraction, config.seed + r)
        fold = dataset.with_split(train_c, val_c)
        for i, lam in enumerate(grid):
            cfg = _with(config, lam=lam)
            model = build_model(fold, cfg)
            train(model, fold, cfg)
            scores[i] += evaluate(model, fold, distance=distance)[1]
            log.info("lambda %g repeat %d: val hit@1 %.4f", lam, r, scores[i] / (r + 1))
    scores /= repeats
    return float(grid[int(np.argmax(scores))]), scores


# -- checkpoints -----------------------------------------------------------------

CHECKPOINT_MAGIC = b"DEMM"
CHECKPOINT_VERSION = 1
_ACT_CODES = {"identity": 0, "relu": 1, "scaled_tanh": 2}
_ACT_NAMES = {v: k for k, v in _ACT_CODES.items()}


class CheckpointError(ValueError):
    pass


def _w_str(buf, s):
    b = s.encode("utf-8")
    buf.write(struct.pack("<H", len(b)))
    buf.write(b)


def _checksum(payload):
    return hashlib.blake2b(payload, digest_size=8).digest()


def save_checkpoint(model, path):
    """Write ``model`` as a versioned little-endian binary with a trailing checksum."""
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(struct.pack("<I", CHECKPOINT_VERSION))
    flags = (model.hidden_bias is not None) | ((model.layer2 is not None) << 1)
    buf.write(struct.pack(
        "<BBBBB", VARIANTS.index(model.variant), model.direction == "v2s", flags,
        _ACT_CODES[model.hidden_activation], _ACT_CODES[model.output_activation],
    ))
    buf.write(struct.pack("<I", len(model.branches)))
    for m, w in sorted(model.branches.items()):
        _w_str(buf, m)
        buf.write(struct.pack("<I", w.shape[1]))
    buf.write(struct.pack("<II", model.hidden_dim, model.out_dim))
    _w_str(buf, model.target_modality or "")
    if model.text is not None:
        t = model.text
        buf.write(struct.pack("<IIII", t.embedding.shape[0], t.embedding.shape[1],
                              t.forward_cell.hidden, t.max_len))
    params = model.parameters()
    buf.write(struct.pack("<I", len(params)))
    for name, arr in params.items():
        _w_str(buf, name)
        buf.write(struct.pack("<B", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        buf.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    payload = buf.getvalue()
    with open(path, "wb") as fh:
        fh.write(payload)
        fh.write(_checksum(payload))
    if model.vocab is not None:
        model.vocab.save(str(path) + ".vocab")


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, fmt):
        s = struct.Struct(fmt)
        if self.pos + s.size > len(self.data):
            raise CheckpointError("truncated checkpoint")
        out = s.unpack_from(self.data, self.pos)
        self.pos += s.size
        return out

    def string(self):
        (n,) = self.take("<H")
        raw = self.data[self.pos:self.pos + n]
        self.pos += n
        return raw.decode("utf-8")

    def floats(self, count):
        end = self.pos + 8 * count
        if end > len(self.data):
            raise CheckpointError("truncated checkpoint")
        arr = np.frombuffer(self.data[self.pos:end], dtype="<f8").astype(np.float64)
        self.pos = end
        return arr


def load_checkpoint(path):
    """Read a checkpoint written by :func:`save_checkpoint`.

    Raises
    ------
    CheckpointError
        On bad magic, unsupported version, checksum mismatch or truncation.
    """
    import os

    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 16 or raw[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: not a model checkpoint (bad magic)")
    payload, stored = raw[:-8], raw[-8:]
    if _checksum(payload) != stored:
        raise CheckpointError(f"{path}: checksum mismatch; file is corrupted")
    r = _Reader(payload)
    r.pos = 4
    (version,) = r.take("<I")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    variant, v2s, flags, hid_act, out_act = r.take("<BBBBB")
    (n_mod,) = r.take("<I")
    dims = {}
    for _ in range(n_mod):
        name = r.string()
        (dims[name],) = r.take("<I")
    hidden, out_dim = r.take("<II")
    target = r.string() or None
    text_dims = r.take("<IIII") if VARIANTS[variant] == "text" else None
    (n_params,) = r.take("<I")
    params = {}
    for _ in range(n_params):
        name = r.string()
        (ndim,) = r.take("<B")
        shape = r.take(f"<{ndim}I")
        params[name] = r.floats(int(np.prod(shape))).reshape(shape)
    if r.pos != len(payload):
        raise CheckpointError(f"{path}: trailing bytes after parameters")

    branches = {m: params[f"W1.{m}"] for m in dims}
    layer2 = None
    if flags & 2:
        layer2 = nn.DenseLayer(params["W2"], params.get("b2"), _ACT_NAMES[out_act])
    enc = None
    if text_dims is not None:
        vocab_size, embed_dim, lstm_hidden, max_len = text_dims
        enc = BiLstmEncoder(
            params["text.embedding"],
            LstmCell(params["text.fw.weight"], params["text.fw.bias"]),
            LstmCell(params["text.bw.weight"], params["text.bw.bias"]),
            params["text.proj_fw"], params["text.proj_bw"],
            _ACT_NAMES[hid_act], max_len,
        )
    model = DemModel(branches, layer2, params.get("b1"), enc, _ACT_NAMES[hid_act],
                     "v2s" if v2s else "s2v", target)
    if model.hidden_dim != hidden or model.out_dim != out_dim or model.variant != VARIANTS[variant]:
        raise CheckpointError(f"{path}: header dimensions disagree with the stored weights")
    vocab_path = str(path) + ".vocab"
    if enc is not None and os.path.exists(vocab_path):
        model.vocab = Vocabulary.load(vocab_path)
    return model
