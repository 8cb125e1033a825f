"""Command-line front end: ``demzsl <command> [flags]``.

Settings come from built-in defaults, then an optional ``key=value`` file
(``--config``), then command-line flags; later sources win. The resolved
settings are logged at startup. Every output file is a pure function of
the settings and the input data, so reruns are byte-identical.
"""

import argparse
import csv
import logging
import os
import sys
from dataclasses import dataclass, fields, replace

import numpy as np

from . import hubness, ridge
from .data import DatasetError, SynthSpec, load_dataset, synth_generate, write_dataset
from .model import (CheckpointError, TEXT, TrainConfig, build_model, evaluate, load_checkpoint,
                    prototypes_for, save_checkpoint, select_lambda, train)
from .linalg import LinalgError

log = logging.getLogger("demzsl")

COMMANDS = ("train", "eval", "baseline", "analyze-hubness", "synth", "export-embeddings")
DEFAULT_HIT_K = 5
DEFAULT_NK_K = 1
CHECKPOINT_NAME = "model.demm"


@dataclass
class RunConfig:
    data: str = None
    out: str = "."
    modality: tuple = None          # None: every semantic table in the dataset
    direction: str = "s2v"
    loss: str = "ls"
    optimizer: str = "auto"         # adam, or rmsprop with clipping for descriptions
    lr: float = 1e-4
    lam: float = None               # None: grid search on a validation split
    lambda_repeats: int = 1         # 5 averages five independently seeded splits
    val_fraction: float = 0.2
    epochs: int = 100
    batch: int = 64
    seed: int = 0
    distance: str = "sqeuclidean"
    k: int = None                   # None: 5 for hit@k, 1 for N_k
    margin: float = 0.1
    clip_norm: float = None
    hidden: int = None
    layers: int = 2
    bias: bool = False
    max_len: int = 30
    embed_dim: int = 512
    lstm_hidden: int = 512
    # synthetic generator
    dim: int = 100
    semantic_dim: int = 20
    num_seen: int = 30
    num_unseen: int = 10
    samples_per_class: int = 50
    noise: float = 0.3
    depth: int = 2
    generator_hidden: int = SynthSpec.hidden
    gain: float = SynthSpec.gain
    features_format: str = "bin"

    def validate(self):
        choices = {
            "direction": ("s2v", "v2s"), "loss": ("ls", "hinge"),
            "optimizer": ("auto", "adam", "rmsprop", "sgd"),
            "distance": ("sqeuclidean", "cosine"), "features_format": ("bin", "csv"),
            "layers": (1, 2),
        }
        for name, allowed in choices.items():
            if getattr(self, name) not in allowed:
                raise ValueError(f"{name} must be one of {allowed}, got {getattr(self, name)!r}")
        positive = ("lr", "epochs", "batch", "lambda_repeats", "margin", "max_len",
                    "embed_dim", "lstm_hidden", "dim", "semantic_dim", "num_seen",
                    "num_unseen", "samples_per_class", "depth", "generator_hidden")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        if self.k is not None and self.k <= 0:
            raise ValueError(f"k must be positive, got {self.k!r}")
        if self.lam is not None and self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if not 0 < self.val_fraction < 1:
            raise ValueError("val_fraction must be in (0, 1)")
        if self.noise < 0:
            raise ValueError("noise must be nonnegative")
        return self


_ALIASES = {"lambda": "lam", "least_square": "ls", "data_dir": "data"}


def _parse_bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _coerce(name, text):
    """Parse ``text`` into the type of RunConfig field ``name``."""
    default = RunConfig.__dataclass_fields__[name].default
    text = text.strip()
    if name == "modality":
        mods = tuple(m.strip() for m in text.split(",") if m.strip())
        return mods or None
    if name == "loss":
        return _ALIASES.get(text, text)
    if text.lower() in ("", "none") and name in ("lam", "clip_norm", "hidden", "data", "k"):
        return None
    if isinstance(default, bool):
        return _parse_bool(text)
    if isinstance(default, int) or name in ("hidden", "k"):
        return int(text)
    if isinstance(default, float) or name in ("lam", "clip_norm"):
        return float(text)
    return text


def read_config_file(path):
    """``key=value`` lines (``#`` comments allowed) -> dict of typed values."""
    known = {f.name for f in fields(RunConfig)}
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}: line {lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = _ALIASES.get(key, key).replace("-", "_")
            if key not in known:
                raise ValueError(f"{path}: line {lineno}: unknown key {key!r}")
            try:
                out[key] = _coerce(key, value)
            except ValueError as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from None
    return out


def build_parser():
    parser = argparse.ArgumentParser(
        prog="demzsl",
        description="Zero-shot learning with a semantic-to-visual deep embedding model.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--data", help="dataset directory")
    parser.add_argument("--config", help="key=value settings file (flags override it)")
    parser.add_argument("--direction", choices=("s2v", "v2s"))
    parser.add_argument("--loss", choices=("ls", "hinge"))
    parser.add_argument("--modality", help="comma-separated semantic modalities")
    parser.add_argument("--optimizer", choices=("auto", "adam", "rmsprop", "sgd"))
    parser.add_argument("--lr", type=float)
    parser.add_argument("--lambda", dest="lam", type=float,
                        help="weight penalty; omit to grid-search it")
    parser.add_argument("--lambda-repeats", type=int,
                        help="validation splits averaged during the lambda search")
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--batch", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--k", type=int, help="k for hit@k and N_k")
    parser.add_argument("--distance", choices=("sqeuclidean", "cosine"))
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--checkpoint", action="append", default=[],
                        help="model checkpoint (repeatable for eval and analyze-hubness)")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def resolve_config(args):
    values = read_config_file(args.config) if args.config else {}
    for f in fields(RunConfig):
        flag = getattr(args, f.name, None)
        if flag is not None:
            values[f.name] = _coerce(f.name, flag) if f.name == "modality" else flag
    return replace(RunConfig(), **values).validate()


def _threads():
    raw = os.environ.get("DEM_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"DEM_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"DEM_THREADS must be a positive integer, got {raw!r}")
    return n


# -- helpers -----------------------------------------------------------------


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_rows(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    log.info("wrote %s", path)


def _need_data(cfg):
    if not cfg.data:
        raise ValueError("--data is required for this command")
    return load_dataset(cfg.data)


def _optimizer(cfg, mods):
    if cfg.optimizer != "auto":
        return cfg.optimizer, cfg.clip_norm
    if mods and TEXT in mods:
        return "rmsprop", cfg.clip_norm if cfg.clip_norm is not None else 5.0
    return "adam", cfg.clip_norm


def train_config(cfg, dataset, lam):
    mods = cfg.modality or tuple(dataset.modalities)
    opt, clip = _optimizer(cfg, mods)
    return TrainConfig(
        optimizer=opt, lr=cfg.lr, lam=lam, batch_size=cfg.batch, epochs=cfg.epochs,
        seed=cfg.seed, loss=cfg.loss, margin=cfg.margin, clip_norm=clip,
        hidden=cfg.hidden, layers=cfg.layers, bias=cfg.bias, modalities=cfg.modality,
        direction=cfg.direction, max_len=cfg.max_len, embed_dim=cfg.embed_dim,
        lstm_hidden=cfg.lstm_hidden,
    )


def _k_values(cfg, n_classes):
    k = min(cfg.k or DEFAULT_HIT_K, n_classes)
    return (1,) if k == 1 else (1, k)


# -- commands ----------------------------------------------------------------


def cmd_train(cfg, args):
    dataset = _need_data(cfg)
    base = train_config(cfg, dataset, 0.0)
    rows = []
    if cfg.lam is None:
        from .model import LAMBDA_GRID

        lam, scores = select_lambda(dataset, base, LAMBDA_GRID, cfg.val_fraction,
                                    cfg.lambda_repeats, cfg.distance)
        log.info("lambda grid search selected %g", lam)
        rows += [(f"val_hit@1[lambda={g!r}]", "", s) for g, s in zip(LAMBDA_GRID, scores)]
    else:
        lam = cfg.lam
        log.info("lambda given explicitly (%g); no grid search performed", lam)
    tc = replace(base, lam=lam)
    model = build_model(dataset, tc)
    _, history = train(model, dataset, tc)
    rows = [("loss", e + 1, v) for e, v in enumerate(history)] + rows
    rows.append(("lambda", "", lam))
    for k, v in evaluate(model, dataset, ks=_k_values(cfg, len(dataset.unseen)),
                         distance=cfg.distance).items():
        rows.append((f"hit@{k}", "", v))
        log.info("unseen hit@%d = %.4f", k, v)
    os.makedirs(cfg.out, exist_ok=True)
    save_checkpoint(model, os.path.join(cfg.out, CHECKPOINT_NAME))
    _write_rows(os.path.join(cfg.out, "metrics.csv"), ["metric", "epoch", "value"], rows)


def _checkpoints(args, at_least=1):
    if len(args.checkpoint) < at_least:
        raise ValueError(f"need at least {at_least} --checkpoint")
    return [(p, load_checkpoint(p)) for p in args.checkpoint]


def cmd_eval(cfg, args):
    dataset = _need_data(cfg)
    models = _checkpoints(args)
    ks = _k_values(cfg, len(dataset.unseen))
    columns = [evaluate(m, dataset, ks=ks, distance=cfg.distance) for _, m in models]
    header = ["metric"] + [p for p, _ in models]
    rows = [["direction"] + [m.direction for _, m in models]]
    rows += [[f"hit@{k}"] + [c[k] for c in columns] for k in ks]
    for row in rows:
        log.info("%-10s %s", row[0], "  ".join(_fmt(v) for v in row[1:]))
    os.makedirs(cfg.out, exist_ok=True)
    _write_rows(os.path.join(cfg.out, "eval.csv"), header, rows)


def _ridge_models(cfg, dataset):
    modality = (cfg.modality or dataset.modalities)[0]
    out = {}
    for direction in ridge.DIRECTIONS:
        if cfg.lam is None:
            lam, _ = ridge.select_lambda(dataset, direction, fraction=cfg.val_fraction,
                                         seed=cfg.seed, repeats=cfg.lambda_repeats,
                                         modality=modality, distance=cfg.distance)
        else:
            lam = cfg.lam
        out[direction] = ridge.fit_direction(dataset, lam, direction, modality)
    return modality, out


def cmd_baseline(cfg, args):
    dataset = _need_data(cfg)
    modality, models = _ridge_models(cfg, dataset)
    idx = dataset.sample_indices(dataset.seen)
    sem = dataset.sample_semantic(modality, idx)
    vis = dataset.features[:, idx]
    rows = []
    for direction, m in models.items():
        rows.append((f"acc_{direction}", ridge.ridge_accuracy(m, dataset, modality=modality,
                                                             distance=cfg.distance)))
    for direction, m in models.items():
        src, tgt = (sem, vis) if direction == "s2v" else (vis, sem)
        check = ridge.shrinkage_check(m, src, tgt)
        rows += [
            (f"lambda_{direction}", m.lam),
            (f"ratio_{direction}", ridge.shrinkage_ratio(src, m.lam)),
            (f"norm_wa_{direction}", check.norm_wa),
            (f"norm_b_{direction}", check.norm_b),
            (f"norm_check_{direction}", check.satisfied),
        ]
    for name, v in rows:
        log.info("%s = %s", name, _fmt(v))
    os.makedirs(cfg.out, exist_ok=True)
    _write_rows(os.path.join(cfg.out, "baseline.csv"), ["metric", "value"], rows)


def _safe_skew(dist, label):
    try:
        return hubness.skewness(dist)
    except hubness.DegenerateDistribution:
        log.warning("%s: all N_k counts equal, skewness undefined (written as nan)", label)
        return float("nan")


def cmd_analyze_hubness(cfg, args):
    dataset = _need_data(cfg)
    if args.checkpoint:
        by_dir = {}
        for path, m in _checkpoints(args):
            if m.direction in by_dir:
                raise ValueError(f"two {m.direction} checkpoints given; need one per direction")
            by_dir[m.direction] = m
        source = "checkpoint"
    else:
        _, by_dir = _ridge_models(cfg, dataset)
        source = "ridge"
    classes = dataset.unseen
    k = min(cfg.k or DEFAULT_NK_K, len(classes))
    feats = dataset.features[:, dataset.sample_indices(classes)]
    summary = [("k", k), ("source", source)]
    os.makedirs(cfg.out, exist_ok=True)
    for direction in ridge.DIRECTIONS:
        if direction not in by_dir:
            continue
        m = by_dir[direction]
        if isinstance(m, ridge.RidgeModel):
            protos = dataset.prototypes(classes, m.modalities)
        else:
            protos = prototypes_for(m, dataset, classes)
        queries, targets = m.zsl_space(feats, protos)
        dist = hubness.nk_distribution(queries, targets, k, cfg.distance)
        skew = _safe_skew(dist, direction)
        hubness.write_nk_csv(os.path.join(cfg.out, f"nk_{direction}.csv"), dist,
                             protos.class_ids, skew)
        summary.append((f"skew_{direction}", skew))
        log.info("N_%d skewness %s: %.4f", k, direction, skew)
    _write_rows(os.path.join(cfg.out, "hubness_summary.csv"), ["metric", "value"], summary)


def cmd_synth(cfg, args):
    spec = SynthSpec(
        dim=cfg.dim, semantic_dim=cfg.semantic_dim, num_seen=cfg.num_seen,
        num_unseen=cfg.num_unseen, samples_per_class=cfg.samples_per_class,
        noise=cfg.noise, depth=cfg.depth, hidden=cfg.generator_hidden, gain=cfg.gain,
        seed=cfg.seed,
    )
    dataset = synth_generate(spec)
    write_dataset(dataset, cfg.out, cfg.features_format)
    log.info("wrote synthetic dataset (%d samples, %d classes) to %s",
             dataset.num_samples, dataset.class_ids.size, cfg.out)


def cmd_export_embeddings(cfg, args):
    dataset = _need_data(cfg)
    (path, model), = _checkpoints(args)[:1]
    classes = dataset.unseen
    protos = prototypes_for(model, dataset, classes)
    idx = dataset.sample_indices(classes)
    queries, targets = model.zsl_space(dataset.features[:, idx], protos)
    width = targets.shape[0]
    rows = [("proto", cid, *col) for cid, col in zip(protos.class_ids, targets.T)]
    rows += [("sample", cid, *col) for cid, col in zip(dataset.labels[idx], queries.T)]
    os.makedirs(cfg.out, exist_ok=True)
    _write_rows(os.path.join(cfg.out, "embeddings.csv"),
                ["kind", "class_id"] + [f"e{i}" for i in range(width)], rows)


HANDLERS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "baseline": cmd_baseline,
    "analyze-hubness": cmd_analyze_hubness,
    "synth": cmd_synth,
    "export-embeddings": cmd_export_embeddings,
}


def _setup_logging(verbose):
    log.setLevel(logging.DEBUG if verbose else logging.INFO)
    if not any(getattr(h, "_demzsl", False) for h in log.handlers):
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
        handler._demzsl = True
        log.addHandler(handler)


def main(argv=None):
    args = build_parser().parse_args(argv)
    _setup_logging(args.verbose)
    try:
        cfg = resolve_config(args)
        threads = _threads()
        for f in fields(cfg):
            log.info("config %s = %r", f.name, getattr(cfg, f.name))
        log.info("config threads = %d", threads)
        from threadpoolctl import threadpool_limits

        with threadpool_limits(limits=threads):
            HANDLERS[args.command](cfg, args)
    except (ValueError, OSError, DatasetError, CheckpointError, LinalgError,
            FloatingPointError) as exc:
        log.error("%s", exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
