"""k-occurrence (N_k) distributions and their skewness.

``N_k(i)`` counts how often prototype ``i`` is among the ``k`` nearest
prototypes of a test point. A right-skewed N_k distribution means a few
prototypes ("hubs") attract most queries.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .neighbors import pairwise_distance, rank_targets


class DegenerateDistribution(ValueError):
    """Skewness is undefined because every prototype has the same count."""


@dataclass
class NkDistribution:
    k: int
    counts: np.ndarray
    num_test_samples: int

    @property
    def num_prototypes(self):
        return self.counts.size


def nk_distribution(test_points, prototypes, k=1, distance="sqeuclidean"):
    """Count k-NN memberships of each prototype column over test columns.

    Neighbour ties resolve to the lower prototype index.
    """
    test_points = np.asarray(test_points, dtype=np.float64)
    prototypes = np.asarray(prototypes, dtype=np.float64)
    n_proto = prototypes.shape[1]
    if not 1 <= k <= n_proto:
        raise ValueError(f"k must be in [1, {n_proto}], got {k}")
    if test_points.shape[0] != prototypes.shape[0]:
        raise ValueError(
            f"dimension mismatch: test points {test_points.shape[0]}-D, "
            f"prototypes {prototypes.shape[0]}-D"
        )
    nearest = rank_targets(pairwise_distance(test_points, prototypes, distance))[:, :k]
    counts = np.bincount(nearest.ravel(), minlength=n_proto).astype(np.int64)
    return NkDistribution(k, counts, test_points.shape[1])


def skewness(dist):
    """Standardised third moment of the N_k counts (population moments).

    Raises
    ------
    DegenerateDistribution
        If all counts are equal (zero variance).
    """
    counts = np.asarray(getattr(dist, "counts", dist), dtype=np.float64)
    centred = counts - counts.mean()
    var = np.mean(centred ** 2)
    if var == 0.0:
        raise DegenerateDistribution("all N_k counts are equal; skewness undefined")
    return float(np.mean(centred ** 3) / var ** 1.5)


@dataclass
class DirectionReport:
    k: int
    skew_sv: float
    skew_vs: float
    nk_sv: NkDistribution
    nk_vs: NkDistribution
    class_ids: np.ndarray


def direction_report(dataset, model_sv, model_vs, k=1, distance="sqeuclidean", classes=None):
    """N_k skewness of unseen-class search in both embedding directions.

    ``model_sv`` embeds prototypes into the visual space (features raw);
    ``model_vs`` embeds features into the semantic space (prototypes raw).
    """
    classes = dataset.unseen if classes is None else np.sort(classes)
    idx = dataset.sample_indices(classes)
    feats = dataset.features[:, idx]
    dists = []
    for model in (model_sv, model_vs):
        mods = getattr(model, "modalities", None) or [dataset.modalities[0]]
        protos = dataset.prototypes(classes, mods)
        queries, targets = model.zsl_space(feats, protos)
        dists.append(nk_distribution(queries, targets, k, distance))
    return DirectionReport(k, skewness(dists[0]), skewness(dists[1]), dists[0], dists[1], classes)


def write_nk_csv(path, dist, class_ids, skew):
    """``prototype_id,count`` rows followed by a ``skewness,<value>`` line."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["prototype_id", "count"])
        for cid, c in zip(class_ids, dist.counts):
            w.writerow([int(cid), int(c)])
        w.writerow(["skewness", repr(float(skew))])


def read_nk_csv(path):
    """Inverse of :func:`write_nk_csv`: ``(class_ids, counts, skewness)``."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if rows[0] != ["prototype_id", "count"] or rows[-1][0] != "skewness":
        raise ValueError(f"{path}: not an N_k report")
    body = rows[1:-1]
    ids = np.array([int(r[0]) for r in body], dtype=np.int64)
    counts = np.array([int(r[1]) for r in body], dtype=np.int64)
    return ids, counts, float(rows[-1][1])
