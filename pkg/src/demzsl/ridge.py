"""Closed-form linear ridge regression in either embedding direction.

``W = B A^T (A A^T + lam I)^-1`` minimises ``||B - W A||_F^2 + lam ||W||_F^2``
with samples as columns of ``A`` (source) and ``B`` (target). The same
formula gives the shrinkage bound ``||W A||_2 <= ||B||_2`` because
``||A^T (A A^T + lam I)^-1 A||_2 = sigma^2 / (sigma^2 + lam) <= 1``.
"""

from dataclasses import dataclass

import numpy as np

from scipy.linalg import solve_triangular

from .linalg import NotSPDError, as_matrix, cholesky, solve_spd, spectral_norm
from .neighbors import pairwise_distance, rank_targets

DIRECTIONS = ("s2v", "v2s")
LAMBDA_GRID = (1e-3, 1e-2, 1e-1, 1.0, 10.0)
SHRINKAGE_TOL = 1e-6
NORM_SLACK = 1e-9


class ShrinkageMismatch(ArithmeticError):
    """The directly computed shrinkage ratio disagrees with sigma^2/(sigma^2+lam)."""


@dataclass
class RidgeModel:
    weight: np.ndarray       # target_dim x source_dim
    direction: str = "s2v"
    lam: float = 0.0
    modality: str = None     # semantic space the model was fitted on

    @property
    def modalities(self):
        return [self.modality] if self.modality else []

    def embed(self, source):
        return self.weight @ np.asarray(source, dtype=np.float64)

    def zsl_space(self, features, prototypes):
        """Queries and targets for nearest-neighbour search.

        ``s2v``: raw features vs embedded prototypes (visual space).
        ``v2s``: embedded features vs raw prototypes (semantic space).
        """
        sem = prototypes.semantic[self.modality or sorted(prototypes.semantic)[0]]
        if self.direction == "s2v":
            return features, self.embed(sem)
        return self.embed(features), sem


def fit_ridge(source, target, lam, direction="s2v"):
    """Fit ``W`` mapping source columns onto target columns.

    Raises
    ------
    NotSPDError
        If ``A A^T + lam I`` is singular (only possible with ``lam == 0``).
    """
    a = as_matrix(source, "source")
    b = as_matrix(target, "target")
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"sample count mismatch: {a.shape[1]} vs {b.shape[1]}")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}")
    gram = a @ a.T + lam * np.eye(a.shape[0])
    try:
        # W gram = B A^T  <=>  gram W^T = A B^T  (gram is symmetric)
        w = solve_spd(gram, a @ b.T).T
    except NotSPDError as exc:
        raise NotSPDError(f"A A^T + lambda I is singular: {exc}") from None
    return RidgeModel(w, direction, float(lam))


def normal_equation_residual(model, source, target):
    """Relative residual of ``W (A A^T + lam I) = B A^T``."""
    a = np.asarray(source, dtype=np.float64)
    b = np.asarray(target, dtype=np.float64)
    lhs = model.weight @ (a @ a.T + model.lam * np.eye(a.shape[0]))
    rhs = b @ a.T
    return float(np.linalg.norm(lhs - rhs) / max(np.linalg.norm(rhs), 1e-300))


def ridge_objective(weight, source, target, lam):
    r = target - weight @ source
    return float(np.sum(r * r) + lam * np.sum(weight * weight))


def shrinkage_ratio(source, lam, tol=SHRINKAGE_TOL):
    """``||A^T (A A^T + lam I)^-1 A||_2``, checked against ``sigma^2/(sigma^2+lam)``.

    With ``lam == 0`` the operator is the orthogonal projector onto the row
    space of ``A``, so the value is 1 for any nonzero ``A`` (the
    ``lam -> 0`` limit is used when ``A A^T`` is singular).

    The operator is evaluated as ``C^T C`` with ``C = R^-1 A`` for the
    Cholesky factor ``R R^T = A A^T + lam I``, so its norm is
    ``||C||_2^2`` and only an ``L x L`` Gram matrix is ever iterated on.
    """
    a = as_matrix(source, "source")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    sigma = spectral_norm(a)
    if sigma == 0.0:
        return 0.0
    predicted = sigma ** 2 / (sigma ** 2 + lam)
    gram = a @ a.T + lam * np.eye(a.shape[0])
    try:
        factor = cholesky(gram)
    except NotSPDError:
        if lam == 0:
            return 1.0
        raise
    direct = spectral_norm(solve_triangular(factor, a, lower=True, check_finite=False)) ** 2
    if abs(direct - predicted) > tol * max(1.0, predicted):
        raise ShrinkageMismatch(
            f"direct ratio {direct!r} vs sigma^2/(sigma^2+lambda) {predicted!r}"
        )
    return direct


@dataclass
class ShrinkageReport:
    norm_wa: float
    norm_b: float
    satisfied: bool


def shrinkage_check(model, source, target):
    """Compare ``||W A||_2`` with ``||B||_2``; the bound holds for any ridge fit."""
    wa = model.weight @ np.asarray(source, dtype=np.float64)
    norm_wa = spectral_norm(wa)
    norm_b = spectral_norm(target)
    return ShrinkageReport(norm_wa, norm_b, norm_wa <= norm_b + NORM_SLACK)


# -- zero-shot use --------------------------------------------------------------


def _direction_data(dataset, classes, modality, direction):
    idx = dataset.sample_indices(classes)
    sem = dataset.sample_semantic(modality, idx)
    vis = dataset.features[:, idx]
    return (sem, vis) if direction == "s2v" else (vis, sem)


def fit_direction(dataset, lam, direction="s2v", modality=None, classes=None):
    """Ridge fit on the samples of ``classes`` (default: the seen classes)."""
    modality = modality or dataset.modalities[0]
    classes = dataset.seen if classes is None else classes
    src, tgt = _direction_data(dataset, classes, modality, direction)
    model = fit_ridge(src, tgt, lam, direction)
    model.modality = modality
    return model


def ridge_accuracy(model, dataset, classes=None, modality=None, distance="sqeuclidean", k=1):
    """hit@k of a ridge model on the samples of ``classes`` (default unseen)."""
    modality = modality or dataset.modalities[0]
    classes = dataset.unseen if classes is None else np.sort(classes)
    protos = dataset.prototypes(classes, [modality])
    idx = dataset.sample_indices(classes)
    queries, targets = model.zsl_space(dataset.features[:, idx], protos)
    order = rank_targets(pairwise_distance(queries, targets, distance))[:, :k]
    truth = np.searchsorted(protos.class_ids, dataset.labels[idx])
    return float(np.mean(np.any(order == truth[:, None], axis=1)))


def select_lambda(dataset, direction="s2v", grid=LAMBDA_GRID, fraction=0.2, seed=0,
                  repeats=1, modality=None, distance="sqeuclidean"):
    """Pick ``lam`` from ``grid`` by pseudo-unseen accuracy on held-out seen classes.

    Returns the best lambda (ties go to the smaller value) and the mean
    validation accuracy per grid point.
    """
    from .data import make_validation_split

    scores = np.zeros(len(grid))
    for r in range(repeats):
        train, val = make_validation_split(dataset, fraction, seed + r)
        fold = dataset.with_split(train, val)
        for i, lam in enumerate(grid):
            m = fit_direction(fold, lam, direction, modality)
            scores[i] += ridge_accuracy(m, fold, modality=modality, distance=distance)
    scores /= repeats
    return float(grid[int(np.argmax(scores))]), scores
