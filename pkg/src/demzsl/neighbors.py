"""Pairwise distances and deterministic nearest-neighbour ranking."""

import numpy as np

DISTANCES = ("sqeuclidean", "cosine")
_CHUNK = 256


def pairwise_distance(queries, targets, distance="sqeuclidean"):
    """Distance table between query columns and target columns.

    Parameters
    ----------
    queries : ndarray, shape (dim, n)
    targets : ndarray, shape (dim, c)
    distance : {'sqeuclidean', 'cosine'}

    Returns
    -------
    ndarray, shape (n, c)
    """
    q = np.asarray(queries, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if q.ndim == 1:
        q = q.reshape(-1, 1)
    if q.shape[0] != t.shape[0]:
        raise ValueError(
            f"dimension mismatch: queries have {q.shape[0]} rows, "
            f"targets have {t.shape[0]}"
        )
    if distance == "sqeuclidean":
        # explicit differences rather than the |q|^2 - 2qt + |t|^2 expansion:
        # exact zeros for coincident points keep tie-breaking well defined
        out = np.empty((q.shape[1], t.shape[1]))
        tt = t.T[None, :, :]
        for start in range(0, q.shape[1], _CHUNK):
            diff = q.T[start:start + _CHUNK, None, :] - tt
            out[start:start + _CHUNK] = np.einsum("ncd,ncd->nc", diff, diff)
        return out
    if distance == "cosine":
        qn = np.linalg.norm(q, axis=0)
        tn = np.linalg.norm(t, axis=0)
        denom = np.outer(qn, tn)
        sim = np.divide(q.T @ t, denom, out=np.zeros_like(denom), where=denom > 0)
        return 1.0 - sim
    raise ValueError(f"unknown distance {distance!r}; expected one of {DISTANCES}")


def rank_targets(dist):
    """Order of targets per query, nearest first; ties go to the lower index."""
    return np.argsort(dist, axis=1, kind="stable")
