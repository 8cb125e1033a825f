"""Dense numeric kernels shared by every other module.

Matrices are plain ``numpy.ndarray`` objects of dtype float64. Samples are
stored as *columns* (``A`` is ``L x N``, ``B`` is ``D x N``) so the ridge
closed form reads ``W = B A^T (A A^T + lam I)^-1``.
"""

import numpy as np
from scipy import linalg as sla

__all__ = [
    "LinalgError",
    "NotSPDError",
    "NonFiniteError",
    "ConvergenceError",
    "as_matrix",
    "check_finite",
    "matmul",
    "cholesky",
    "solve_spd",
    "spectral_norm",
]

POWER_MAX_ITER = 1000
POWER_TOL = 1e-12
# the Gram matrix is squared at least this many times before iterating,
# i.e. the iteration runs on G^(2^s); see spectral_norm
POWER_SQUARINGS = 6


class LinalgError(ValueError):
    pass


class NotSPDError(LinalgError):
    pass


class NonFiniteError(LinalgError):
    pass


class ConvergenceError(LinalgError):
    pass


def check_finite(x, what="matrix"):
    if not np.all(np.isfinite(x)):
        raise NonFiniteError(f"{what} contains NaN or Inf entries")
    return x


def as_matrix(x, what="matrix"):
    """Return ``x`` as a finite 2-D float64 array (no copy when possible)."""
    m = np.asarray(x, dtype=np.float64)
    if m.ndim == 1:
        m = m.reshape(-1, 1)
    if m.ndim != 2:
        raise LinalgError(f"{what} must be 2-D, got shape {m.shape}")
    return check_finite(m, what)


def matmul(a, b):
    """Matrix product ``a @ b`` with shape and finiteness checks."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise LinalgError(f"dimension mismatch: {a.shape} x {b.shape}")
    return check_finite(a @ b, "product")


def cholesky(m):
    """Lower Cholesky factor ``L`` with ``m = L L^T``; raises NotSPDError."""
    m = as_matrix(m, "m")
    if m.shape[0] != m.shape[1]:
        raise LinalgError(f"m must be square, got {m.shape}")
    try:
        return sla.cholesky(m, lower=True, check_finite=False)
    except sla.LinAlgError as exc:
        raise NotSPDError(f"Cholesky factorization failed: {exc}") from None


def solve_spd(m, rhs):
    """Solve ``m X = rhs`` for symmetric positive definite ``m``.

    Uses a Cholesky factorization; a failed factorization means ``m`` is
    not SPD and raises :class:`NotSPDError`.
    """
    m = as_matrix(m, "m")
    rhs_arr = np.asarray(rhs, dtype=np.float64)
    vector = rhs_arr.ndim == 1
    rhs_m = as_matrix(rhs_arr, "rhs")
    n, n2 = m.shape
    if n != n2:
        raise LinalgError(f"m must be square, got {m.shape}")
    if rhs_m.shape[0] != n:
        raise LinalgError(f"dimension mismatch: m {m.shape}, rhs {rhs_m.shape}")
    if not np.allclose(m, m.T, rtol=1e-10, atol=1e-12 * max(1.0, np.abs(m).max())):
        raise NotSPDError("matrix is not symmetric")
    try:
        factor = sla.cho_factor(m, lower=True, check_finite=False)
    except sla.LinAlgError as exc:
        raise NotSPDError(f"Cholesky factorization failed: {exc}") from None
    x = sla.cho_solve(factor, rhs_m, check_finite=False)
    check_finite(x, "solution")
    return x.ravel() if vector else x


def _start_vector(n):
    # fixed generator so the iteration is reproducible; a constant vector
    # could be orthogonal to the dominant eigenvector of structured inputs
    v = np.random.default_rng(0x5EED).standard_normal(n)
    return v / np.linalg.norm(v)


def _squarings(n, tol):
    # G^(2^s) has trace within a factor n of lambda_max^(2^s), so once
    # n^(1/2^s) - 1 <= tol its top eigen-space is resolved to tol even
    # when the leading eigenvalues are clustered
    need = np.log2(np.log(max(n, 2)) / max(tol, np.finfo(float).eps))
    return max(POWER_SQUARINGS, int(np.ceil(need)))


def spectral_norm(m, max_iter=POWER_MAX_ITER, tol=POWER_TOL):
    """Largest singular value of ``m`` by power iteration.

    The iteration runs on the smaller Gram matrix ``G`` (``m^T m`` or
    ``m m^T``). To cope with clustered top eigenvalues the Gram matrix is
    first squared ``s`` times (renormalising each time), where ``s`` is
    large enough that eigenvalues within ``tol`` of the largest are the
    only ones left; each iteration then advances as much as ``2**s`` plain
    steps. The returned value is the Rayleigh quotient ``v^T G v`` of the
    converged vector on the *original* ``G``, square-rooted.

    Raises
    ------
    LinalgError
        If ``m`` is empty.
    ConvergenceError
        If the Rayleigh quotient has not settled to ``tol`` (relative)
        after ``max_iter`` iterations.
    """
    m = as_matrix(m)
    if m.size == 0:
        raise LinalgError("spectral_norm of an empty matrix")
    gram = m.T @ m if m.shape[1] <= m.shape[0] else m @ m.T
    scale = np.abs(gram).max()
    if scale == 0.0:
        return 0.0

    accel = gram / scale
    for _ in range(_squarings(gram.shape[0], tol)):
        nxt = accel @ accel
        peak = np.abs(nxt).max()
        if peak == 0.0:
            break
        accel = nxt / peak

    v = _start_vector(gram.shape[0])
    rq_old = v @ gram @ v
    for _ in range(max_iter):
        w = accel @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            # start vector orthogonal to range of the accelerated matrix
            w = gram @ v
            nw = np.linalg.norm(w)
            if nw == 0.0:
                return 0.0
        v = w / nw
        rq = v @ gram @ v
        if abs(rq - rq_old) <= tol * max(abs(rq), 1e-300):
            return float(np.sqrt(max(rq, 0.0)))
        rq_old = rq
    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} iterations"
    )
