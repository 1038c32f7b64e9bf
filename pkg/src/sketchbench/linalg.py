"""Dense factorization kernels: thin QR, SVD, eigendecomposition, and solvers.

Everything here is written against plain numpy array arithmetic; none of it
calls ``numpy.linalg``, which the test suite keeps free to use as an
independent oracle.

Algorithm choices, pinned for reproducibility:

* ``thin_qr``: Householder reflections, reduced form, with the diagonal of R
  made nonnegative by sign flips (deterministic output).
* ``svd``: one-sided Jacobi rotations after a QR preprocessing step, so the
  rotation phase always runs on a square min(n,d) matrix.  Column norms are
  tracked with the Rutishauser update and refreshed once per sweep.  Sweeps
  are capped at 60; hitting the cap raises ConvergenceError carrying the
  worst remaining off-diagonal ratio.
* ``eigh_jacobi``: classical two-sided Jacobi for symmetric matrices, used by
  ``spd_inv_sqrt`` and available to tests as a second route to singular
  values via the Gram matrix.
* ``spectral_norm``: power iteration on the Gram matrix with a fixed-seed
  start vector, capped at 10 000 iterations; matrices whose smaller dimension
  is below 64 take the exact route through ``singular_values`` instead.

Sign convention for the SVD: each column of U has its largest-magnitude
entry positive (ties broken by lowest row index), with the matching V column
flipped in tandem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rng import Prng

JACOBI_SWEEP_CAP = 60
POWER_ITERATION_CAP = 10_000
POWER_FALLBACK_DIM = 64
_JACOBI_TOL = 1e-14
_SPECTRAL_SEED = 0x5EED01

__all__ = [
    "ConvergenceError",
    "RankDeficiencyError",
    "SvdResult",
    "thin_qr",
    "svd",
    "singular_values",
    "truncate_svd",
    "eigh_jacobi",
    "spectral_norm",
    "spd_inv_sqrt",
    "lstsq_exact",
]


class ConvergenceError(RuntimeError):
    """Iteration cap hit; ``residual`` is the worst remaining off-diagonal ratio."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (off-diagonal residual {residual:.3e})")
        self.residual = residual


class RankDeficiencyError(ValueError):
    """Input is numerically rank deficient where full rank is required."""


@dataclass
class SvdResult:
    """Thin SVD triple A = U @ diag(singular_values) @ V.T.

    U is n x r and V is d x r with orthonormal columns, r = min(n, d),
    singular values descending and nonnegative.
    """

    U: np.ndarray
    singular_values: np.ndarray
    V: np.ndarray

    @property
    def rank(self) -> int:
        return len(self.singular_values)


def _norm(x: np.ndarray) -> float:
    return float(np.sqrt(np.sum(x * x)))


def _as_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {a.shape}")
    return a


def thin_qr(a) -> tuple[np.ndarray, np.ndarray]:
    """Reduced QR of an n x d matrix with n >= d.

    Returns (Q, R) with Q n x d orthonormal and R d x d upper triangular
    with nonnegative diagonal.  Rank deficiency is permitted; R then has
    zero (or tiny) diagonal entries.
    """
    a = _as_matrix(a)
    n, d = a.shape
    if n < d:
        raise ValueError(f"thin_qr needs n >= d, got {n}x{d}")
    r = a.copy()
    reflectors: list[np.ndarray | None] = []
    for k in range(d):
        x = r[k:, k]
        sigma = _norm(x)
        if sigma == 0.0:
            reflectors.append(None)
            continue
        alpha = -math.copysign(sigma, x[0])
        v = x.copy()
        v[0] -= alpha
        tau = 2.0 / float(v @ v)
        r[k:, k:] -= np.outer(tau * v, v @ r[k:, k:])
        r[k, k] = alpha
        r[k + 1 :, k] = 0.0
        reflectors.append(v)
    r_out = np.triu(r[:d, :])
    q = np.zeros((n, d))
    q[np.arange(d), np.arange(d)] = 1.0
    for k in range(d - 1, -1, -1):
        v = reflectors[k]
        if v is None:
            continue
        tau = 2.0 / float(v @ v)
        q[k:, :] -= np.outer(tau * v, v @ q[k:, :])
    flip = np.where(np.diag(r_out) < 0.0, -1.0, 1.0)
    r_out *= flip[:, None]
    q *= flip[None, :]
    return q, r_out


def _one_sided_jacobi(w: np.ndarray, accumulate_v: bool) -> np.ndarray | None:
    """Orthogonalize the columns of w in place by plane rotations.

    Returns the accumulated right-rotation matrix V (so that the original
    w equals new_w @ V.T) when requested, else None.
    """
    d = w.shape[1]
    v = np.eye(d) if accumulate_v else None
    if d < 2:
        return v
    worst = 0.0
    for _ in range(JACOBI_SWEEP_CAP):
        norms = np.sum(w * w, axis=0)
        worst = 0.0
        rotated = False
        for p in range(d - 1):
            for q in range(p + 1, d):
                npp, nqq = norms[p], norms[q]
                if npp <= 0.0 or nqq <= 0.0:
                    continue
                npq = float(w[:, p] @ w[:, q])
                ratio = abs(npq) / math.sqrt(npp * nqq)
                worst = max(worst, ratio)
                if ratio <= _JACOBI_TOL:
                    continue
                zeta = (nqq - npp) / (2.0 * npq)
                t = math.copysign(1.0, zeta) / (abs(zeta) + math.hypot(1.0, zeta))
                cs = 1.0 / math.sqrt(1.0 + t * t)
                sn = cs * t
                wp = w[:, p].copy()
                w[:, p] = cs * wp - sn * w[:, q]
                w[:, q] = sn * wp + cs * w[:, q]
                # Rutishauser norm updates; clamp tiny negative drift
                norms[p] = max(npp - t * npq, 0.0)
                norms[q] = max(nqq + t * npq, 0.0)
                if v is not None:
                    vp = v[:, p].copy()
                    v[:, p] = cs * vp - sn * v[:, q]
                    v[:, q] = sn * vp + cs * v[:, q]
                rotated = True
        if not rotated:
            return v
    raise ConvergenceError(
        f"one-sided Jacobi did not converge in {JACOBI_SWEEP_CAP} sweeps", worst
    )


def _complete_orthonormal(columns: np.ndarray, filled: int) -> np.ndarray:
    """Fill columns[:, filled:] with an orthonormal completion of the first ones.

    Uses coordinate-vector candidates with two Gram-Schmidt passes each, so
    the result stays orthonormal to machine precision even when a candidate
    has a small residual.
    """
    d = columns.shape[0]
    used = columns[:, :filled].copy()
    count = filled
    for cand in range(d):
        if count == columns.shape[1]:
            break
        vec = np.zeros(d)
        vec[cand] = 1.0
        for _ in range(2):
            vec = vec - used[:, :count] @ (used[:, :count].T @ vec)
        nrm = _norm(vec)
        if nrm < 1e-3:
            continue
        vec /= nrm
        columns[:, count] = vec
        used = np.concatenate([used, vec[:, None]], axis=1)
        count += 1
    if count != columns.shape[1]:
        raise RuntimeError("orthonormal completion ran out of candidates")
    return columns


def _fix_signs(u: np.ndarray, v: np.ndarray) -> None:
    for j in range(u.shape[1]):
        idx = int(np.argmax(np.abs(u[:, j])))
        if u[idx, j] < 0.0:
            u[:, j] = -u[:, j]
            v[:, j] = -v[:, j]


def svd(a) -> SvdResult:
    """Full thin SVD with r = min(n, d) triples."""
    a = _as_matrix(a)
    n, d = a.shape
    if n < d:
        res = svd(a.T)
        return SvdResult(U=res.V, singular_values=res.singular_values, V=res.U)
    q, r = thin_qr(a)
    w = r.copy()
    v = _one_sided_jacobi(w, accumulate_v=True)
    sig = np.sqrt(np.sum(w * w, axis=0))
    order = np.argsort(-sig, kind="stable")
    sig = sig[order]
    w = w[:, order]
    v = v[:, order]
    u_r = np.zeros((d, d))
    filled = 0
    for j in range(d):
        if sig[j] > 0.0:
            u_r[:, j] = w[:, j] / sig[j]
            filled = j + 1
    if filled < d:
        sig[filled:] = 0.0
        _complete_orthonormal(u_r, filled)
    u = q @ u_r
    _fix_signs(u, v)
    return SvdResult(U=u, singular_values=sig, V=v)


def singular_values(a) -> np.ndarray:
    """Singular values only, descending; skips all U/V accumulation."""
    a = _as_matrix(a)
    if a.shape[0] < a.shape[1]:
        a = a.T
    _, r = thin_qr(a)
    w = r.copy()
    _one_sided_jacobi(w, accumulate_v=False)
    sig = np.sqrt(np.sum(w * w, axis=0))
    sig[::-1].sort()
    return sig


def truncate_svd(res: SvdResult, k: int) -> SvdResult:
    if not 1 <= k <= res.rank:
        raise ValueError(f"k must be in [1, {res.rank}], got {k}")
    return SvdResult(
        U=res.U[:, :k].copy(),
        singular_values=res.singular_values[:k].copy(),
        V=res.V[:, :k].copy(),
    )


def eigh_jacobi(m) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric eigendecomposition by cyclic two-sided Jacobi rotations.

    Returns (eigenvalues ascending, V with orthonormal columns) such that
    m ~= V @ diag(eigenvalues) @ V.T.  Input must be square; it is
    symmetrized before iterating.
    """
    a = _as_matrix(m)
    d = a.shape[0]
    if a.shape[1] != d:
        raise ValueError(f"eigh_jacobi needs a square matrix, got {a.shape}")
    b = (a + a.T) / 2.0
    v = np.eye(d)
    scale = _norm(b)
    if scale == 0.0 or d == 1:
        return np.diag(b).copy(), v
    thresh = _JACOBI_TOL * scale
    worst = 0.0
    for _ in range(JACOBI_SWEEP_CAP):
        off = b - np.diag(np.diag(b))
        worst = float(np.max(np.abs(off)))
        if worst <= thresh:
            w = np.diag(b).copy()
            order = np.argsort(w, kind="stable")
            return w[order], v[:, order]
        for p in range(d - 1):
            for q in range(p + 1, d):
                bpq = b[p, q]
                if abs(bpq) <= thresh:
                    continue
                zeta = (b[q, q] - b[p, p]) / (2.0 * bpq)
                t = math.copysign(1.0, zeta) / (abs(zeta) + math.hypot(1.0, zeta))
                cs = 1.0 / math.sqrt(1.0 + t * t)
                sn = cs * t
                bp = b[:, p].copy()
                b[:, p] = cs * bp - sn * b[:, q]
                b[:, q] = sn * bp + cs * b[:, q]
                bp = b[p, :].copy()
                b[p, :] = cs * bp - sn * b[q, :]
                b[q, :] = sn * bp + cs * b[q, :]
                b[p, q] = 0.0
                b[q, p] = 0.0
                vp = v[:, p].copy()
                v[:, p] = cs * vp - sn * v[:, q]
                v[:, q] = sn * vp + cs * v[:, q]
    raise ConvergenceError(
        f"two-sided Jacobi did not converge in {JACOBI_SWEEP_CAP} sweeps", worst / scale
    )


def spectral_norm(a, tol: float = 1e-6) -> float:
    """Largest singular value, to relative accuracy roughly ``tol``.

    Small matrices (min dimension < 64) go through the exact Jacobi route.
    Larger ones run power iteration on the Gram matrix from a fixed-seed
    random start, stopping when successive estimates stabilize to within
    ``tol`` relative, capped at 10 000 iterations (the cap returns the last
    estimate rather than raising, since the estimate is still a valid lower
    bound that grows monotonically in exact arithmetic).
    """
    if tol <= 0.0:
        raise ValueError(f"tol must be positive, got {tol}")
    a = _as_matrix(a)
    if min(a.shape) < POWER_FALLBACK_DIM:
        sig = singular_values(a)
        return float(sig[0]) if len(sig) else 0.0
    if a.shape[0] < a.shape[1]:
        a = a.T
    v = Prng(_SPECTRAL_SEED).normal(a.shape[1])
    nv = _norm(v)
    v /= nv
    estimate = 0.0
    for _ in range(POWER_ITERATION_CAP):
        z = a @ v
        new_estimate = _norm(z)
        if new_estimate == 0.0:
            return 0.0
        v = a.T @ (z / new_estimate)
        nv = _norm(v)
        if nv == 0.0:
            return new_estimate
        v /= nv
        if abs(new_estimate - estimate) <= tol * new_estimate:
            return new_estimate
        estimate = new_estimate
    return estimate


def spd_inv_sqrt(m, rank_tol: float = 1e-10) -> np.ndarray:
    """Inverse square root of a symmetric positive definite matrix.

    Raises RankDeficiencyError when the smallest eigenvalue falls at or
    below rank_tol times the largest, and ValueError when the input is not
    symmetric to within 1e-10 of its Frobenius norm.
    """
    a = _as_matrix(m)
    d = a.shape[0]
    if a.shape[1] != d:
        raise ValueError(f"spd_inv_sqrt needs a square matrix, got {a.shape}")
    scale = _norm(a)
    if _norm(a - a.T) > 1e-10 * max(scale, 1e-300):
        raise ValueError("matrix is not symmetric within tolerance")
    w, v = eigh_jacobi(a)
    wmax = float(w[-1])
    if wmax <= 0.0 or float(w[0]) <= rank_tol * wmax:
        raise RankDeficiencyError(
            f"eigenvalue range [{w[0]:.3e}, {wmax:.3e}] fails rank_tol={rank_tol:.1e}"
        )
    root = (v * (1.0 / np.sqrt(w))) @ v.T
    return (root + root.T) / 2.0


def _solve_upper(r: np.ndarray, y: np.ndarray) -> np.ndarray:
    d = len(y)
    x = np.zeros(d)
    for i in range(d - 1, -1, -1):
        x[i] = (y[i] - float(r[i, i + 1 :] @ x[i + 1 :])) / r[i, i]
    return x


def lstsq_exact(a, b) -> np.ndarray:
    """Least-squares solution argmin_x of the residual norm, via thin QR.

    Requires n >= d and numerically full column rank (R diagonal bounded
    away from zero relative to its largest entry).
    """
    a = _as_matrix(a)
    b = np.asarray(b, dtype=np.float64)
    if b.ndim != 1 or len(b) != a.shape[0]:
        raise ValueError(f"b must be a length-{a.shape[0]} vector, got shape {b.shape}")
    n, d = a.shape
    if n < d:
        raise ValueError(f"lstsq_exact needs n >= d, got {n}x{d}")
    q, r = thin_qr(a)
    diag = np.abs(np.diag(r))
    if diag.max() == 0.0 or diag.min() <= 1e-10 * diag.max():
        raise RankDeficiencyError(
            f"R diagonal range [{diag.min():.3e}, {diag.max():.3e}] indicates rank deficiency"
        )
    return _solve_upper(r, q.T @ b)
