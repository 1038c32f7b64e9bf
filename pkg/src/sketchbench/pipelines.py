"""Sketch-and-solve least squares and sketched low-rank approximation.

Both pipelines report their quality as a ratio against the exact optimum
(QR least squares, or the Eckart-Young tail), with one shared convention
for exactly solvable instances: errors at or below 1e-10 times the problem
scale count as zero; both zero gives ratio 1, and a zero optimum with a
nonzero sketched error gives ratio inf.

The low-rank route follows the five quoted steps of the range-finder:
Y = SA, thin QR of Yᵀ, B = AQ, rank-k SVD of B, V_k = Q @ W_k (writing W_k
for B's right singular vectors, since the final output is also called V_k).
When the sketch has more rows than A has columns the thin QR of Yᵀ does not
exist; the basis is then capped at d directions, taken from the QR of the
d x d Gram product Yᵀ Y, whose columns span the same row space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import lstsq_exact, singular_values, svd, thin_qr
from .matrices import densify
from .sketch import SketchOperator, sketch_apply

_ZERO_REL = 1e-10
_RANK_TOL = 1e-10


@dataclass
class LsqResult:
    x_tilde: np.ndarray
    sketched_residual: float
    optimal_residual: float
    ratio: float


@dataclass
class LowRankResult:
    V_k: np.ndarray
    sketch_error: float
    optimal_error: float
    ratio: float
    rank_deficient: bool = False


def _norm(x: np.ndarray) -> float:
    return float(np.sqrt(np.sum(x * x)))


def _ratio(err: float, opt: float, scale: float) -> float:
    thr = _ZERO_REL * scale
    if err <= thr and opt <= thr:
        return 1.0
    if opt <= thr:
        return float("inf")
    return err / opt


def sketch_and_solve_lsq(a, b, op: SketchOperator) -> LsqResult:
    """Solve argmin ||SAx - Sb|| and measure the result on the original system."""
    a = densify(a)
    b = np.asarray(b, dtype=np.float64)
    if b.ndim != 1 or len(b) != a.shape[0]:
        raise ValueError(f"b must be a length-{a.shape[0]} vector, got shape {b.shape}")
    sa = sketch_apply(op, a)
    sb = sketch_apply(op, b[:, None])[:, 0]
    x_tilde = lstsq_exact(sa, sb)
    x_star = lstsq_exact(a, b)
    sketched = _norm(a @ x_tilde - b)
    optimal = _norm(a @ x_star - b)
    return LsqResult(
        x_tilde=x_tilde,
        sketched_residual=sketched,
        optimal_residual=optimal,
        ratio=_ratio(sketched, optimal, _norm(b)),
    )


def best_rank_k_error(a, k: int) -> float:
    """Frobenius error of the optimal rank-k approximation: sqrt(sum of tail sigma^2)."""
    a = densify(a)
    r = min(a.shape)
    if not 1 <= k <= r:
        raise ValueError(f"k must be in [1, {r}], got {k}")
    sig = singular_values(a)
    return float(np.sqrt(np.sum(sig[k:] ** 2)))


def lowrank_approx(a, k: int, op: SketchOperator) -> LowRankResult:
    """Rank-k approximation through a row-space sketch.

    The operator is applied to A from the left (its column count must equal
    A's row count), so Y = SA summarizes A's rows.  Requires m >= k and
    1 <= k <= min(n, d).  A sketch whose numerical rank falls below k is
    flagged ``rank_deficient`` and the pipeline continues with the trailing
    basis directions rather than aborting.
    """
    a = densify(a)
    n, d = a.shape
    if not 1 <= k <= min(n, d):
        raise ValueError(f"k must be in [1, {min(n, d)}], got {k}")
    m = op.m
    if m < k:
        raise ValueError(f"sketch rows m={m} must be at least k={k}")
    y = sketch_apply(op, a)
    if m <= d:
        q, r = thin_qr(y.T)
    else:
        # thin QR of the d x m transpose does not exist; the d x d Gram
        # product spans the same row space and caps the basis at d
        q, r = thin_qr(y.T @ y)
    diag = np.abs(np.diag(r))
    rank_deficient = bool(diag.max() == 0.0 or np.sum(diag > _RANK_TOL * diag.max()) < k)
    b = a @ q
    w_k = svd(b).V[:, :k]
    v_k = q @ w_k
    approx = (a @ v_k) @ v_k.T
    err = _norm(a - approx)
    opt = best_rank_k_error(a, k)
    scale = _norm(a)
    return LowRankResult(
        V_k=v_k,
        sketch_error=err,
        optimal_error=opt,
        ratio=_ratio(err, opt, scale),
        rank_deficient=rank_deficient,
    )
