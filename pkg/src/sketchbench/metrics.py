"""Quality diagnostics for sketch operators.

The central quantity is distortion: with Ã = SA and A of full column rank,

    eta = || I - (AᵀA)^{-1/2} ÃᵀÃ (AᵀA)^{-1/2} ||_2

Two permanently separate code paths compute it.  ``distortion`` evaluates
the formula literally through ``spd_inv_sqrt``; ``distortion_via_basis``
uses the algebraic identity eta = max_i |1 - sigma_i(SU)^2| for an
orthonormal basis U of A's column space.  They stay as mutual oracles; the
basis route is what sweeps use (it is faster and better conditioned).

``check_subspace_embedding`` records two epsilon conventions side by side,
because the literature states the guarantee both on squared singular values
(|1 - sigma^2| <= eps) and on the values themselves (|1 - sigma| <= eps).
Neither is canonical here; callers read the boolean they need.

The two Monte Carlo estimators take a ``factory``: a callable mapping a
Prng to a fresh sketch operator.  Trials use position-independent split
streams, so estimates are reproducible and schedule-independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import RankDeficiencyError, singular_values, spd_inv_sqrt, spectral_norm
from .rng import Prng
from .sketch import SketchOperator, sketch_apply

_RANK_TOL = 1e-10
_UNIT_TOL = 1e-10


@dataclass
class DistortionResult:
    eta: float
    sigma_min: float
    sigma_max: float
    method: str  # "definition" or "basis"


@dataclass
class EmbeddingCheck:
    eps: float
    holds_squared: bool   # |1 - sigma_i^2| <= eps for all i
    holds_linear: bool    # |1 - sigma_i|   <= eps for all i
    singular_values: np.ndarray


def _fro(a: np.ndarray) -> float:
    return float(np.sqrt(np.sum(a * a)))


def distortion(a, a_sketched) -> DistortionResult:
    """Distortion by the defining formula; raises on rank-deficient A.

    Full column rank means the smallest singular value of A exceeds 1e-10
    times the largest; the inverse square root then exists (the matching
    eigenvalue tolerance on AᵀA is the square, 1e-20).
    """
    a = np.asarray(a, dtype=np.float64)
    at = np.asarray(a_sketched, dtype=np.float64)
    if a.ndim != 2 or at.ndim != 2 or a.shape[1] != at.shape[1]:
        raise ValueError(
            f"need matrices with equal column counts, got {a.shape} and {at.shape}"
        )
    d = a.shape[1]
    sig_a = singular_values(a)
    if sig_a[-1] <= _RANK_TOL * sig_a[0]:
        raise RankDeficiencyError(
            f"singular-value ratio {sig_a[-1]:.3e}/{sig_a[0]:.3e} below {_RANK_TOL:.0e}"
        )
    w = spd_inv_sqrt(a.T @ a, rank_tol=_RANK_TOL**2)
    gram = at.T @ at
    eta = spectral_norm(np.eye(d) - w @ gram @ w, tol=1e-10)
    sig_su = singular_values(at @ w)
    return DistortionResult(
        eta=float(eta),
        sigma_min=float(sig_su[-1]),
        sigma_max=float(sig_su[0]),
        method="definition",
    )


def _check_orthonormal(u: np.ndarray) -> None:
    k = u.shape[1]
    if k and _fro(u.T @ u - np.eye(k)) > _UNIT_TOL:
        raise ValueError("U does not have orthonormal columns within 1e-10")


def distortion_via_basis(u, op: SketchOperator) -> DistortionResult:
    """Distortion from the singular values of S @ U, U an orthonormal basis."""
    u = np.asarray(u, dtype=np.float64)
    _check_orthonormal(u)
    if u.shape[1] == 0:
        return DistortionResult(eta=0.0, sigma_min=1.0, sigma_max=1.0, method="basis")
    sig = singular_values(sketch_apply(op, u))
    eta = float(np.max(np.abs(1.0 - sig**2)))
    return DistortionResult(
        eta=eta, sigma_min=float(sig[-1]), sigma_max=float(sig[0]), method="basis"
    )


def check_subspace_embedding(op: SketchOperator, u, eps: float) -> EmbeddingCheck:
    """Evaluate both epsilon conventions on the singular values of S @ U."""
    if eps <= 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    u = np.asarray(u, dtype=np.float64)
    _check_orthonormal(u)
    if u.shape[1] == 0:
        return EmbeddingCheck(
            eps=eps, holds_squared=True, holds_linear=True,
            singular_values=np.empty(0),
        )
    sig = singular_values(sketch_apply(op, u))
    return EmbeddingCheck(
        eps=eps,
        holds_squared=bool(np.max(np.abs(1.0 - sig**2)) <= eps),
        holds_linear=bool(np.max(np.abs(1.0 - sig)) <= eps),
        singular_values=sig,
    )


def _check_unit(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"x must be a vector, got shape {x.shape}")
    nrm = float(np.sqrt(np.sum(x * x)))
    if abs(nrm - 1.0) > _UNIT_TOL:
        raise ValueError(f"x must be a unit vector, got norm {nrm!r}")
    return x


def _sketched_norm_sq(factory, x: np.ndarray, rng: Prng, trial: int) -> float:
    op = factory(rng.split(trial))
    sx = sketch_apply(op, x[:, None])
    return float(np.sum(sx * sx))


def jl_moment_estimate(factory, x, rho: int, trials: int, rng: Prng) -> float:
    """Monte Carlo estimate of E |‖Sx‖² − 1|^rho over fresh operators.

    ``factory`` maps a Prng to a sketch operator; x must be a unit vector;
    rho a positive even integer.
    """
    x = _check_unit(x)
    if rho < 2 or rho % 2 != 0:
        raise ValueError(f"rho must be a positive even integer, got {rho}")
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    total = 0.0
    for t in range(trials):
        total += abs(_sketched_norm_sq(factory, x, rng, t) - 1.0) ** rho
    return total / trials


def jlt_failure_rate(factory, x, eps: float, trials: int, rng: Prng) -> float:
    """Fraction of fresh operators with |‖Sx‖² − 1| > eps."""
    x = _check_unit(x)
    if eps <= 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    failures = 0
    for t in range(trials):
        if abs(_sketched_norm_sq(factory, x, rng, t) - 1.0) > eps:
            failures += 1
    return failures / trials
