"""Second-order calculus of the exposure-fairness objective.

Fairness (the negative pairwise disparity) is a degree-2 polynomial of the
exposure vector, so its second-order expansion in a planned exposure increment
is exact, not an approximation: for any step dE,

    fair(E + dE) - fair(E) = G . dE - 0.5 * dE^T H dE

with gradient G and Hessian H given in closed form below. H depends only on
the relevance estimates, is symmetric, and is positive semi-definite with the
relevance direction in its nullspace, which is what makes quadratic
programming on it valid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FairnessQuadratic:
    """Gradient vector and Hessian matrix of fairness at an exposure point."""

    gradient: np.ndarray
    hessian: np.ndarray
    n: int


def build_quadratic(exposure: np.ndarray, relevance_est: np.ndarray) -> FairnessQuadratic:
    """Closed-form gradient and Hessian of fairness w.r.t. exposure.

    With c = 4 / (n(n-1)):
        G(d)      = c * (R(d) * sum_l E(l) R(l) - E(d) * sum_h R(h)^2)
        H(dx, dy) = c * (sum_h R(h)^2 * [dx == dy] - R(dx) R(dy))

    The two inner sums use error-free (fsum) accumulation so the exactness of
    the expansion survives at 1e-9 tolerances.
    """
    exposure = np.asarray(exposure, dtype=float)
    relevance_est = np.asarray(relevance_est, dtype=float)
    if exposure.shape != relevance_est.shape:
        raise ValueError(f"shape mismatch {exposure.shape} vs {relevance_est.shape}")
    n = exposure.size
    if n < 2:
        raise ValueError(f"pairwise fairness needs n >= 2, got {n}")
    coef = 4.0 / (n * (n - 1))
    sum_er = math.fsum(exposure * relevance_est)
    sum_r2 = math.fsum(relevance_est * relevance_est)
    gradient = coef * (relevance_est * sum_er - exposure * sum_r2)
    hessian = coef * (sum_r2 * np.eye(n) - np.outer(relevance_est, relevance_est))
    return FairnessQuadratic(gradient=gradient, hessian=hessian, n=n)


def marginal_fairness(quad: FairnessQuadratic, delta_e: np.ndarray) -> float:
    """Exact fairness change produced by an exposure increment delta_e."""
    delta_e = np.asarray(delta_e, dtype=float)
    if delta_e.shape != (quad.n,):
        raise ValueError(f"delta_e has shape {delta_e.shape}, expected ({quad.n},)")
    return float(quad.gradient @ delta_e - 0.5 * delta_e @ quad.hessian @ delta_e)
