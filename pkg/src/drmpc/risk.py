"""Collision risk machinery: ellipsoidal free set and tail-risk bounds.

The collision-free region around the satellite (everything farther than the
threshold distance) is under-approximated by an ellipsoid centered on the
debris position mean, expressed through the safety cost

    l(r) = (r - center)^T E (r - center) - 1,

whose nonpositive sublevel set is the ellipsoid. Over the ambiguity set of
all debris position distributions sharing a given mean and covariance, the
worst-case CVaR of the safety cost has the closed form

    sup CVaR_eps(l) = -1 + trace(Sigma E) / eps,

so the chance constraint "collision probability <= eps" is enforced for the
whole ambiguity set by requiring that value to be nonpositive. Empirical
VaR/CVaR estimators are provided as independent oracles for validating the
bound on sampled data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import symmetrize

# Floor on the ellipsoid radius; closer approaches report infeasible rather
# than emit an unbounded shape matrix.
RHO_MIN_KM = 1e-6

# Risk value charged to a step whose free-set construction is infeasible.
INFEASIBLE_RISK = 1e6


@dataclass(frozen=True)
class SafeEllipsoid:
    """Collision-free ellipsoid {r : (r-center)^T E (r-center) <= 1}."""

    shape: np.ndarray  # E, km^-2, symmetric positive definite
    center: np.ndarray  # km

    def __post_init__(self) -> None:
        shape = symmetrize(np.asarray(self.shape, dtype=float).reshape(3, 3))
        center = np.asarray(self.center, dtype=float).reshape(3)
        eigvals = np.linalg.eigvalsh(shape)
        if eigvals[0] <= 0.0:
            raise ValueError("ellipsoid shape matrix must be positive definite")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "center", center)


@dataclass(frozen=True)
class RiskParams:
    """Chance-constraint knobs: tail mass, collision threshold, risk discount."""

    epsilon: float = 0.05
    d_thres: float = 0.1  # km
    gamma: float = 0.95

    def __post_init__(self) -> None:
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not self.d_thres > 0.0:
            raise ValueError(f"d_thres must be positive, got {self.d_thres}")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")


def build_safe_ellipsoid(
    r_sat: np.ndarray,
    mu_debris: np.ndarray,
    d_thres: float,
    rho_min: float = RHO_MIN_KM,
) -> SafeEllipsoid | None:
    """Largest ball around the debris mean that avoids the satellite's threshold ball.

    With rho = |r_sat - mu_debris| - d_thres, the ball of radius rho centered
    at the mean cannot intersect the d_thres ball around the satellite, so it
    is contained in the true collision-free set. Returns None (infeasible)
    when the separation leaves no radius above ``rho_min``.
    """
    r_sat = np.asarray(r_sat, dtype=float).reshape(3)
    mu_debris = np.asarray(mu_debris, dtype=float).reshape(3)
    if not (np.all(np.isfinite(r_sat)) and np.all(np.isfinite(mu_debris))):
        raise ValueError("positions must be finite")
    rho = float(np.linalg.norm(r_sat - mu_debris)) - float(d_thres)
    if rho <= rho_min:
        return None
    return SafeEllipsoid(shape=np.eye(3) / rho**2, center=mu_debris)


def safety_cost(r: np.ndarray, ell: SafeEllipsoid) -> float:
    """Quadratic safety cost; <= 0 exactly inside the free ellipsoid."""
    d = np.asarray(r, dtype=float).reshape(3) - ell.center
    return float(d @ ell.shape @ d) - 1.0


def dr_cvar_value(sigma: np.ndarray, ell: SafeEllipsoid, epsilon: float) -> float:
    """Worst-case CVaR of the safety cost over all distributions with moments (center, sigma).

    The constraint is satisfied iff the returned value is <= 0.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    sigma = np.asarray(sigma, dtype=float).reshape(3, 3)
    return -1.0 + float(np.trace(sigma @ ell.shape)) / epsilon


def trajectory_risk(risks: np.ndarray, gamma: float) -> float:
    """Discounted sum over the horizon: sum_k gamma^k * risk_k, k = 1..K."""
    risks = np.asarray(risks, dtype=float).reshape(-1)
    weights = gamma ** np.arange(1, risks.shape[0] + 1)
    return float(weights @ risks)


def _check_sample_count(n: int, epsilon: float) -> None:
    if not 0.0 < epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon}")
    needed = math.ceil(1.0 / epsilon)
    if n < needed:
        raise ValueError(
            f"need at least ceil(1/epsilon) = {needed} samples, got {n}"
        )


def empirical_var(samples: np.ndarray, epsilon: float) -> float:
    """Smallest threshold exceeded by at most an epsilon fraction of samples.

    The right-continuous (1 - epsilon) sample quantile: sorting ascending,
    the order statistic at rank ceil((1 - epsilon) * N).
    """
    samples = np.asarray(samples, dtype=float).reshape(-1)
    n = samples.shape[0]
    _check_sample_count(n, epsilon)
    rank = math.ceil((1.0 - epsilon) * n)
    rank = min(max(rank, 1), n)
    return float(np.sort(samples)[rank - 1])


def empirical_cvar(samples: np.ndarray, epsilon: float) -> float:
    """Mean of the worst ceil(epsilon * N) samples; always >= empirical_var."""
    samples = np.asarray(samples, dtype=float).reshape(-1)
    n = samples.shape[0]
    _check_sample_count(n, epsilon)
    n_tail = math.ceil(epsilon * n)
    n_tail = min(max(n_tail, 1), n)
    return float(np.mean(np.sort(samples)[n - n_tail :]))
