"""Debris state uncertainty forecasting over the planning horizon.

Three interchangeable propagators estimate the mean and covariance of the
uncontrolled object's state at each control-period boundary k = 1..K from a
Gaussian initial belief:

- ``linear_propagate``   -- mean through the nonlinear dynamics, covariance
  through the recursion P <- A P A^T + Q_d with A re-linearized about the
  nominal trajectory each period (central-difference Jacobians).
- ``ut_propagate``       -- 13 sigma points pushed through the nonlinear
  dynamics; mean weighted 1/(2n+1), covariance 1/(2n), n = 6.
- ``mc_propagate``       -- N sampled initial states rolled out with
  independent process-noise streams; sample mean and unbiased covariance.

All three consume any object satisfying the ``PeriodModel`` protocol (one
control period of dynamics plus the per-period process-noise covariance), so
they can be exercised on affine test systems where exact Gaussian
propagation is available in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from . import dynamics
from .linalg import check_psd, safe_cholesky, symmetrize

STATE_DIM = 6


class PeriodModel(Protocol):
    """One control period of uncontrolled dynamics for a batch of states."""

    def advance(
        self, states: np.ndarray, rng: np.random.Generator | None = None
    ) -> np.ndarray:
        """Map (M, 6) states one period ahead; noisy iff ``rng`` is given."""
        ...

    @property
    def q_discrete(self) -> np.ndarray:
        """Per-period process noise covariance (6x6)."""
        ...


@dataclass(frozen=True)
class GaussianBelief:
    """Mean and covariance of a state (6-dim) or position (3-dim) estimate."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        n = mean.shape[0]
        cov = symmetrize(np.asarray(self.cov, dtype=float).reshape(n, n))
        if not np.all(np.isfinite(mean)) or not np.all(np.isfinite(cov)):
            raise ValueError("belief mean/cov must be finite")
        check_psd(cov, "belief covariance")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class MomentTrajectory:
    """Per-step position beliefs mu_k (km), Sigma_k (km^2) for k = 1..K."""

    means: np.ndarray  # (K, 3)
    covs: np.ndarray  # (K, 3, 3)

    def __post_init__(self) -> None:
        means = np.asarray(self.means, dtype=float)
        covs = np.asarray(self.covs, dtype=float)
        if means.ndim != 2 or means.shape[0] != covs.shape[0]:
            raise ValueError("means and covs must share the step dimension")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covs", covs)

    def __len__(self) -> int:
        return self.means.shape[0]


@dataclass(frozen=True)
class BeliefTrajectory:
    """Full-state beliefs at control-period boundaries k = 1..K."""

    means: np.ndarray  # (K, 6)
    covs: np.ndarray  # (K, 6, 6)

    def __len__(self) -> int:
        return self.means.shape[0]

    def step_belief(self, k: int) -> GaussianBelief:
        """State belief at boundary k (1-indexed)."""
        return GaussianBelief(self.means[k - 1], self.covs[k - 1])

    def positions(self) -> MomentTrajectory:
        """Extract the position blocks of every step."""
        return MomentTrajectory(
            means=self.means[:, :3].copy(), covs=self.covs[:, :3, :3].copy()
        )


@dataclass(frozen=True)
class PropagatorKind:
    """Selector for the belief propagator: linear, ut, or mc(samples)."""

    kind: str
    samples: int = 50

    def __post_init__(self) -> None:
        if self.kind not in ("linear", "ut", "mc"):
            raise ValueError(f"unknown propagator kind {self.kind!r}")
        if self.kind == "mc" and self.samples < 2:
            raise ValueError("mc propagator needs at least 2 samples")


class DebrisPeriodModel:
    """Orbital ``PeriodModel``: RK4 substeps with optional per-substep noise."""

    def __init__(
        self,
        body: dynamics.BodyParams,
        env: dynamics.EnvironmentParams,
        grid: dynamics.SimGrid,
        process_noise: np.ndarray,
    ) -> None:
        self.body = body
        self.env = env
        self.grid = grid
        self.process_noise = symmetrize(
            np.asarray(process_noise, dtype=float).reshape(STATE_DIM, STATE_DIM)
        )
        check_psd(self.process_noise, "process noise")

    def advance(
        self, states: np.ndarray, rng: np.random.Generator | None = None
    ) -> np.ndarray:
        noise = self.process_noise if rng is not None else None
        traj = dynamics.propagate_debris_batch(
            states, 1, self.body, self.env, self.grid, process_noise=noise, rng=rng
        )
        return traj[-1]

    @property
    def q_discrete(self) -> np.ndarray:
        return self.process_noise * self.grid.control_period


def extract_position_belief(belief: GaussianBelief) -> GaussianBelief:
    """First three mean components and the upper-left 3x3 covariance block."""
    if belief.dim != STATE_DIM:
        raise ValueError(f"expected a {STATE_DIM}-dim state belief, got {belief.dim}")
    return GaussianBelief(belief.mean[:3].copy(), belief.cov[:3, :3].copy())


def numerical_jacobian(
    map_fn, x: np.ndarray, h: np.ndarray | None = None
) -> np.ndarray:
    """Central-difference Jacobian of a batched map R^n -> R^n at x.

    ``map_fn`` must accept an (M, n) batch and return (M, n). Step sizes
    default to max(1e-6 * |x_i|, 1e-8) per component.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    n = x.shape[0]
    if h is None:
        h = np.maximum(1e-6 * np.abs(x), 1e-8)
    else:
        h = np.asarray(h, dtype=float).reshape(n)
        if np.any(h <= 0.0):
            raise ValueError("jacobian step sizes must be positive")
    points = np.empty((2 * n, n))
    for i in range(n):
        points[2 * i] = x
        points[2 * i, i] += h[i]
        points[2 * i + 1] = x
        points[2 * i + 1, i] -= h[i]
    images = np.asarray(map_fn(points), dtype=float)
    jac = np.empty((n, n))
    for i in range(n):
        jac[:, i] = (images[2 * i] - images[2 * i + 1]) / (2.0 * h[i])
    if not np.all(np.isfinite(jac)):
        raise FloatingPointError("non-finite entries in numerical Jacobian")
    return jac


def linear_propagate(
    model: PeriodModel, belief0: GaussianBelief, n_steps: int
) -> BeliefTrajectory:
    """Gaussian forecast: nonlinear nominal mean, linearized covariance."""
    if belief0.dim != STATE_DIM:
        raise ValueError("linear_propagate needs a 6-dim state belief")
    means = np.empty((n_steps, STATE_DIM))
    covs = np.empty((n_steps, STATE_DIM, STATE_DIM))
    mean = belief0.mean.copy()
    cov = belief0.cov.copy()
    q = model.q_discrete
    for k in range(n_steps):
        jac = numerical_jacobian(lambda pts: model.advance(pts), mean)
        mean = model.advance(mean[None, :])[0]
        cov = symmetrize(jac @ cov @ jac.T + q)
        check_psd(cov, f"linearized covariance at step {k + 1}")
        means[k] = mean
        covs[k] = cov
    return BeliefTrajectory(means=means, covs=covs)


def sigma_points(belief: GaussianBelief) -> np.ndarray:
    """Deterministic 2n+1 point set reproducing (mean, cov) exactly.

    Points are mean, mean +/- columns of L where L L^T = n * cov. With the
    uniform 1/(2n+1) mean weight and 1/(2n) covariance weight used by
    ``ut_propagate`` this reconstructs the input moments at the initial step.
    """
    if belief.dim != STATE_DIM:
        raise ValueError("sigma_points needs a 6-dim state belief")
    n = STATE_DIM
    chol = safe_cholesky(n * belief.cov)
    points = np.empty((2 * n + 1, n))
    points[0] = belief.mean
    for i in range(n):
        points[1 + i] = belief.mean + chol[:, i]
        points[1 + n + i] = belief.mean - chol[:, i]
    return points


def sample_moments_unscented(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean (1/(2n+1) weights) and covariance (1/(2n) weights) of sigma points."""
    n_points = points.shape[0]
    n = (n_points - 1) // 2
    mean = points.mean(axis=0)
    centered = points - mean
    cov = (centered.T @ centered) / (2.0 * n)
    return mean, symmetrize(cov)


def ut_propagate(
    model: PeriodModel, belief0: GaussianBelief, n_steps: int
) -> BeliefTrajectory:
    """Sigma-point forecast: 13 noise-free rollouts, moments re-estimated per step.

    The per-period process noise covariance is accumulated onto the reported
    covariance (once per elapsed period); the sigma points themselves stay on
    their deterministic trajectories.
    """
    points = sigma_points(belief0)
    q = model.q_discrete
    means = np.empty((n_steps, STATE_DIM))
    covs = np.empty((n_steps, STATE_DIM, STATE_DIM))
    noise_acc = np.zeros_like(q)
    for k in range(n_steps):
        points = model.advance(points)
        noise_acc = noise_acc + q
        mean, cov = sample_moments_unscented(points)
        cov = symmetrize(cov + noise_acc)
        check_psd(cov, f"unscented covariance at step {k + 1}")
        means[k] = mean
        covs[k] = cov
    return BeliefTrajectory(means=means, covs=covs)


def mc_propagate(
    model: PeriodModel,
    belief0: GaussianBelief,
    n_samples: int,
    n_steps: int,
    rng: np.random.Generator,
) -> BeliefTrajectory:
    """Monte Carlo forecast: sampled initial states, noisy rollouts, sample moments."""
    if n_samples < 2:
        raise ValueError("mc_propagate needs at least 2 samples")
    if belief0.dim != STATE_DIM:
        raise ValueError("mc_propagate needs a 6-dim state belief")
    chol = safe_cholesky(belief0.cov)
    z = rng.standard_normal((n_samples, STATE_DIM))
    states = belief0.mean + z @ chol.T
    means = np.empty((n_steps, STATE_DIM))
    covs = np.empty((n_steps, STATE_DIM, STATE_DIM))
    for k in range(n_steps):
        states = model.advance(states, rng=rng)
        mean = states.mean(axis=0)
        centered = states - mean
        cov = symmetrize((centered.T @ centered) / (n_samples - 1))
        means[k] = mean
        covs[k] = cov
    return BeliefTrajectory(means=means, covs=covs)


def propagate_beliefs(
    kind: PropagatorKind,
    model: PeriodModel,
    belief0: GaussianBelief,
    n_steps: int,
    rng: np.random.Generator | None = None,
) -> BeliefTrajectory:
    """Dispatch to the selected propagator."""
    if kind.kind == "linear":
        return linear_propagate(model, belief0, n_steps)
    if kind.kind == "ut":
        return ut_propagate(model, belief0, n_steps)
    if rng is None:
        raise ValueError("mc propagation requires an rng")
    return mc_propagate(model, belief0, kind.samples, n_steps, rng)
