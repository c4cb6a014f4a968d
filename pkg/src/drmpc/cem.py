"""Constrained cross-entropy optimization of thrust sequences.

Each iteration samples control sequences from a diagonal Gaussian clamped to
the box bounds, rolls them through the satellite dynamics, and scores them
against the per-step worst-case CVaR constraint. When feasible candidates
exist, the elite set is the lowest-fuel feasible subset; otherwise the elite
set minimizes the discounted trajectory risk, steering the sampling
distribution toward safety first. The sampling distribution is refit to the
elite set with exponential smoothing and a floor on the standard deviation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import dynamics, risk
from .uncertainty import MomentTrajectory


@dataclass(frozen=True)
class CemParams:
    """Sampler hyperparameters. ``init_std`` None means 0.4 * u_max."""

    population: int = 200
    elite_count: int = 20
    max_iterations: int = 15
    init_std: float | None = None  # km/s^2
    std_floor: float = 1e-4  # km/s^2
    smoothing: float = 0.2

    def __post_init__(self) -> None:
        if self.population < 2:
            raise ValueError("population must be at least 2")
        if not 2 <= self.elite_count <= self.population:
            raise ValueError("elite_count must lie in [2, population]")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.init_std is not None and not self.init_std > 0.0:
            raise ValueError("init_std must be positive")
        if not self.std_floor > 0.0:
            raise ValueError("std_floor must be positive")
        if not 0.0 <= self.smoothing < 1.0:
            raise ValueError("smoothing must lie in [0, 1)")


@dataclass(frozen=True)
class CandidateEvaluation:
    """Scores of one control sequence."""

    fuel_cost: float
    feasible: bool
    trajectory_risk: float
    step_risks: np.ndarray  # (K,), worst-case CVaR value per horizon step


@dataclass
class BatchEvaluation:
    """Vectorized scores for a population of control sequences."""

    fuel_cost: np.ndarray  # (P,)
    feasible: np.ndarray  # (P,) bool
    trajectory_risk: np.ndarray  # (P,)
    step_risks: np.ndarray  # (P, K)


@dataclass
class CemResult:
    """Best sequence of the final iteration plus per-iteration diagnostics."""

    sequence: np.ndarray  # (K, 3)
    evaluation: CandidateEvaluation
    best_cost: list[float] = field(default_factory=list)
    best_risk: list[float] = field(default_factory=list)
    feasible_fraction: list[float] = field(default_factory=list)


Evaluator = Callable[[np.ndarray], BatchEvaluation]


def fuel_cost(u: np.ndarray, weight: np.ndarray) -> float:
    """Quadratic thrust cost sum_k u_k^T R u_k; zero iff the sequence is zero."""
    u = np.asarray(u, dtype=float).reshape(-1, 3)
    weight = np.asarray(weight, dtype=float).reshape(3, 3)
    return float(np.einsum("ki,ij,kj->", u, weight, u))


def make_rollout_evaluator(
    sat_state: np.ndarray,
    sat_body: dynamics.BodyParams,
    env: dynamics.EnvironmentParams,
    grid: dynamics.SimGrid,
    moments: MomentTrajectory,
    risk_params: risk.RiskParams,
    control_weight: np.ndarray,
) -> Evaluator:
    """Build the batched objective/constraint evaluator for one planning problem.

    The free-set ellipsoids here are the isotropic ones from
    ``risk.build_safe_ellipsoid``, for which trace(Sigma E) reduces to
    trace(Sigma) / rho^2; the evaluator exploits that to score whole
    populations without materializing shape matrices.
    """
    sat_state = np.asarray(sat_state, dtype=float).reshape(6)
    weight = np.asarray(control_weight, dtype=float).reshape(3, 3)
    mu = np.asarray(moments.means, dtype=float)  # (K, 3)
    sigma_traces = np.einsum("kii->k", np.asarray(moments.covs, dtype=float))
    n_steps = mu.shape[0]
    gamma_pow = risk_params.gamma ** np.arange(1, n_steps + 1)
    consts = dynamics._env_consts(sat_body, env)

    def evaluate(useq: np.ndarray) -> BatchEvaluation:
        from . import kernels

        useq = np.ascontiguousarray(np.asarray(useq, dtype=float))
        if useq.ndim != 3 or useq.shape[1] != n_steps:
            raise ValueError(f"expected (P, {n_steps}, 3) control sequences")
        pop = useq.shape[0]
        x0 = np.broadcast_to(sat_state, (pop, 6)).copy()
        states = kernels.rollout_controlled(
            x0, useq, grid.substeps, grid.dt, *consts
        )  # (K+1, P, 6)
        positions = states[1:, :, :3]  # k = 1..K
        diff = positions - mu[:, None, :]
        dist = np.sqrt(np.einsum("kpi,kpi->kp", diff, diff))
        rho = dist - risk_params.d_thres
        with np.errstate(divide="ignore", invalid="ignore"):
            values = -1.0 + sigma_traces[:, None] / (
                risk_params.epsilon * rho * rho
            )
        step_risks = np.where(rho > risk.RHO_MIN_KM, values, risk.INFEASIBLE_RISK).T
        feasible = np.all(step_risks <= 0.0, axis=1)
        traj_risk = step_risks @ gamma_pow
        fuel = np.einsum("pki,ij,pkj->p", useq, weight, useq)
        return BatchEvaluation(
            fuel_cost=fuel,
            feasible=feasible,
            trajectory_risk=traj_risk,
            step_risks=step_risks,
        )

    return evaluate


def evaluate_candidate(
    u: np.ndarray,
    sat_state: np.ndarray,
    sat_body: dynamics.BodyParams,
    env: dynamics.EnvironmentParams,
    grid: dynamics.SimGrid,
    moments: MomentTrajectory,
    risk_params: risk.RiskParams,
    control_weight: np.ndarray,
) -> CandidateEvaluation:
    """Score a single control sequence through ellipsoid construction step by step.

    Reference path: builds each step's ellipsoid explicitly and evaluates the
    closed-form worst-case CVaR; the batched evaluator must agree with it.
    """
    u = np.asarray(u, dtype=float).reshape(-1, 3)
    states = dynamics.propagate_satellite(sat_state, u, sat_body, env, grid)
    n_steps = len(moments)
    step_risks = np.empty(n_steps)
    for k in range(1, n_steps + 1):
        ell = risk.build_safe_ellipsoid(
            states[k, :3], moments.means[k - 1], risk_params.d_thres
        )
        if ell is None:
            step_risks[k - 1] = risk.INFEASIBLE_RISK
        else:
            step_risks[k - 1] = risk.dr_cvar_value(
                moments.covs[k - 1], ell, risk_params.epsilon
            )
    return CandidateEvaluation(
        fuel_cost=fuel_cost(u, control_weight),
        feasible=bool(np.all(step_risks <= 0.0)),
        trajectory_risk=risk.trajectory_risk(step_risks, risk_params.gamma),
        step_risks=step_risks,
    )


def update_distribution(
    elite: np.ndarray,
    prev_mean: np.ndarray,
    prev_std: np.ndarray,
    smoothing: float,
    std_floor: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Refit the sampling Gaussian to the elite set with exponential smoothing."""
    elite = np.asarray(elite, dtype=float)
    if elite.ndim != 3 or elite.shape[0] < 1:
        raise ValueError("elite set must be a nonempty (m, K, 3) array")
    elite_mean = elite.mean(axis=0)
    elite_std = elite.std(axis=0)
    mean = smoothing * prev_mean + (1.0 - smoothing) * elite_mean
    std = smoothing * prev_std + (1.0 - smoothing) * elite_std
    return mean, np.maximum(std, std_floor)


def _select_elite(evals: BatchEvaluation, elite_count: int) -> np.ndarray:
    """Indices of the elite set, stable-sorted for deterministic tie-breaks."""
    feasible_idx = np.flatnonzero(evals.feasible)
    if feasible_idx.size > 0:
        order = feasible_idx[
            np.argsort(evals.fuel_cost[feasible_idx], kind="stable")
        ]
    else:
        order = np.argsort(evals.trajectory_risk, kind="stable")
    return order[: min(elite_count, order.size)]


def cem_solve(
    evaluator: Evaluator,
    n_steps: int,
    u_min: np.ndarray,
    u_max: np.ndarray,
    params: CemParams,
    rng: np.random.Generator,
    init_mean: np.ndarray | None = None,
    init_std: np.ndarray | None = None,
) -> CemResult:
    """Run the constrained cross-entropy loop and return the final elite best.

    Samples outside the box bounds are clamped, keeping the population size
    fixed; every returned sequence therefore respects the bounds exactly.
    """
    u_min = np.asarray(u_min, dtype=float).reshape(3)
    u_max = np.asarray(u_max, dtype=float).reshape(3)
    if np.any(u_min >= u_max):
        raise ValueError("u_min must be strictly below u_max")

    mean = (
        np.zeros((n_steps, 3))
        if init_mean is None
        else np.asarray(init_mean, dtype=float).reshape(n_steps, 3).copy()
    )
    if init_std is None:
        base = params.init_std if params.init_std is not None else 0.4 * float(
            np.max(np.abs(u_max))
        )
        std = np.full((n_steps, 3), base)
    else:
        std = np.asarray(init_std, dtype=float).reshape(n_steps, 3).copy()
    std = np.maximum(std, params.std_floor)

    result = CemResult(sequence=np.zeros((n_steps, 3)), evaluation=None)  # type: ignore[arg-type]
    best_u: np.ndarray | None = None
    best_eval: CandidateEvaluation | None = None

    for _ in range(params.max_iterations):
        z = rng.standard_normal((params.population, n_steps, 3))
        useq = np.clip(mean + std * z, u_min, u_max)
        evals = evaluator(useq)
        elite_idx = _select_elite(evals, params.elite_count)
        best = int(elite_idx[0])
        best_u = useq[best].copy()
        best_eval = CandidateEvaluation(
            fuel_cost=float(evals.fuel_cost[best]),
            feasible=bool(evals.feasible[best]),
            trajectory_risk=float(evals.trajectory_risk[best]),
            step_risks=evals.step_risks[best].copy(),
        )
        result.best_cost.append(best_eval.fuel_cost)
        result.best_risk.append(best_eval.trajectory_risk)
        result.feasible_fraction.append(float(np.mean(evals.feasible)))
        mean, std = update_distribution(
            useq[elite_idx], mean, std, params.smoothing, params.std_floor
        )

    assert best_u is not None and best_eval is not None
    result.sequence = best_u
    result.evaluation = best_eval
    return result
