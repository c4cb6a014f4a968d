"""Receding-horizon collision avoidance loop and batch experiments.

Each control period the engine forecasts the debris position moments over
the horizon with the configured propagator, solves the constrained
cross-entropy problem for a minimum-fuel thrust sequence whose every horizon
step satisfies the worst-case CVaR constraint, and applies the first control
under zero-order hold. The ground-truth debris trajectory evolves on its own
noise stream, fully independent of planning, so swapping propagators never
changes the realized debris path for a fixed seed.

Random streams are derived from the episode seed with fixed spawn keys:
(0,) ground truth, (1, step) planning, (2, step) optimizer sampling.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import cem, dynamics, risk, uncertainty

_STREAM_TRUTH = 0
_STREAM_PLAN = 1
_STREAM_CEM = 2


@dataclass(frozen=True)
class Scenario:
    """Everything that defines one closed-loop experiment."""

    satellite_x0: dynamics.StateVector
    debris_belief0: uncertainty.GaussianBelief
    satellite_body: dynamics.BodyParams
    debris_body: dynamics.BodyParams
    env: dynamics.EnvironmentParams
    process_noise: np.ndarray  # (6, 6) covariance of the derivative disturbance
    risk: risk.RiskParams
    horizon: int
    grid: dynamics.SimGrid
    sim_duration: float
    control_weight: np.ndarray  # (3, 3) positive definite
    u_min: np.ndarray
    u_max: np.ndarray
    propagator: uncertainty.PropagatorKind
    cem: cem.CemParams
    seed: int = 0
    control_enabled: bool = True

    def __post_init__(self) -> None:
        if self.debris_belief0.dim != 6:
            raise ValueError("debris belief must be a 6-dim state belief")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.sim_duration < self.grid.control_period:
            raise ValueError("sim_duration must cover at least one control period")
        steps = self.sim_duration / self.grid.control_period
        if abs(steps - round(steps)) > 1e-9:
            raise ValueError("sim_duration must be a multiple of control_period")
        q = np.asarray(self.process_noise, dtype=float).reshape(6, 6)
        u_min = np.asarray(self.u_min, dtype=float).reshape(3)
        u_max = np.asarray(self.u_max, dtype=float).reshape(3)
        if np.any(u_min >= u_max):
            raise ValueError("u_min must be strictly below u_max")
        w = np.asarray(self.control_weight, dtype=float).reshape(3, 3)
        if np.any(np.linalg.eigvalsh(0.5 * (w + w.T)) <= 0.0):
            raise ValueError("control_weight must be positive definite")
        object.__setattr__(self, "process_noise", q)
        object.__setattr__(self, "u_min", u_min)
        object.__setattr__(self, "u_max", u_max)
        object.__setattr__(self, "control_weight", w)

    @property
    def n_control_steps(self) -> int:
        return round(self.sim_duration / self.grid.control_period)


@dataclass
class MpcStepDiagnostics:
    """Planning byproducts of one controller invocation."""

    solution: np.ndarray  # (K, 3) chosen thrust sequence
    evaluation: cem.CandidateEvaluation
    moments: uncertainty.MomentTrajectory
    next_belief: uncertainty.GaussianBelief
    best_cost_history: list[float]
    feasible_fraction_history: list[float]


@dataclass
class EpisodeRecord:
    """Closed-loop log of one episode plus summary metrics."""

    times: np.ndarray  # (S,) control-step start times
    sat_states: np.ndarray  # (S, 6) at step start
    debris_states: np.ndarray  # (S, 6) ground truth at step start
    controls: np.ndarray  # (S, 3) applied thrust
    planned_risks: np.ndarray  # (S, K) horizon risk values of the chosen plan
    feasible: np.ndarray  # (S,) plan feasibility flags
    fine_times: np.ndarray  # (S * substeps + 1,)
    fine_distances: np.ndarray  # (S * substeps + 1,) |r_s - r_d| on the fine grid
    min_distance: float
    total_delta_v: float
    collision: bool
    d_thres: float
    seed: int
    controlled: bool


def _plan_model(scenario: Scenario) -> uncertainty.DebrisPeriodModel:
    return uncertainty.DebrisPeriodModel(
        scenario.debris_body, scenario.env, scenario.grid, scenario.process_noise
    )


def mpc_step(
    scenario: Scenario,
    sat_state: np.ndarray,
    debris_belief: uncertainty.GaussianBelief,
    plan_rng: np.random.Generator,
    cem_rng: np.random.Generator,
    warm_mean: np.ndarray | None = None,
) -> tuple[np.ndarray, MpcStepDiagnostics]:
    """Forecast debris moments, optimize the horizon, return the first control."""
    traj = uncertainty.propagate_beliefs(
        scenario.propagator, _plan_model(scenario), debris_belief,
        scenario.horizon, plan_rng,
    )
    moments = traj.positions()
    evaluator = cem.make_rollout_evaluator(
        sat_state,
        scenario.satellite_body,
        scenario.env,
        scenario.grid,
        moments,
        scenario.risk,
        scenario.control_weight,
    )
    result = cem.cem_solve(
        evaluator,
        scenario.horizon,
        scenario.u_min,
        scenario.u_max,
        scenario.cem,
        cem_rng,
        init_mean=warm_mean,
    )
    diag = MpcStepDiagnostics(
        solution=result.sequence,
        evaluation=result.evaluation,
        moments=moments,
        next_belief=traj.step_belief(1),
        best_cost_history=result.best_cost,
        feasible_fraction_history=result.feasible_fraction,
    )
    return result.sequence[0].copy(), diag


def run_episode(scenario: Scenario, seed: int | None = None) -> EpisodeRecord:
    """Simulate one closed-loop episode against a noisy ground-truth debris.

    The true initial debris state is drawn from the initial belief on the
    ground-truth stream; the planner only ever sees the belief.
    """
    seed = scenario.seed if seed is None else int(seed)
    n_steps = scenario.n_control_steps
    n_sub = scenario.grid.substeps
    period = scenario.grid.control_period

    truth_rng = np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=(_STREAM_TRUTH,))
    )
    from .linalg import safe_cholesky

    belief0 = scenario.debris_belief0
    z = truth_rng.standard_normal(6)
    debris_x0 = belief0.mean + safe_cholesky(belief0.cov) @ z
    truth_fine = dynamics.propagate_debris(
        debris_x0,
        n_steps,
        scenario.debris_body,
        scenario.env,
        scenario.grid,
        process_noise=scenario.process_noise,
        rng=truth_rng,
        return_fine=True,
    )  # (S * n_sub + 1, 6)

    sat = scenario.satellite_x0.as_array()
    belief = belief0
    warm: np.ndarray | None = None

    times = np.arange(n_steps) * period
    sat_states = np.empty((n_steps, 6))
    debris_states = np.empty((n_steps, 6))
    controls = np.zeros((n_steps, 3))
    planned_risks = np.full((n_steps, scenario.horizon), np.nan)
    feasible = np.zeros(n_steps, dtype=bool)
    sat_fine = np.empty((n_steps * n_sub + 1, 6))
    sat_fine[0] = sat

    for step in range(n_steps):
        sat_states[step] = sat
        debris_states[step] = truth_fine[step * n_sub]
        if scenario.control_enabled:
            plan_rng = np.random.default_rng(
                np.random.SeedSequence(seed, spawn_key=(_STREAM_PLAN, step))
            )
            cem_rng = np.random.default_rng(
                np.random.SeedSequence(seed, spawn_key=(_STREAM_CEM, step))
            )
            u, diag = mpc_step(scenario, sat, belief, plan_rng, cem_rng, warm)
            belief = diag.next_belief
            warm = np.vstack([diag.solution[1:], diag.solution[-1:]])
            planned_risks[step] = diag.evaluation.step_risks
            feasible[step] = diag.evaluation.feasible
        else:
            u = np.zeros(3)
        controls[step] = u
        fine = dynamics.propagate_satellite(
            sat, u[None, :], scenario.satellite_body, scenario.env,
            scenario.grid, return_fine=True,
        )  # (n_sub + 1, 6)
        sat_fine[step * n_sub + 1 : (step + 1) * n_sub + 1] = fine[1:]
        sat = fine[-1]

    fine_distances = np.linalg.norm(
        sat_fine[:, :3] - truth_fine[:, :3], axis=1
    )
    min_distance = float(np.min(fine_distances))
    total_delta_v = float(np.sum(np.linalg.norm(controls, axis=1)) * period)
    return EpisodeRecord(
        times=times,
        sat_states=sat_states,
        debris_states=debris_states,
        controls=controls,
        planned_risks=planned_risks,
        feasible=feasible,
        fine_times=np.arange(n_steps * n_sub + 1) * scenario.grid.dt,
        fine_distances=fine_distances,
        min_distance=min_distance,
        total_delta_v=total_delta_v,
        collision=min_distance < scenario.risk.d_thres,
        d_thres=scenario.risk.d_thres,
        seed=seed,
        controlled=scenario.control_enabled,
    )


def apply_axis_override(scenario: Scenario, axis: str, value) -> Scenario:
    """Return a copy of the scenario with one sweep axis changed."""
    if axis == "epsilon":
        new_risk = dataclasses.replace(scenario.risk, epsilon=float(value))
        return dataclasses.replace(scenario, risk=new_risk)
    if axis == "q_scale":
        from .config import build_process_noise

        return dataclasses.replace(
            scenario, process_noise=build_process_noise(float(value))
        )
    if axis == "propagator":
        kind = uncertainty.PropagatorKind(
            kind=str(value), samples=scenario.propagator.samples
        )
        return dataclasses.replace(scenario, propagator=kind)
    raise ValueError(f"unknown sweep axis {axis!r}")


@dataclass
class BatchRow:
    """Aggregate statistics for one sweep configuration."""

    axis: str
    value: object
    propagator: str
    n_runs: int
    min_distance_mean: float
    min_distance_std: float
    delta_v_mean: float
    delta_v_std: float
    collisions: int
    failed_seeds: list[int] = field(default_factory=list)
    min_distances: np.ndarray = field(default_factory=lambda: np.empty(0))
    delta_vs: np.ndarray = field(default_factory=lambda: np.empty(0))


def _episode_task(args: tuple[Scenario, int]) -> tuple[str, object]:
    scenario, ep_seed = args
    try:
        record = run_episode(scenario, seed=ep_seed)
        return "ok", (record.min_distance, record.total_delta_v, record.collision)
    except Exception as exc:  # noqa: BLE001 - failures are recorded per seed
        return "error", f"{type(exc).__name__}: {exc}"


def _episode_seed(master_seed: int, cfg_idx: int, run_idx: int) -> int:
    ss = np.random.SeedSequence(master_seed, spawn_key=(cfg_idx, run_idx))
    return int(ss.generate_state(1, np.uint64)[0])


def run_batch(
    scenario: Scenario,
    n_runs: int,
    master_seed: int | None = None,
    overrides: list[tuple[str, object]] | None = None,
    n_jobs: int = 1,
) -> list[BatchRow]:
    """Run seeded episode batches for each override and aggregate the metrics.

    Episodes are independent and fully determined by (config, episode seed),
    so parallel execution returns the same numbers as serial.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be at least 1")
    master_seed = scenario.seed if master_seed is None else int(master_seed)
    configs: list[tuple[str, object, Scenario]] = []
    if overrides is None:
        configs.append(("none", "", scenario))
    else:
        for axis, value in overrides:
            configs.append((axis, value, apply_axis_override(scenario, axis, value)))

    tasks = []
    for cfg_idx, (_, _, sc) in enumerate(configs):
        for run_idx in range(n_runs):
            tasks.append((sc, _episode_seed(master_seed, cfg_idx, run_idx)))

    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            outcomes = list(pool.map(_episode_task, tasks, chunksize=1))
    else:
        outcomes = [_episode_task(t) for t in tasks]

    rows: list[BatchRow] = []
    for cfg_idx, (axis, value, sc) in enumerate(configs):
        chunk = outcomes[cfg_idx * n_runs : (cfg_idx + 1) * n_runs]
        dists, dvs, collisions, failed = [], [], 0, []
        for run_idx, (status, payload) in enumerate(chunk):
            if status == "ok":
                d, dv, hit = payload  # type: ignore[misc]
                dists.append(d)
                dvs.append(dv)
                collisions += int(hit)
            else:
                failed.append(_episode_seed(master_seed, cfg_idx, run_idx))
        dists_arr = np.asarray(dists)
        dvs_arr = np.asarray(dvs)
        rows.append(
            BatchRow(
                axis=axis,
                value=value,
                propagator=sc.propagator.kind,
                n_runs=n_runs,
                min_distance_mean=float(np.mean(dists_arr)) if dists else float("nan"),
                min_distance_std=float(np.std(dists_arr)) if dists else float("nan"),
                delta_v_mean=float(np.mean(dvs_arr)) if dvs else float("nan"),
                delta_v_std=float(np.std(dvs_arr)) if dvs else float("nan"),
                collisions=collisions,
                failed_seeds=failed,
                min_distances=dists_arr,
                delta_vs=dvs_arr,
            )
        )
    return rows
