"""Two-body orbital dynamics with atmospheric drag in the ECI frame.

Distances are km, velocities km/s, accelerations km/s^2, time s. Drag
inputs keep their customary SI units (area m^2, density kg/m^3, mass kg)
and are converted internally, see ``DRAG_UNIT_FACTOR``.

The equations of motion for both objects are

    r_dot = v
    v_dot = -mu * r / |r|^3 + a_drag (+ u for the controlled satellite)

with drag computed against the co-rotating atmosphere,

    a_drag = -1/2 * rho(|r|) * (A * C_d / m) * |v0| * v0,   v0 = v - omega x r

and an exponential density profile rho(r) = rho0 * exp(-(r - r0) / r0)
evaluated at geocentric radius r.

The uncontrolled object additionally carries an additive white disturbance
on the full state derivative; discretized rollouts inject it per substep as
w * dt with w ~ N(0, Q / dt) (Euler-Maruyama treatment).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .linalg import safe_cholesky, symmetrize

MU_EARTH_KM3_S2 = 398600.4418
OMEGA_EARTH_RAD_S = (0.0, 0.0, 7.2921159e-5)
SEA_LEVEL_DENSITY_KG_M3 = 1.225
REFERENCE_RADIUS_KM = 6378.1363

# rho[kg/m^3] * A[m^2] / m[kg] carries units 1/m = 1000/km; multiplied by
# |v0|*v0 in (km/s)^2 the drag term needs this factor to come out in km/s^2.
DRAG_UNIT_FACTOR = 1000.0

_MIN_RADIUS_KM = 1e-9


class PropagationError(RuntimeError):
    """A propagated state left the valid domain (non-finite or singular)."""


@dataclass(frozen=True)
class StateVector:
    """Position (km) and velocity (km/s) of one object in the ECI frame."""

    r: np.ndarray
    v: np.ndarray

    def __post_init__(self) -> None:
        r = np.asarray(self.r, dtype=float).reshape(3)
        v = np.asarray(self.v, dtype=float).reshape(3)
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(v))):
            raise ValueError("state components must be finite")
        if float(np.linalg.norm(r)) <= 0.0:
            raise ValueError("geocentric radius must be strictly positive")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "v", v)

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.r, self.v])

    @classmethod
    def from_array(cls, x: np.ndarray) -> "StateVector":
        x = np.asarray(x, dtype=float).reshape(6)
        return cls(r=x[:3], v=x[3:])


@dataclass(frozen=True)
class BodyParams:
    """Mass and drag properties of one space object."""

    mass: float
    drag_area: float = 1.0  # m^2
    drag_coeff: float = 2.2

    def __post_init__(self) -> None:
        if not self.mass > 0.0:
            raise ValueError(f"mass must be positive, got {self.mass}")
        if self.drag_area < 0.0:
            raise ValueError(f"drag_area must be >= 0, got {self.drag_area}")
        if self.drag_coeff < 0.0:
            raise ValueError(f"drag_coeff must be >= 0, got {self.drag_coeff}")

    @property
    def ballistic_si(self) -> float:
        """A * C_d / m in SI units (1/m equivalent), before km conversion."""
        return self.drag_area * self.drag_coeff / self.mass


@dataclass(frozen=True)
class EnvironmentParams:
    """Gravity, Earth rotation, and atmosphere constants."""

    mu_earth: float = MU_EARTH_KM3_S2
    omega_earth: tuple[float, float, float] = OMEGA_EARTH_RAD_S
    rho0: float = SEA_LEVEL_DENSITY_KG_M3
    r0: float = REFERENCE_RADIUS_KM

    def __post_init__(self) -> None:
        if not self.mu_earth > 0.0:
            raise ValueError("mu_earth must be positive")
        if self.rho0 < 0.0:
            raise ValueError("rho0 must be >= 0")
        if not self.r0 > 0.0:
            raise ValueError("r0 must be positive")
        object.__setattr__(self, "omega_earth", tuple(float(w) for w in self.omega_earth))


@dataclass(frozen=True)
class SimGrid:
    """Integration grid: fine step dt and the zero-order-hold control period."""

    dt: float = 0.01
    control_period: float = 1.0

    def __post_init__(self) -> None:
        if not self.dt > 0.0:
            raise ValueError("dt must be positive")
        if not self.control_period > 0.0:
            raise ValueError("control_period must be positive")
        n = round(self.control_period / self.dt)
        if n < 1 or abs(n * self.dt - self.control_period) > 1e-9 * self.control_period:
            raise ValueError(
                f"dt={self.dt} must divide control_period={self.control_period}"
            )

    @property
    def substeps(self) -> int:
        return round(self.control_period / self.dt)


def atmosphere_density(r: float, env: EnvironmentParams) -> float:
    """Exponential atmosphere density (kg/m^3) at geocentric radius r (km)."""
    r = float(r)
    if not np.isfinite(r) or r <= 0.0:
        raise ValueError(f"geocentric radius must be finite and positive, got {r}")
    return env.rho0 * float(np.exp(-(r - env.r0) / env.r0))


def drag_acceleration(
    x: np.ndarray, body: BodyParams, env: EnvironmentParams
) -> np.ndarray:
    """Drag acceleration (km/s^2), antiparallel to the co-rotating velocity."""
    x = np.asarray(x, dtype=float).reshape(6)
    r, v = x[:3], x[3:]
    rnorm = float(np.linalg.norm(r))
    v0 = v - np.cross(env.omega_earth, r)
    v0norm = float(np.linalg.norm(v0))
    rho = atmosphere_density(rnorm, env)
    return -0.5 * rho * body.ballistic_si * DRAG_UNIT_FACTOR * v0norm * v0


def satellite_derivative(
    x: np.ndarray,
    u: np.ndarray,
    body: BodyParams,
    env: EnvironmentParams,
) -> np.ndarray:
    """Controlled state derivative [v; gravity + drag + u]."""
    x = np.asarray(x, dtype=float).reshape(6)
    u = np.asarray(u, dtype=float).reshape(3)
    r, v = x[:3], x[3:]
    rnorm = float(np.linalg.norm(r))
    if rnorm <= _MIN_RADIUS_KM:
        raise ValueError(f"state at gravitational singularity (|r|={rnorm})")
    grav = -env.mu_earth / rnorm**3 * r
    acc = grav + drag_acceleration(x, body, env) + u
    return np.concatenate([v, acc])


def debris_derivative(
    x: np.ndarray,
    w: np.ndarray,
    body: BodyParams,
    env: EnvironmentParams,
) -> np.ndarray:
    """Uncontrolled state derivative with additive disturbance on all six rates."""
    w = np.asarray(w, dtype=float).reshape(6)
    return satellite_derivative(x, np.zeros(3), body, env) + w


def rk4_step(
    derivative_fn: Callable[[np.ndarray], np.ndarray],
    x: np.ndarray,
    dt: float,
) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step of size dt."""
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    x = np.asarray(x, dtype=float)
    k1 = np.asarray(derivative_fn(x))
    k2 = np.asarray(derivative_fn(x + 0.5 * dt * k1))
    k3 = np.asarray(derivative_fn(x + 0.5 * dt * k2))
    k4 = np.asarray(derivative_fn(x + dt * k3))
    out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise PropagationError("non-finite state produced by RK4 step")
    return out


def _env_consts(body: BodyParams, env: EnvironmentParams) -> tuple:
    wx, wy, wz = env.omega_earth
    return (env.mu_earth, wx, wy, wz, env.rho0, env.r0, body.ballistic_si)


def _check_states(states: np.ndarray, label: str) -> None:
    if not np.all(np.isfinite(states)):
        bad = int(np.argwhere(~np.all(np.isfinite(states), axis=tuple(range(1, states.ndim))))[0, 0])
        raise PropagationError(f"non-finite state at {label} step {bad}")
    radii = np.linalg.norm(states[..., :3], axis=-1)
    if np.any(radii <= _MIN_RADIUS_KM):
        bad = int(np.argwhere(radii <= _MIN_RADIUS_KM)[0, 0])
        raise PropagationError(f"singular radius at {label} step {bad}")


def propagate_satellite(
    x0: np.ndarray,
    controls: np.ndarray,
    body: BodyParams,
    env: EnvironmentParams,
    grid: SimGrid,
    return_fine: bool = False,
) -> np.ndarray:
    """Roll the controlled object through K control periods under zero-order hold.

    ``controls`` has shape (K, 3); each row is held for ``grid.substeps``
    RK4 substeps of size ``grid.dt``. Returns states at the K+1 control-period
    boundaries, or the full fine grid of K * substeps + 1 states when
    ``return_fine`` is set.
    """
    from . import kernels

    x0 = np.asarray(x0, dtype=float).reshape(6)
    controls = np.asarray(controls, dtype=float).reshape(-1, 3)
    consts = _env_consts(body, env)
    if return_fine:
        states = kernels.rollout_controlled_fine(
            x0, controls, grid.substeps, grid.dt, *consts
        )
    else:
        states = kernels.rollout_controlled(
            x0[None, :], controls[None, :, :], grid.substeps, grid.dt, *consts
        )[:, 0, :]
    _check_states(states, "satellite")
    return states


def propagate_debris(
    x0: np.ndarray,
    n_periods: int,
    body: BodyParams,
    env: EnvironmentParams,
    grid: SimGrid,
    process_noise: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
    return_fine: bool = False,
) -> np.ndarray:
    """Roll the uncontrolled object through ``n_periods`` control periods.

    When ``process_noise`` (6x6 covariance Q of the state-derivative
    disturbance) and ``rng`` are given, every substep adds an independent
    kick w * dt with w ~ N(0, Q / dt); otherwise the rollout is the
    deterministic zero-control trajectory. Fixed rng seed => identical path.
    """
    trajs = propagate_debris_batch(
        np.asarray(x0, dtype=float).reshape(1, 6),
        n_periods,
        body,
        env,
        grid,
        process_noise=process_noise,
        rng=rng,
        return_fine=return_fine,
    )
    return trajs[:, 0, :]


def propagate_debris_batch(
    x0: np.ndarray,
    n_periods: int,
    body: BodyParams,
    env: EnvironmentParams,
    grid: SimGrid,
    process_noise: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
    return_fine: bool = False,
) -> np.ndarray:
    """Batched uncontrolled rollout of M states, independent noise per sample.

    Returns (n_periods + 1, M, 6) boundary states, or the fine grid
    (n_periods * substeps + 1, M, 6) when ``return_fine`` is set.
    """
    from . import kernels

    x = np.ascontiguousarray(np.asarray(x0, dtype=float).reshape(-1, 6))
    m = x.shape[0]
    consts = _env_consts(body, env)
    n_sub = grid.substeps

    kick_chol = None
    if process_noise is not None and rng is not None:
        q = symmetrize(np.asarray(process_noise, dtype=float).reshape(6, 6))
        if np.any(q != 0.0):
            # cov of the per-substep kick w*dt with w ~ N(0, Q/dt) is Q*dt
            kick_chol = safe_cholesky(q * grid.dt)

    zero_u = np.zeros((m, 3))
    if return_fine:
        out = np.empty((n_periods * n_sub + 1, m, 6))
        out[0] = x
    else:
        out = np.empty((n_periods + 1, m, 6))
        out[0] = x

    for p in range(n_periods):
        if kick_chol is None:
            kicks = np.zeros((0, m, 6))
            use_kicks = False
        else:
            z = rng.standard_normal((n_sub, m, 6))
            kicks = z @ kick_chol.T
            use_kicks = True
        if return_fine:
            fine = kernels.advance_period_fine(
                x, zero_u, kicks, use_kicks, n_sub, grid.dt, *consts
            )
            x = np.ascontiguousarray(fine[-1])
            out[p * n_sub + 1 : (p + 1) * n_sub + 1] = fine[1:]
        else:
            x = kernels.advance_period(
                x, zero_u, kicks, use_kicks, n_sub, grid.dt, *consts
            )
            out[p + 1] = x

    _check_states(out.reshape(-1, 6), "debris")
    return out
