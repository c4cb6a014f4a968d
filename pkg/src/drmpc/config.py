"""Scenario schema, defaults, and YAML loading/saving.

The default scenario is a low-Earth-orbit conjunction at ~550 km altitude:
the satellite flies a circular equatorial orbit and the debris crosses its
track at 60 degrees with equal speed, timed so the unforced miss distance is
41 m at t = 15 s (mid-episode). The initial states below were produced by
back-propagating that encounter geometry 15 s through the same dynamics and
verified by forward rollout; a regression test re-checks the miss distance.

Unit conventions are documented per key in ``DEFAULT_CONFIG``. Two defaults
deserve a note:

- ``environment.rho0_kg_m3`` is 2.2e-13 (a representative ~550 km value for
  the exponential profile used here, whose decay scale is the reference
  radius). The sea-level 1.225 default of ``EnvironmentParams`` would put
  near-sea-level density at orbital radii and drag accelerations five orders
  of magnitude above gravity, which no avoidance maneuver survives.
- ``debris.process_noise_scale`` expresses the white disturbance covariance
  Q = scale * I on the state derivative in meter-based units (m/s, m/s^2);
  internally it converts to km-based covariance via 1e-6. At km scale the
  same number would mean ~0.22 km/s^2 of random debris acceleration, several
  times the satellite's full control authority.
"""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

import numpy as np
import yaml

from . import cem, dynamics, mpc, risk, uncertainty

# Q is configured in meter-based derivative units; covariance scales by
# (1e-3 km/m)^2 per component.
Q_DERIV_UNIT_KM2 = 1e-6


class ConfigError(ValueError):
    """Configuration parse/validation failure; message names the key path."""


def build_process_noise(scale: float) -> np.ndarray:
    """Isotropic derivative-disturbance covariance from the configured scale."""
    if scale < 0.0:
        raise ValueError(f"process noise scale must be >= 0, got {scale}")
    return scale * Q_DERIV_UNIT_KM2 * np.eye(6)


DEFAULT_CONFIG: dict = {
    "seed": 0,
    "control_enabled": True,
    "satellite": {
        # km / km/s, ECI frame
        "initial_state": {
            "r": [6927.20208316046, -113.77121970935671, 0.0],
            "v": [0.12455944578403852, 7.584066114735347, -0.0],
        },
        "mass_kg": 300.0,
        "drag_area_m2": 1.0,
        "drag_coeff": 2.2,
    },
    "debris": {
        "initial_mean": {
            "r": [6927.243094217684, -56.885609885948995, -98.52876654543722],
            "v": [0.12455797150941045, 3.792033064563751, 6.56799393226298],
        },
        # km^2 (positions), (km/s)^2 (velocities): 10 m / 1 m/s one-sigma
        "initial_cov_diag": [1e-4, 1e-4, 1e-4, 1e-6, 1e-6, 1e-6],
        "mass_kg": 50.0,
        "drag_area_m2": 1.0,
        "drag_coeff": 2.2,
        # Q = scale * I on the state derivative, meter-based units (see module docstring)
        "process_noise_scale": 0.05,
    },
    "environment": {
        "mu_earth_km3_s2": 398600.4418,
        "omega_earth_rad_s": [0.0, 0.0, 7.2921159e-5],
        "rho0_kg_m3": 2.2e-13,
        "r0_km": 6378.1363,
    },
    "risk": {
        "epsilon": 0.05,  # allowable collision probability
        "d_thres_km": 0.1,
        "gamma": 0.95,  # trajectory-risk discount
    },
    "mpc": {
        "horizon_steps": 10,
        "control_period_s": 1.0,
        "dt_s": 0.01,
        "sim_duration_s": 30.0,
        "control_weight_diag": [1.0, 1.0, 1.0],
        "u_min_km_s2": [-0.05, -0.05, -0.05],
        "u_max_km_s2": [0.05, 0.05, 0.05],
    },
    "propagator": {
        "kind": "mc",  # linear | ut | mc
        "samples": 50,
    },
    "cem": {
        "population": 200,
        "elite_count": 20,
        "max_iterations": 15,
        "init_std_km_s2": 0.02,  # 0.4 * u_max
        "std_floor_km_s2": 1e-4,
        "smoothing": 0.2,
    },
}


def _merge_with_defaults(user: dict, defaults: dict, path: str = "") -> dict:
    """Overlay user keys on defaults, rejecting keys the schema doesn't know."""
    merged = copy.deepcopy(defaults)
    for key, value in user.items():
        dotted = f"{path}{key}"
        if key not in defaults:
            raise ConfigError(f"unknown config key: {dotted}")
        if isinstance(defaults[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{dotted}: expected a mapping")
            merged[key] = _merge_with_defaults(value, defaults[key], f"{dotted}.")
        else:
            merged[key] = value
    return merged


def _build(path: str, factory, *args, **kwargs):
    try:
        return factory(*args, **kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def scenario_from_dict(raw: dict) -> mpc.Scenario:
    """Validate a (possibly partial) config mapping into a Scenario."""
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("top-level config must be a mapping")
    cfg = _merge_with_defaults(raw, DEFAULT_CONFIG)

    sat_cfg = cfg["satellite"]
    deb_cfg = cfg["debris"]
    env_cfg = cfg["environment"]

    sat_state = _build(
        "satellite.initial_state",
        dynamics.StateVector,
        r=np.asarray(sat_cfg["initial_state"]["r"], dtype=float),
        v=np.asarray(sat_cfg["initial_state"]["v"], dtype=float),
    )
    sat_body = _build(
        "satellite",
        dynamics.BodyParams,
        mass=float(sat_cfg["mass_kg"]),
        drag_area=float(sat_cfg["drag_area_m2"]),
        drag_coeff=float(sat_cfg["drag_coeff"]),
    )
    deb_body = _build(
        "debris",
        dynamics.BodyParams,
        mass=float(deb_cfg["mass_kg"]),
        drag_area=float(deb_cfg["drag_area_m2"]),
        drag_coeff=float(deb_cfg["drag_coeff"]),
    )
    env = _build(
        "environment",
        dynamics.EnvironmentParams,
        mu_earth=float(env_cfg["mu_earth_km3_s2"]),
        omega_earth=tuple(float(w) for w in env_cfg["omega_earth_rad_s"]),
        rho0=float(env_cfg["rho0_kg_m3"]),
        r0=float(env_cfg["r0_km"]),
    )

    mean = np.concatenate(
        [
            np.asarray(deb_cfg["initial_mean"]["r"], dtype=float).reshape(3),
            np.asarray(deb_cfg["initial_mean"]["v"], dtype=float).reshape(3),
        ]
    )
    cov_diag = np.asarray(deb_cfg["initial_cov_diag"], dtype=float).reshape(-1)
    if cov_diag.shape[0] != 6:
        raise ConfigError("debris.initial_cov_diag: expected 6 entries")
    belief0 = _build(
        "debris.initial_cov_diag", uncertainty.GaussianBelief, mean, np.diag(cov_diag)
    )
    q = _build(
        "debris.process_noise_scale",
        build_process_noise,
        float(deb_cfg["process_noise_scale"]),
    )

    risk_cfg = cfg["risk"]
    if not 0.0 < float(risk_cfg["epsilon"]) < 1.0:
        raise ConfigError(
            f"risk.epsilon: must lie in (0, 1), got {risk_cfg['epsilon']}"
        )
    risk_params = _build(
        "risk",
        risk.RiskParams,
        epsilon=float(risk_cfg["epsilon"]),
        d_thres=float(risk_cfg["d_thres_km"]),
        gamma=float(risk_cfg["gamma"]),
    )

    mpc_cfg = cfg["mpc"]
    grid = _build(
        "mpc.dt_s",
        dynamics.SimGrid,
        dt=float(mpc_cfg["dt_s"]),
        control_period=float(mpc_cfg["control_period_s"]),
    )
    weight_diag = np.asarray(mpc_cfg["control_weight_diag"], dtype=float).reshape(-1)
    if weight_diag.shape[0] != 3:
        raise ConfigError("mpc.control_weight_diag: expected 3 entries")

    prop_cfg = cfg["propagator"]
    propagator = _build(
        "propagator",
        uncertainty.PropagatorKind,
        kind=str(prop_cfg["kind"]),
        samples=int(prop_cfg["samples"]),
    )

    cem_cfg = cfg["cem"]
    cem_params = _build(
        "cem",
        cem.CemParams,
        population=int(cem_cfg["population"]),
        elite_count=int(cem_cfg["elite_count"]),
        max_iterations=int(cem_cfg["max_iterations"]),
        init_std=float(cem_cfg["init_std_km_s2"]),
        std_floor=float(cem_cfg["std_floor_km_s2"]),
        smoothing=float(cem_cfg["smoothing"]),
    )

    return _build(
        "scenario",
        mpc.Scenario,
        satellite_x0=sat_state,
        debris_belief0=belief0,
        satellite_body=sat_body,
        debris_body=deb_body,
        env=env,
        process_noise=q,
        risk=risk_params,
        horizon=int(mpc_cfg["horizon_steps"]),
        grid=grid,
        sim_duration=float(mpc_cfg["sim_duration_s"]),
        control_weight=np.diag(weight_diag),
        u_min=np.asarray(mpc_cfg["u_min_km_s2"], dtype=float),
        u_max=np.asarray(mpc_cfg["u_max_km_s2"], dtype=float),
        propagator=propagator,
        cem=cem_params,
        seed=int(cfg["seed"]),
        control_enabled=bool(cfg["control_enabled"]),
    )


def scenario_to_dict(scenario: mpc.Scenario) -> dict:
    """Serialize a Scenario back into the config mapping shape."""
    q = np.asarray(scenario.process_noise)
    off_diag = q - np.diag(np.diag(q))
    if np.any(off_diag != 0.0) or np.ptp(np.diag(q)) != 0.0:
        raise ValueError("only isotropic process noise round-trips through config")
    scale = float(q[0, 0] / Q_DERIV_UNIT_KM2)
    cov = np.asarray(scenario.debris_belief0.cov)
    if np.any(cov - np.diag(np.diag(cov)) != 0.0):
        raise ValueError("only diagonal initial covariance round-trips through config")
    weight = np.asarray(scenario.control_weight)
    if np.any(weight - np.diag(np.diag(weight)) != 0.0):
        raise ValueError("only diagonal control weight round-trips through config")
    return {
        "seed": int(scenario.seed),
        "control_enabled": bool(scenario.control_enabled),
        "satellite": {
            "initial_state": {
                "r": scenario.satellite_x0.r.tolist(),
                "v": scenario.satellite_x0.v.tolist(),
            },
            "mass_kg": scenario.satellite_body.mass,
            "drag_area_m2": scenario.satellite_body.drag_area,
            "drag_coeff": scenario.satellite_body.drag_coeff,
        },
        "debris": {
            "initial_mean": {
                "r": scenario.debris_belief0.mean[:3].tolist(),
                "v": scenario.debris_belief0.mean[3:].tolist(),
            },
            "initial_cov_diag": np.diag(cov).tolist(),
            "mass_kg": scenario.debris_body.mass,
            "drag_area_m2": scenario.debris_body.drag_area,
            "drag_coeff": scenario.debris_body.drag_coeff,
            "process_noise_scale": scale,
        },
        "environment": {
            "mu_earth_km3_s2": scenario.env.mu_earth,
            "omega_earth_rad_s": list(scenario.env.omega_earth),
            "rho0_kg_m3": scenario.env.rho0,
            "r0_km": scenario.env.r0,
        },
        "risk": {
            "epsilon": scenario.risk.epsilon,
            "d_thres_km": scenario.risk.d_thres,
            "gamma": scenario.risk.gamma,
        },
        "mpc": {
            "horizon_steps": scenario.horizon,
            "control_period_s": scenario.grid.control_period,
            "dt_s": scenario.grid.dt,
            "sim_duration_s": scenario.sim_duration,
            "control_weight_diag": np.diag(weight).tolist(),
            "u_min_km_s2": scenario.u_min.tolist(),
            "u_max_km_s2": scenario.u_max.tolist(),
        },
        "propagator": {
            "kind": scenario.propagator.kind,
            "samples": scenario.propagator.samples,
        },
        "cem": {
            "population": scenario.cem.population,
            "elite_count": scenario.cem.elite_count,
            "max_iterations": scenario.cem.max_iterations,
            "init_std_km_s2": scenario.cem.init_std,
            "std_floor_km_s2": scenario.cem.std_floor,
            "smoothing": scenario.cem.smoothing,
        },
    }


def load_config(path: str | Path | None) -> mpc.Scenario:
    """Load a YAML scenario config; None or an empty file yields the defaults."""
    if path is None:
        return scenario_from_dict({})
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with path.open("r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"could not parse {path}: {exc}") from exc
    return scenario_from_dict(raw if raw is not None else {})


def save_config(scenario: mpc.Scenario, path: str | Path) -> None:
    """Write a scenario as a YAML document that ``load_config`` reproduces."""
    with Path(path).open("w", encoding="utf-8") as fh:
        yaml.safe_dump(scenario_to_dict(scenario), fh, sort_keys=True)


def config_hash(scenario: mpc.Scenario) -> str:
    """Stable hash of the fully resolved configuration."""
    canonical = json.dumps(
        scenario_to_dict(scenario), sort_keys=True, separators=(",", ":")
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
