"""Compiled RK4 rollout kernels for the orbital equations of motion.

These are the hot paths behind trajectory rollouts: the cross-entropy
optimizer integrates hundreds of candidate control sequences per iteration
and the Monte Carlo propagator integrates large sample batches, so the
per-substep work is written as scalar arithmetic under numba.

The math matches ``dynamics.satellite_derivative`` / ``dynamics.rk4_step``
exactly (same operation order); the test suite cross-checks the two paths.
Argument convention: ``consts = (mu, wx, wy, wz, rho0, r0, bc)`` where
``bc = A * C_d / m`` in SI units and the 1000x km conversion is applied
inside (see ``dynamics.DRAG_UNIT_FACTOR``).
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def _deriv(rx, ry, rz, vx, vy, vz, ux, uy, uz, mu, wx, wy, wz, rho0, r0, bc):
    rn = math.sqrt(rx * rx + ry * ry + rz * rz)
    g = -mu / (rn * rn * rn)
    # co-rotating velocity v0 = v - omega x r
    v0x = vx - (wy * rz - wz * ry)
    v0y = vy - (wz * rx - wx * rz)
    v0z = vz - (wx * ry - wy * rx)
    v0n = math.sqrt(v0x * v0x + v0y * v0y + v0z * v0z)
    rho = rho0 * math.exp(-(rn - r0) / r0)
    c = -0.5 * rho * bc * 1000.0 * v0n
    return (
        vx,
        vy,
        vz,
        g * rx + c * v0x + ux,
        g * ry + c * v0y + uy,
        g * rz + c * v0z + uz,
    )


@njit(cache=True, inline="always")
def _rk4(rx, ry, rz, vx, vy, vz, ux, uy, uz, dt, mu, wx, wy, wz, rho0, r0, bc):
    a1 = _deriv(rx, ry, rz, vx, vy, vz, ux, uy, uz, mu, wx, wy, wz, rho0, r0, bc)
    h = 0.5 * dt
    a2 = _deriv(
        rx + h * a1[0], ry + h * a1[1], rz + h * a1[2],
        vx + h * a1[3], vy + h * a1[4], vz + h * a1[5],
        ux, uy, uz, mu, wx, wy, wz, rho0, r0, bc,
    )
    a3 = _deriv(
        rx + h * a2[0], ry + h * a2[1], rz + h * a2[2],
        vx + h * a2[3], vy + h * a2[4], vz + h * a2[5],
        ux, uy, uz, mu, wx, wy, wz, rho0, r0, bc,
    )
    a4 = _deriv(
        rx + dt * a3[0], ry + dt * a3[1], rz + dt * a3[2],
        vx + dt * a3[3], vy + dt * a3[4], vz + dt * a3[5],
        ux, uy, uz, mu, wx, wy, wz, rho0, r0, bc,
    )
    s = dt / 6.0
    return (
        rx + s * (a1[0] + 2.0 * a2[0] + 2.0 * a3[0] + a4[0]),
        ry + s * (a1[1] + 2.0 * a2[1] + 2.0 * a3[1] + a4[1]),
        rz + s * (a1[2] + 2.0 * a2[2] + 2.0 * a3[2] + a4[2]),
        vx + s * (a1[3] + 2.0 * a2[3] + 2.0 * a3[3] + a4[3]),
        vy + s * (a1[4] + 2.0 * a2[4] + 2.0 * a3[4] + a4[4]),
        vz + s * (a1[5] + 2.0 * a2[5] + 2.0 * a3[5] + a4[5]),
    )


@njit(cache=True)
def rollout_controlled(x0, useq, n_sub, dt, mu, wx, wy, wz, rho0, r0, bc):
    """Batched zero-order-hold rollout: (M,6) states, (M,K,3) controls.

    Returns (K+1, M, 6) states at control-period boundaries.
    """
    m = x0.shape[0]
    k_steps = useq.shape[1]
    out = np.empty((k_steps + 1, m, 6))
    out[0] = x0
    for i in range(m):
        rx, ry, rz = x0[i, 0], x0[i, 1], x0[i, 2]
        vx, vy, vz = x0[i, 3], x0[i, 4], x0[i, 5]
        for k in range(k_steps):
            ux, uy, uz = useq[i, k, 0], useq[i, k, 1], useq[i, k, 2]
            for _ in range(n_sub):
                rx, ry, rz, vx, vy, vz = _rk4(
                    rx, ry, rz, vx, vy, vz, ux, uy, uz, dt,
                    mu, wx, wy, wz, rho0, r0, bc,
                )
            out[k + 1, i, 0] = rx
            out[k + 1, i, 1] = ry
            out[k + 1, i, 2] = rz
            out[k + 1, i, 3] = vx
            out[k + 1, i, 4] = vy
            out[k + 1, i, 5] = vz
    return out


@njit(cache=True)
def rollout_controlled_fine(x0, useq, n_sub, dt, mu, wx, wy, wz, rho0, r0, bc):
    """Single-state zero-order-hold rollout returning every substep.

    ``x0`` is (6,), ``useq`` (K, 3); returns (K * n_sub + 1, 6).
    """
    k_steps = useq.shape[0]
    out = np.empty((k_steps * n_sub + 1, 6))
    rx, ry, rz, vx, vy, vz = x0[0], x0[1], x0[2], x0[3], x0[4], x0[5]
    out[0, 0], out[0, 1], out[0, 2] = rx, ry, rz
    out[0, 3], out[0, 4], out[0, 5] = vx, vy, vz
    idx = 1
    for k in range(k_steps):
        ux, uy, uz = useq[k, 0], useq[k, 1], useq[k, 2]
        for _ in range(n_sub):
            rx, ry, rz, vx, vy, vz = _rk4(
                rx, ry, rz, vx, vy, vz, ux, uy, uz, dt,
                mu, wx, wy, wz, rho0, r0, bc,
            )
            out[idx, 0], out[idx, 1], out[idx, 2] = rx, ry, rz
            out[idx, 3], out[idx, 4], out[idx, 5] = vx, vy, vz
            idx += 1
    return out


@njit(cache=True)
def advance_period(x, u, kicks, use_kicks, n_sub, dt, mu, wx, wy, wz, rho0, r0, bc):
    """One control period for M states, boundary state only.

    Same contract as ``advance_period_fine`` but returns just the (M, 6)
    states after the final substep, keeping memory flat for large batches.
    """
    m = x.shape[0]
    out = np.empty((m, 6))
    for i in range(m):
        rx, ry, rz = x[i, 0], x[i, 1], x[i, 2]
        vx, vy, vz = x[i, 3], x[i, 4], x[i, 5]
        ux, uy, uz = u[i, 0], u[i, 1], u[i, 2]
        for j in range(n_sub):
            rx, ry, rz, vx, vy, vz = _rk4(
                rx, ry, rz, vx, vy, vz, ux, uy, uz, dt,
                mu, wx, wy, wz, rho0, r0, bc,
            )
            if use_kicks:
                rx += kicks[j, i, 0]
                ry += kicks[j, i, 1]
                rz += kicks[j, i, 2]
                vx += kicks[j, i, 3]
                vy += kicks[j, i, 4]
                vz += kicks[j, i, 5]
        out[i, 0], out[i, 1], out[i, 2] = rx, ry, rz
        out[i, 3], out[i, 4], out[i, 5] = vx, vy, vz
    return out


@njit(cache=True)
def advance_period_fine(x, u, kicks, use_kicks, n_sub, dt, mu, wx, wy, wz, rho0, r0, bc):
    """One control period for M states, recording every substep.

    ``x`` is (M, 6), ``u`` (M, 3); ``kicks`` (n_sub, M, 6) holds pre-sampled
    additive disturbances applied after each substep when ``use_kicks``.
    Returns (n_sub + 1, M, 6).
    """
    m = x.shape[0]
    out = np.empty((n_sub + 1, m, 6))
    out[0] = x
    for i in range(m):
        rx, ry, rz = x[i, 0], x[i, 1], x[i, 2]
        vx, vy, vz = x[i, 3], x[i, 4], x[i, 5]
        ux, uy, uz = u[i, 0], u[i, 1], u[i, 2]
        for j in range(n_sub):
            rx, ry, rz, vx, vy, vz = _rk4(
                rx, ry, rz, vx, vy, vz, ux, uy, uz, dt,
                mu, wx, wy, wz, rho0, r0, bc,
            )
            if use_kicks:
                rx += kicks[j, i, 0]
                ry += kicks[j, i, 1]
                rz += kicks[j, i, 2]
                vx += kicks[j, i, 3]
                vy += kicks[j, i, 4]
                vz += kicks[j, i, 5]
            out[j + 1, i, 0], out[j + 1, i, 1], out[j + 1, i, 2] = rx, ry, rz
            out[j + 1, i, 3], out[j + 1, i, 4], out[j + 1, i, 5] = vx, vy, vz
    return out
