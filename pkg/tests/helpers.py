"""Independent oracles shared by the test modules.

Everything here is deliberately implemented without touching the package's
propagation code paths: Kepler motion via universal variables and closed-form
circular orbits, exact Gaussian moment recursions for affine systems, and a
minimal affine period model. The tests compare package output against these.
"""

from __future__ import annotations

import math

import numpy as np


def stumpff_c(z: float) -> float:
    if z > 1e-8:
        return (1.0 - math.cos(math.sqrt(z))) / z
    if z < -1e-8:
        return (math.cosh(math.sqrt(-z)) - 1.0) / (-z)
    return 0.5 - z / 24.0 + z * z / 720.0


def stumpff_s(z: float) -> float:
    if z > 1e-8:
        sz = math.sqrt(z)
        return (sz - math.sin(sz)) / sz**3
    if z < -1e-8:
        sz = math.sqrt(-z)
        return (math.sinh(sz) - sz) / sz**3
    return 1.0 / 6.0 - z / 120.0 + z * z / 5040.0


def kepler_universal(
    r0: np.ndarray,
    v0: np.ndarray,
    dt: float,
    mu: float,
    tol: float = 1e-13,
    max_iter: int = 80,
) -> tuple[np.ndarray, np.ndarray]:
    """Two-body propagation by universal-variable f and g functions."""
    r0 = np.asarray(r0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    r0n = float(np.linalg.norm(r0))
    v0n = float(np.linalg.norm(v0))
    vr0 = float(np.dot(r0, v0)) / r0n
    alpha = 2.0 / r0n - v0n**2 / mu
    sqrt_mu = math.sqrt(mu)

    if abs(alpha) > 1e-12:
        chi = sqrt_mu * abs(alpha) * dt
    else:
        chi = sqrt_mu * dt / r0n

    r = r0n
    z = alpha * chi**2
    for _ in range(max_iter):
        z = alpha * chi**2
        c = stumpff_c(z)
        s = stumpff_s(z)
        f_val = (
            r0n * vr0 / sqrt_mu * chi**2 * c
            + (1.0 - alpha * r0n) * chi**3 * s
            + r0n * chi
            - sqrt_mu * dt
        )
        r = chi**2 * c + r0n * vr0 / sqrt_mu * chi * (1.0 - z * s) + r0n * (
            1.0 - z * c
        )
        d_chi = f_val / r
        chi -= d_chi
        if abs(d_chi) < tol:
            break

    z = alpha * chi**2
    c = stumpff_c(z)
    s = stumpff_s(z)
    f = 1.0 - chi**2 / r0n * c
    g = dt - chi**3 / sqrt_mu * s
    r_vec = f * r0 + g * v0
    rn = float(np.linalg.norm(r_vec))
    fdot = sqrt_mu / (rn * r0n) * chi * (z * s - 1.0)
    gdot = 1.0 - chi**2 / rn * c
    v_vec = fdot * r0 + gdot * v0
    return r_vec, v_vec


def circular_orbit_state(
    radius: float, mu: float, t: float, phase: float = 0.0
) -> np.ndarray:
    """Closed-form equatorial circular orbit state at time t."""
    n = math.sqrt(mu / radius**3)
    theta = n * t + phase
    v = math.sqrt(mu / radius)
    return np.array(
        [
            radius * math.cos(theta),
            radius * math.sin(theta),
            0.0,
            -v * math.sin(theta),
            v * math.cos(theta),
            0.0,
        ]
    )


class AffineModel:
    """Affine one-period map x' = M x + b with optional additive Gaussian noise."""

    def __init__(self, m: np.ndarray, b: np.ndarray, q: np.ndarray) -> None:
        self.m = np.asarray(m, dtype=float).reshape(6, 6)
        self.b = np.asarray(b, dtype=float).reshape(6)
        self.q = 0.5 * (np.asarray(q, dtype=float).reshape(6, 6) + np.asarray(q, dtype=float).reshape(6, 6).T)
        w, vecs = np.linalg.eigh(self.q)
        self._chol_like = vecs @ np.diag(np.sqrt(np.maximum(w, 0.0)))

    def advance(self, states: np.ndarray, rng: np.random.Generator | None = None):
        out = np.asarray(states, dtype=float) @ self.m.T + self.b
        if rng is not None and np.any(self.q != 0.0):
            out = out + rng.standard_normal(out.shape) @ self._chol_like.T
        return out

    @property
    def q_discrete(self) -> np.ndarray:
        return self.q


def exact_affine_moments(
    m: np.ndarray,
    b: np.ndarray,
    q: np.ndarray,
    mean0: np.ndarray,
    cov0: np.ndarray,
    n_steps: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Exact Gaussian moment recursion for the affine model, k = 1..n_steps."""
    m = np.asarray(m, dtype=float)
    means = np.empty((n_steps, 6))
    covs = np.empty((n_steps, 6, 6))
    mean = np.asarray(mean0, dtype=float).copy()
    cov = np.asarray(cov0, dtype=float).copy()
    for k in range(n_steps):
        mean = m @ mean + b
        cov = m @ cov @ m.T + q
        means[k] = mean
        covs[k] = 0.5 * (cov + cov.T)
    return means, covs


def random_psd(rng: np.random.Generator, n: int, scale: float = 1.0) -> np.ndarray:
    """Random full-rank PSD matrix."""
    a = rng.standard_normal((n, n))
    return scale * (a @ a.T) / n + 1e-12 * scale * np.eye(n)


def rel_frobenius(a: np.ndarray, b: np.ndarray) -> float:
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-300)
    return float(np.linalg.norm(a - b) / denom)


def trend_ok(
    means: np.ndarray,
    stds: np.ndarray,
    direction: str,
    n_allowed: int = 1,
) -> bool:
    """Monotone trend check allowing ``n_allowed`` adjacent inversions, each
    no larger than one standard deviation of the pair."""
    means = np.asarray(means, dtype=float)
    stds = np.asarray(stds, dtype=float)
    sign = -1.0 if direction == "non-increasing" else 1.0
    violations = []
    for i in range(means.shape[0] - 1):
        delta = sign * (means[i + 1] - means[i])
        if delta < 0.0:
            violations.append((-delta, max(stds[i], stds[i + 1])))
    if len(violations) > n_allowed:
        return False
    return all(amount <= std for amount, std in violations)
