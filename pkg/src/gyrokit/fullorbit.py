"""Exact Newton-Lorentz dynamics and phase-space map diagnostics.

Two fixed-step integrators are provided: RK4 (default oracle, known order)
and Boris (half-step electric kicks around an exact magnetic rotation, so
speed is preserved to roundoff in static pure-B fields). Having two
independent schemes lets integrator artifacts be told apart from theory
errors in the guiding-center comparisons.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import NonFinite, StepTooLargeWarning
from .fields import DEFAULT_SPECIES, FieldModel, FieldSample, Species, _cross, sample


@dataclass
class FullState:
    """Full-orbit particle state."""

    r: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.v = np.asarray(self.v, dtype=float)


@dataclass
class FullTrajectory:
    """Time series of full-orbit states (row i is time t[i])."""

    t: np.ndarray
    r: np.ndarray
    v: np.ndarray

    def __len__(self):
        return len(self.t)

    def state(self, i: int) -> FullState:
        return FullState(self.r[i].copy(), self.v[i].copy(), float(self.t[i]))


def canonical_momentum(s: FullState, field: FieldSample,
                       species: Species = DEFAULT_SPECIES) -> np.ndarray:
    """p = m v + (q/c) A_phys at the state's position."""
    return species.m * s.v + (species.q / species.c) * field.A


def energy(s: FullState, field: FieldSample,
           species: Species = DEFAULT_SPECIES) -> float:
    """H = m v^2 / 2 + q Phi_phys (conserved in static fields)."""
    return 0.5 * species.m * float(s.v @ s.v) + species.q * field.Phi


def lorentz_rhs(s: FullState, field: FieldSample,
                species: Species = DEFAULT_SPECIES):
    """Newtonian form of the Lorentz dynamics.

    Returns (dr/dt, dv/dt) with dv/dt = (q/m)(E + v x B / c), all physical
    fields.
    """
    a = (species.q / species.m) * (
        field.E + _cross(s.v, field.B) / species.c
    )
    return s.v, a


def _accel(model, eps, species, r, v, t):
    B = model.B(r, t)
    E = model.E(r, t)
    k = species.q / (species.m * eps)
    ic = 1.0 / species.c
    return np.array(
        [
            k * (E[0] + ic * (v[1] * B[2] - v[2] * B[1])),
            k * (E[1] + ic * (v[2] * B[0] - v[0] * B[2])),
            k * (E[2] + ic * (v[0] * B[1] - v[1] * B[0])),
        ]
    )


def _rk4_step(model, eps, species, r, v, t, dt):
    a1 = _accel(model, eps, species, r, v, t)
    k1r, k1v = v, a1
    r2 = r + 0.5 * dt * k1r
    v2 = v + 0.5 * dt * k1v
    a2 = _accel(model, eps, species, r2, v2, t + 0.5 * dt)
    r3 = r + 0.5 * dt * v2
    v3 = v + 0.5 * dt * a2
    a3 = _accel(model, eps, species, r3, v3, t + 0.5 * dt)
    r4 = r + dt * v3
    v4 = v + dt * a3
    a4 = _accel(model, eps, species, r4, v4, t + dt)
    r_new = r + (dt / 6.0) * (k1r + 2.0 * v2 + 2.0 * v3 + v4)
    v_new = v + (dt / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
    return r_new, v_new


def _boris_step(model, eps, species, r, v, t, dt):
    B = model.B(r, t) / eps
    E = model.E(r, t) / eps
    half_kick = (species.q / species.m) * (0.5 * dt) * E
    v_minus = v + half_kick
    tv = (species.q * 0.5 * dt / (species.m * species.c)) * B
    v_prime = v_minus + _cross(v_minus, tv)
    sv = 2.0 * tv / (1.0 + tv @ tv)
    v_plus = v_minus + _cross(v_prime, sv)
    v_new = v_plus + half_kick
    r_new = r + dt * v_new
    return r_new, v_new


def _check_step(model, eps, species, r, t, dt):
    Bmag = math.sqrt(float(model.B(r, t) @ model.B(r, t))) / eps
    omega = abs(species.q) * Bmag / (species.m * species.c)
    if abs(dt) * omega > 0.5:
        warnings.warn(
            f"dt * Omega = {abs(dt) * omega:.3g} > 0.5 does not resolve the "
            "gyration",
            StepTooLargeWarning,
            stacklevel=3,
        )


def step_rk4(s: FullState, dt: float, model: FieldModel, eps: float,
             species: Species = DEFAULT_SPECIES) -> FullState:
    """One classical RK4 step (local error O(dt^5))."""
    _check_step(model, eps, species, s.r, s.t, dt)
    r, v = _rk4_step(model, eps, species, s.r, s.v, s.t, dt)
    return FullState(r, v, s.t + dt)


def step_boris(s: FullState, dt: float, model: FieldModel, eps: float,
               species: Species = DEFAULT_SPECIES) -> FullState:
    """One Boris step: half electric kick, magnetic rotation, half kick."""
    _check_step(model, eps, species, s.r, s.t, dt)
    r, v = _boris_step(model, eps, species, s.r, s.v, s.t, dt)
    return FullState(r, v, s.t + dt)


_STEPPERS = {"rk4": _rk4_step, "boris": _boris_step}


def integrate_full(s0: FullState, t_end: float, dt: float, model: FieldModel,
                   eps: float, species: Species = DEFAULT_SPECIES,
                   scheme: str = "rk4",
                   sample_stride: int = 1) -> FullTrajectory:
    """Fixed-step integration of the exact dynamics from s0.t to s0.t + t_end.

    Records every sample_stride-th state (plus the final one). The actual
    span is round(t_end / dt) whole steps.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if scheme not in _STEPPERS:
        raise ValueError(f"unknown scheme {scheme!r}")
    stepper = _STEPPERS[scheme]
    n_steps = int(round(t_end / dt))
    _check_step(model, eps, species, s0.r, s0.t, dt)

    r = s0.r.copy()
    v = s0.v.copy()
    t0 = s0.t
    ts = [t0]
    rs = [r.copy()]
    vs = [v.copy()]
    for i in range(1, n_steps + 1):
        t = t0 + (i - 1) * dt
        r, v = stepper(model, eps, species, r, v, t, dt)
        if i % sample_stride == 0 or i == n_steps:
            ts.append(t0 + i * dt)
            rs.append(r.copy())
            vs.append(v.copy())
    traj = FullTrajectory(np.array(ts), np.array(rs), np.array(vs))
    if not np.all(np.isfinite(traj.r)) or not np.all(np.isfinite(traj.v)):
        raise NonFinite("full-orbit integration produced non-finite state")
    return traj


@dataclass
class MapJacobianReport:
    """Numerical Jacobian of a phase-space map and its symplectic defect."""

    M: np.ndarray
    symplectic_residual: float


def poisson_matrix(two_g: int) -> np.ndarray:
    """Canonical Poisson matrix [[0, I], [-I, 0]] of even dimension two_g."""
    if two_g % 2 != 0:
        raise ValueError(f"phase-space dimension must be even, got {two_g}")
    g = two_g // 2
    J = np.zeros((two_g, two_g))
    J[:g, g:] = np.eye(g)
    J[g:, :g] = -np.eye(g)
    return J


def symplectic_residual(map_fn, x0, h_jac: float = 1e-5) -> MapJacobianReport:
    """Max-norm of M J M^T - J for the central-difference Jacobian M of
    map_fn at x0 (coordinates ordered (q_1..q_g, p_1..p_g))."""
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    M = np.empty((n, n))
    for j in range(n):
        xp = x0.copy()
        xm = x0.copy()
        xp[j] += h_jac
        xm[j] -= h_jac
        fp = np.asarray(map_fn(xp), dtype=float)
        fm = np.asarray(map_fn(xm), dtype=float)
        if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
            raise NonFinite("map returned non-finite values near x0")
        # divide by the realized step so affine maps differentiate exactly
        M[:, j] = (fp - fm) / (xp[j] - xm[j])
    J = poisson_matrix(n)
    res = float(np.max(np.abs(M @ J @ M.T - J)))
    return MapJacobianReport(M=M, symplectic_residual=res)
