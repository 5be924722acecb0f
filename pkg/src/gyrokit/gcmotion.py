"""Canonical guiding-center dynamics: Hamiltonian, drift velocities,
generalized Hamilton equations, and the fixed-step integrator.

The integrator advances the canonical block (r', p_r', phi') with p_phi'
held exactly constant (the gyrophase is ignorable, so its momentum is an
exact invariant by construction, not a numerical one). The parallel
velocity is never integrated separately: v' is recovered each step from the
momentum constraint v' = (p_r' - (q/c) A'_phys) / m.

The explicit drift form u b + v_E + v_D is used for initialization and as a
per-sample residual diagnostic against dr'/dt; it omits higher-order terms,
so the residual sits in an O(eps^2) band rather than at zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonFinite, ResidualBlowup
from .fields import DEFAULT_SPECIES, FieldModel, FieldSample, Species, _cross, sample
from .gyrotransform import GCState


@dataclass
class GCDerivative:
    """Time derivative of the superabundant state plus the drift-form
    constraint residual (reported, never silently absorbed)."""

    dr_gc: np.ndarray
    dp_r: np.ndarray
    dphi: float
    dp_phi: float
    constraint_residual: np.ndarray


@dataclass
class GCTrajectory:
    """Time series of guiding-center states and the recorded residual."""

    t: np.ndarray
    r: np.ndarray
    p_r: np.ndarray
    phi: np.ndarray
    p_phi: np.ndarray
    v: np.ndarray
    residual: np.ndarray

    def __len__(self):
        return len(self.t)

    def state(self, i: int) -> GCState:
        return GCState(self.r[i].copy(), self.p_r[i].copy(), float(self.phi[i]),
                       float(self.p_phi[i]), self.v[i].copy(), float(self.t[i]))


def v_E(field: FieldSample, species: Species = DEFAULT_SPECIES) -> np.ndarray:
    """Electric drift c E x b / B, independent of particle properties."""
    return species.c * _cross(field.E, field.b) / field.Bmag


def v_D(field: FieldSample, u: float, mu: float,
        species: Species = DEFAULT_SPECIES) -> np.ndarray:
    """First-order inhomogeneity drift.

    (b / Omega) x { (mu/m) grad|B| + (u b + v_E) . (u grad b + grad v_E) },
    with the convective left contraction (V . grad) W = V_i d_i W_j.
    """
    vE = v_E(field, species)
    V = u * field.b + vE
    tensor = u * field.gradb_tensor + field.grad_vE_tensor
    term = (mu / species.m) * field.gradBmag + V @ tensor
    return _cross(field.b, term) / field.Omega


def drift_velocity(field: FieldSample, u: float, mu: float,
                   species: Species = DEFAULT_SPECIES) -> np.ndarray:
    """Explicit drift form u b + v_E + v_D of the guiding-center velocity."""
    return u * field.b + v_E(field, species) + v_D(field, u, mu, species)


def hamiltonian_K(g: GCState, field: FieldSample,
                  species: Species = DEFAULT_SPECIES) -> float:
    """Guiding-center Hamiltonian
    K = -p_phi Omega + |p_r - (q/c) A|^2 / (2 m) + q Phi."""
    pk = g.p_r - (species.q / species.c) * field.A
    return (-g.p_phi * field.Omega
            + float(pk @ pk) / (2.0 * species.m)
            + species.q * field.Phi)


def _canonical_core(field: FieldSample, p_r, p_phi: float, species: Species):
    """Hamilton equations for (r', p_r', phi'); dp_phi = 0 identically."""
    v_gc = (p_r - (species.q / species.c) * field.A) / species.m
    grad_omega = (species.q / (species.m * species.c)) * field.gradBmag
    dp_r = ((species.q / species.c) * (field.gradA_tensor @ v_gc)
            + p_phi * grad_omega
            - species.q * field.gradPhi)
    return v_gc, dp_r, -field.Omega


def canonical_rhs(g: GCState, field: FieldSample,
                  species: Species = DEFAULT_SPECIES) -> GCDerivative:
    """Evaluate the generalized Hamilton equations at a state.

    dr'/dt = (p_r' - (q/c) A') / m,
    dp_r'/dt = (q/c) (grad A') . v' + p_phi' grad Omega - q grad Phi'
    (contraction (grad A) . v = v_j d_i A_j), dphi'/dt = -Omega,
    dp_phi'/dt = 0. The output does not depend on g.phi. The residual
    compares dr'/dt against the drift form recomputed from the fields.
    """
    v_gc, dp_r, dphi = _canonical_core(field, g.p_r, g.p_phi, species)
    u = float(field.b @ v_gc)
    mu = -(species.q / (species.m * species.c)) * g.p_phi
    res = v_gc - drift_velocity(field, u, mu, species)
    return GCDerivative(dr_gc=v_gc, dp_r=dp_r, dphi=dphi, dp_phi=0.0,
                        constraint_residual=res)


def _residual_norm(field: FieldSample, v_gc, p_phi: float,
                   species: Species) -> float:
    u = float(field.b @ v_gc)
    mu = -(species.q / (species.m * species.c)) * p_phi
    res = v_gc - drift_velocity(field, u, mu, species)
    return math.sqrt(float(res @ res))


def speed_scale(g: GCState, field: FieldSample,
                species: Species = DEFAULT_SPECIES) -> float:
    """Velocity scale sqrt(2 |K| / m) used to normalize residuals.

    Unlike |v'|, which vanishes at bounce turning points, this scale is
    constant along static-field trajectories.
    """
    K = hamiltonian_K(g, field, species)
    return max(math.sqrt(2.0 * abs(K) / species.m),
               math.sqrt(float(g.v @ g.v)), 1e-300)


def integrate_gc(g0: GCState, t_end: float, dt: float, model: FieldModel,
                 eps: float, species: Species = DEFAULT_SPECIES,
                 sample_stride: int = 1, blowup_factor: float = 100.0,
                 blowup_floor: float = 1e-8) -> GCTrajectory:
    """RK4 on the canonical equations with p_phi held exactly constant.

    dt should resolve the drift timescale, not the gyroperiod (that is the
    point of the guiding-center description); dt |v'| / L <= 0.01 is a good
    default. The drift-form residual is recorded at every sample. If the
    relative residual exceeds max(blowup_factor * eps^2, 10x its initial
    value, blowup_floor) the run aborts with ResidualBlowup, which signals
    leaving the asymptotic regime (or an unresolved fast mode).
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    n_steps = int(round(t_end / dt))
    p_phi = float(g0.p_phi)
    r = g0.r.copy()
    p = g0.p_r.copy()
    phi = float(g0.phi)
    t0 = g0.t

    def rhs(r_, p_, t_):
        fs = sample(model, r_, t_, eps, species)
        return _canonical_core(fs, p_, p_phi, species)

    def record(r_, p_, t_):
        fs = sample(model, r_, t_, eps, species)
        v_gc = (p_ - (species.q / species.c) * fs.A) / species.m
        return v_gc, _residual_norm(fs, v_gc, p_phi, species)

    v0, res0 = record(r, p, t0)
    scale = speed_scale(g0, sample(model, r, t0, eps, species), species)
    rel0 = res0 / scale
    threshold = max(blowup_factor * eps * eps, 10.0 * rel0, blowup_floor)

    ts = [t0]
    rs = [r.copy()]
    ps = [p.copy()]
    phis = [phi]
    vs = [v0]
    ress = [res0]
    for i in range(1, n_steps + 1):
        t = t0 + (i - 1) * dt
        dr1, dp1, df1 = rhs(r, p, t)
        dr2, dp2, df2 = rhs(r + 0.5 * dt * dr1, p + 0.5 * dt * dp1, t + 0.5 * dt)
        dr3, dp3, df3 = rhs(r + 0.5 * dt * dr2, p + 0.5 * dt * dp2, t + 0.5 * dt)
        dr4, dp4, df4 = rhs(r + dt * dr3, p + dt * dp3, t + dt)
        r = r + (dt / 6.0) * (dr1 + 2.0 * dr2 + 2.0 * dr3 + dr4)
        p = p + (dt / 6.0) * (dp1 + 2.0 * dp2 + 2.0 * dp3 + dp4)
        phi = phi + (dt / 6.0) * (df1 + 2.0 * df2 + 2.0 * df3 + df4)
        if i % sample_stride == 0 or i == n_steps:
            t_i = t0 + i * dt
            v_gc, res = record(r, p, t_i)
            if res / scale > threshold:
                raise ResidualBlowup(
                    f"relative constraint residual {res / scale:.3e} exceeds "
                    f"{threshold:.3e} at t = {t_i:.6g}"
                )
            ts.append(t_i)
            rs.append(r.copy())
            ps.append(p.copy())
            phis.append(phi)
            vs.append(v_gc)
            ress.append(res)
    traj = GCTrajectory(np.array(ts), np.array(rs), np.array(ps),
                        np.array(phis), np.full(len(ts), p_phi),
                        np.array(vs), np.array(ress))
    if not np.all(np.isfinite(traj.r)) or not np.all(np.isfinite(traj.p_r)):
        raise NonFinite("guiding-center integration produced non-finite state")
    return traj
