"""Verification of generalized-canonical structure and the constrained
variational principle.

A generalized-canonical system pairs an even-dimensional canonical block z
(obeying Hamilton equations with Poisson matrix J) with k extra variables u
pinned by finite-term constraints f_s(z, u, t) = 0. The verifier measures
both along stored trajectories: the Hamilton residual by central-difference
time derivatives against J grad K, and the constraint residual pointwise.

Discrete actions use the trapezoid rule per interval with the path velocity
taken as the interval's finite difference. First-variation residuals are
probed with hat-function perturbations on interior nodes, normalized by the
hat's time integral so the reported number approximates the continuum
Euler-Lagrange residual density and converges as O(dt^2) + O(delta^2) for
trajectories produced by the package integrators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import NonFinite
from .fields import DEFAULT_SPECIES, FieldModel, Species, sample
from .fullorbit import FullTrajectory, poisson_matrix
from .gcmotion import GCTrajectory, drift_velocity
from .gyrotransform import to_guiding_center
from .fullorbit import FullState


@dataclass
class GeneralizedSystem:
    """Canonical block of dimension z_dim = 2 g' plus u_dim constrained
    variables; hamiltonian and constraints are functions of (z, u, t)."""

    z_dim: int
    u_dim: int
    hamiltonian: Callable
    constraints: Optional[Callable] = None

    def __post_init__(self):
        if self.z_dim % 2 != 0:
            raise ValueError(f"z_dim must be even, got {self.z_dim}")


@dataclass
class ResidualReport:
    """Hamilton and constraint residuals along a trajectory."""

    hamilton_residual_max: float
    constraint_residual_max: float
    hamilton_series: np.ndarray
    constraint_series: np.ndarray


def _grad_h(fn, z, u, t, h):
    g = np.empty(len(z))
    for j in range(len(z)):
        step = h * max(1.0, abs(z[j]))
        zp = z.copy()
        zm = z.copy()
        zp[j] += step
        zm[j] -= step
        g[j] = (fn(zp, u, t) - fn(zm, u, t)) / (2.0 * step)
    return g


def verify_generalized_canonical(sys: GeneralizedSystem, t, z, u=None,
                                 h: float = 1e-5) -> ResidualReport:
    """Residuals of z_dot = J grad_z K and f_s(z, u, t) = 0 along a
    uniformly sampled trajectory.

    Time derivatives use central differences (interior samples only),
    gradients central differences with relative step h, so the Hamilton
    residual of an exact trajectory is O(dt^2 + h^2).
    """
    t = np.asarray(t, dtype=float)
    z = np.asarray(z, dtype=float)
    n = len(t)
    if n < 3:
        raise ValueError("need at least 3 samples for central differences")
    dts = np.diff(t)
    dt = float(dts[0])
    if not np.allclose(dts, dt, rtol=1e-9, atol=1e-15):
        raise ValueError("verification requires uniform sampling")
    if u is None:
        u = np.zeros((n, 0))
    u = np.asarray(u, dtype=float)

    J = poisson_matrix(sys.z_dim)
    ham_series = np.empty(n - 2)
    for i in range(1, n - 1):
        zdot = (z[i + 1] - z[i - 1]) / (2.0 * dt)
        rhs = J @ _grad_h(sys.hamiltonian, z[i], u[i], t[i], h)
        ham_series[i - 1] = np.max(np.abs(zdot - rhs))
    if not np.all(np.isfinite(ham_series)):
        raise NonFinite("Hamilton residual not finite")

    if sys.constraints is None or sys.u_dim == 0:
        con_series = np.zeros(n)
    else:
        con_series = np.empty(n)
        for i in range(n):
            con_series[i] = np.max(np.abs(sys.constraints(z[i], u[i], t[i])))
        if not np.all(np.isfinite(con_series)):
            raise NonFinite("constraint residual not finite")
    return ResidualReport(
        hamilton_residual_max=float(np.max(ham_series)),
        constraint_residual_max=float(np.max(con_series)),
        hamilton_series=ham_series,
        constraint_series=con_series,
    )


def gyrokinetic_system(model: FieldModel, eps: float,
                       species: Species = DEFAULT_SPECIES) -> GeneralizedSystem:
    """The guiding-center instance: z = (r', phi', p_r', p_phi') with
    canonical pairing, u = v', and the momentum constraint
    f = (p_r' - (q/c) A') / m - v'."""

    def hamiltonian(z, u, t):
        fs = sample(model, z[0:3], t, eps, species)
        pk = z[4:7] - (species.q / species.c) * fs.A
        return (-z[7] * fs.Omega + float(pk @ pk) / (2.0 * species.m)
                + species.q * fs.Phi)

    def constraints(z, u, t):
        fs = sample(model, z[0:3], t, eps, species)
        v_can = (z[4:7] - (species.q / species.c) * fs.A) / species.m
        return v_can - u

    return GeneralizedSystem(z_dim=8, u_dim=3, hamiltonian=hamiltonian,
                             constraints=constraints)


def gc_blocks(traj: GCTrajectory, model: FieldModel, eps: float,
              species: Species = DEFAULT_SPECIES):
    """Export a guiding-center trajectory as (t, z, u) blocks for
    verify_generalized_canonical.

    The u block is the drift form u b + v_E + v_D recomputed from the
    fields, so the verifier's constraint residual reproduces the residual
    recorded by the integrator.
    """
    n = len(traj)
    z = np.empty((n, 8))
    z[:, 0:3] = traj.r
    z[:, 3] = traj.phi
    z[:, 4:7] = traj.p_r
    z[:, 7] = traj.p_phi
    u = np.empty((n, 3))
    for i in range(n):
        fs = sample(model, traj.r[i], traj.t[i], eps, species)
        v_can = (traj.p_r[i] - (species.q / species.c) * fs.A) / species.m
        upar = float(fs.b @ v_can)
        mu = -(species.q / (species.m * species.c)) * traj.p_phi[i]
        u[i] = drift_velocity(fs, upar, mu, species)
    return traj.t, z, u


class DiscreteAction:
    """Trapezoid-rule discrete action over a packed path array Y (n, D).

    Subclasses define lagrangian(y, ydot, t); interval i uses the finite
    difference (Y[i+1] - Y[i]) / dt as the path velocity for both endpoint
    evaluations.
    """

    def lagrangian(self, y, ydot, t):
        raise NotImplementedError

    def interval(self, t, Y, i) -> float:
        dt = t[i + 1] - t[i]
        ydot = (Y[i + 1] - Y[i]) / dt
        return 0.5 * dt * (self.lagrangian(Y[i], ydot, t[i])
                           + self.lagrangian(Y[i + 1], ydot, t[i + 1]))

    def total(self, t, Y) -> float:
        return math.fsum(self.interval(t, Y, i) for i in range(len(t) - 1))


class FullOrbitAction(DiscreteAction):
    """Action of the superabundant point-particle 1-form.

    Path columns [r, p, v] (D = 9);
    L = rdot . p - H(r, p) - (rdot - v) . (p - m v - (q/c) A),
    H = |p - (q/c) A|^2 / (2 m) + q Phi.
    """

    def __init__(self, model: FieldModel, eps: float,
                 species: Species = DEFAULT_SPECIES):
        self.model = model
        self.eps = eps
        self.species = species

    def lagrangian(self, y, ydot, t):
        sp = self.species
        r, p, v = y[0:3], y[3:6], y[6:9]
        fs = sample(self.model, r, t, self.eps, sp)
        qcA = (sp.q / sp.c) * fs.A
        pk = p - qcA
        H = float(pk @ pk) / (2.0 * sp.m) + sp.q * fs.Phi
        bracket = p - sp.m * v - qcA
        rdot = ydot[0:3]
        return float(rdot @ p) - H - float((rdot - v) @ bracket)


class GCAction(DiscreteAction):
    """Action of the constrained guiding-center Lagrangian.

    Path columns [r', p_r', phi', p_phi', v'] (D = 11);
    L = rdot . p_r + phidot p_phi - K - (rdot - v') . (p_r - m v' - (q/c) A').
    """

    def __init__(self, model: FieldModel, eps: float,
                 species: Species = DEFAULT_SPECIES):
        self.model = model
        self.eps = eps
        self.species = species

    def lagrangian(self, y, ydot, t):
        sp = self.species
        r, p_r, phi, p_phi, v = y[0:3], y[3:6], y[6], y[7], y[8:11]
        fs = sample(self.model, r, t, self.eps, sp)
        qcA = (sp.q / sp.c) * fs.A
        pk = p_r - qcA
        K = (-p_phi * fs.Omega + float(pk @ pk) / (2.0 * sp.m)
             + sp.q * fs.Phi)
        bracket = p_r - sp.m * v - qcA
        rdot = ydot[0:3]
        return (float(rdot @ p_r) + ydot[6] * p_phi - K
                - float((rdot - v) @ bracket))


def full_path(traj: FullTrajectory, model: FieldModel, eps: float,
              species: Species = DEFAULT_SPECIES):
    """Pack a full-orbit trajectory as (t, Y) with the canonical momentum
    p = m v + (q/c) A filled in."""
    n = len(traj)
    Y = np.empty((n, 9))
    Y[:, 0:3] = traj.r
    Y[:, 6:9] = traj.v
    for i in range(n):
        fs = sample(model, traj.r[i], traj.t[i], eps, species)
        Y[i, 3:6] = species.m * traj.v[i] + (species.q / species.c) * fs.A
    return traj.t, Y


def gc_path(traj: GCTrajectory):
    """Pack a guiding-center trajectory as (t, Y) for GCAction."""
    n = len(traj)
    Y = np.empty((n, 11))
    Y[:, 0:3] = traj.r
    Y[:, 3:6] = traj.p_r
    Y[:, 6] = traj.phi
    Y[:, 7] = traj.p_phi
    Y[:, 8:11] = traj.v
    return traj.t, Y


def action_full(traj: FullTrajectory, model: FieldModel, eps: float,
                species: Species = DEFAULT_SPECIES) -> float:
    """Discrete action of the point-particle 1-form along a trajectory."""
    t, Y = full_path(traj, model, eps, species)
    return FullOrbitAction(model, eps, species).total(t, Y)


def action_gc(traj: GCTrajectory, model: FieldModel, eps: float,
              species: Species = DEFAULT_SPECIES) -> float:
    """Discrete action of the guiding-center Lagrangian along a trajectory."""
    t, Y = gc_path(traj)
    return GCAction(model, eps, species).total(t, Y)


def el_residual(action: DiscreteAction, t, Y, delta: float = 1e-6,
                node_stride: int = 1,
                components: Optional[Sequence[int]] = None) -> float:
    """First-variation residual of a discrete action.

    Probes hat-function perturbations (peak delta, endpoint-vanishing) at
    interior nodes, every node_stride-th node and every listed component.
    Each probe evaluates |S(+) - S(-)| / (2 delta h) with h the hat's time
    integral, which is the discrete Euler-Lagrange residual density at that
    node; only the two intervals a hat touches are recomputed. Returns the
    maximum over the basis.
    """
    t = np.asarray(t, dtype=float)
    Y = np.array(Y, dtype=float)
    n, D = Y.shape
    if components is None:
        components = range(D)
    worst = 0.0
    for j in range(1, n - 1, node_stride):
        hat_mass = 0.5 * (t[j + 1] - t[j - 1])
        for d in components:
            orig = Y[j, d]
            Y[j, d] = orig + delta
            sp = action.interval(t, Y, j - 1) + action.interval(t, Y, j)
            Y[j, d] = orig - delta
            sm = action.interval(t, Y, j - 1) + action.interval(t, Y, j)
            Y[j, d] = orig
            worst = max(worst, abs(sp - sm) / (2.0 * delta * hat_mass))
    return worst


def pseudo_canonical_map(model: FieldModel, eps: float,
                         species: Species = DEFAULT_SPECIES, t: float = 0.0):
    """The truncated hybrid map (r, p) -> (r', p_r') as a function on R^6
    with coordinates ordered (r, p).

    Dropping the (phi', p_phi', v') block makes this map fail the ordinary
    symplectic condition even though the full superabundant system is
    generalized-canonical; feed it to fullorbit.symplectic_residual to
    measure the defect.
    """

    def map_fn(x):
        r = np.asarray(x[0:3], dtype=float)
        p = np.asarray(x[3:6], dtype=float)
        fs = sample(model, r, t, eps, species)
        v = (p - (species.q / species.c) * fs.A) / species.m
        g = to_guiding_center(FullState(r, v, t), model, eps, species)
        return np.concatenate([g.r, g.p_r])

    return map_fn
