"""Forward and inverse transformation between full-orbit states and the
superabundant guiding-center state (r', p_r', phi', p_phi', v').

Conventions, with all field quantities physical (1/eps scaled):

* Larmor vector  rho = -(w x b) / Omega, so the guiding center sits at
  r' = r - rho and the particle at r = r' + rho.
* Perpendicular velocity w is measured relative to the local E-cross-B
  drift: w_vec = v - v_E - u b with u = b . v. The first-order drift v_D is
  deliberately not subtracted here; it enters v' instead, and the resulting
  O(eps) mismatch between v and v' + w_vec is the accepted first-order
  truncation.
* Gyrophase phi' = atan2((v - v_E) . e2, (v - v_E) . e1) in [0, 2 pi),
  quadrant-correct.
* Magnetic moment mu = m w^2 / (2 B_phys) and p_phi = -(m c / q) mu. The
  dimensionless-mass shorthand w = sqrt(2 B mu) holds only for m = 1; the
  mass factor is kept explicit everywhere.

All primed quantities are evaluated at r', which is found by fixed-point
iteration r'_{k+1} = r - rho(r'_k). The map is a contraction for moderate
orderings (eps below roughly 0.3 at desk scale); hitting the iteration cap
raises NoConvergence rather than returning an inaccurate state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NoConvergence, WindowTooCoarse
from .fields import (
    DEFAULT_SPECIES,
    LENGTH_UNIT,
    FieldModel,
    Species,
    _cross,
    sample,
)
from .fullorbit import FullState, FullTrajectory

TWO_PI = 2.0 * math.pi


@dataclass
class GCState:
    """Superabundant guiding-center state (r', p_r', phi', p_phi', v')."""

    r: np.ndarray
    p_r: np.ndarray
    phi: float
    p_phi: float
    v: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.p_r = np.asarray(self.p_r, dtype=float)
        self.v = np.asarray(self.v, dtype=float)

    def mu(self, species: Species = DEFAULT_SPECIES) -> float:
        """Magnetic moment, -(q / m c) p_phi."""
        return -(species.q / (species.m * species.c)) * self.p_phi

    def u(self, field) -> float:
        """Parallel velocity b . v'."""
        return float(field.b @ self.v)

    def w(self, field, species: Species = DEFAULT_SPECIES) -> float:
        """Perpendicular speed sqrt(2 B_phys mu / m)."""
        return math.sqrt(2.0 * field.Bmag * self.mu(species) / species.m)


def larmor_vector(w_vec, b, omega: float) -> np.ndarray:
    """Larmor offset -(w_vec x b) / omega, perpendicular to b."""
    return -_cross(w_vec, b) / omega


def _rotated_frame(field, alpha: float):
    if alpha == 0.0:
        return field.e1, field.e2
    ca, sa = math.cos(alpha), math.sin(alpha)
    return ca * field.e1 + sa * field.e2, -sa * field.e1 + ca * field.e2


def _local_vE(field, species):
    return species.c * _cross(field.E, field.b) / field.Bmag


def _converge_guiding_center(r, v, t, model, eps, species, tol, max_iter):
    """Fixed-point iteration r'_{k+1} = r - rho(r'_k); returns the converged
    field sample together with (u, v_E, w_vec) evaluated there."""
    rp = np.asarray(r, dtype=float)
    for _ in range(max_iter):
        fs = sample(model, rp, t, eps, species)
        vE = _local_vE(fs, species)
        u = float(fs.b @ v)
        w_vec = v - vE - u * fs.b
        rp_new = r - larmor_vector(w_vec, fs.b, fs.Omega)
        delta = rp_new - rp
        rp = rp_new
        if math.sqrt(float(delta @ delta)) < tol * LENGTH_UNIT:
            fs = sample(model, rp, t, eps, species)
            vE = _local_vE(fs, species)
            u = float(fs.b @ v)
            w_vec = v - vE - u * fs.b
            return fs, u, vE, w_vec
    raise NoConvergence(
        f"guiding-center fixed point did not converge in {max_iter} "
        f"iterations at eps = {eps} (asymptotic ordering too large?)"
    )


def gc_scalars(s: FullState, model: FieldModel, eps: float,
               species: Species = DEFAULT_SPECIES, *,
               frame_rotation: float = 0.0, tol: float = 1e-12,
               max_iter: int = 50):
    """Cheap core of the forward transformation.

    Returns (r_gc, u, w, phi, mu) without evaluating drifts or momenta; used
    by diagnostics that only need the magnetic moment series.
    """
    fs, u, vE, w_vec = _converge_guiding_center(
        s.r, s.v, s.t, model, eps, species, tol, max_iter
    )
    e1, e2 = _rotated_frame(fs, frame_rotation)
    w = math.sqrt(float(w_vec @ w_vec))
    rel = s.v - vE
    phi = math.atan2(float(rel @ e2), float(rel @ e1)) % TWO_PI
    mu = species.m * w * w / (2.0 * fs.Bmag)
    return fs.r, u, w, phi, mu


def to_guiding_center(s: FullState, model: FieldModel, eps: float,
                      species: Species = DEFAULT_SPECIES, *,
                      frame_rotation: float = 0.0, tol: float = 1e-12,
                      max_iter: int = 50) -> GCState:
    """Forward transformation: full-orbit state to guiding-center state.

    All primed quantities are evaluated at the converged r'. The returned
    state satisfies the momentum constraint p_r' = m v' + (q/c) A'_phys
    exactly, with v' = u b' + v_E' + v_D'.
    """
    from .gcmotion import v_D

    fs, u, vE, w_vec = _converge_guiding_center(
        s.r, s.v, s.t, model, eps, species, tol, max_iter
    )
    e1, e2 = _rotated_frame(fs, frame_rotation)
    w = math.sqrt(float(w_vec @ w_vec))
    rel = s.v - vE
    phi = math.atan2(float(rel @ e2), float(rel @ e1)) % TWO_PI
    mu = species.m * w * w / (2.0 * fs.Bmag)
    p_phi = -(species.m * species.c / species.q) * mu
    v_gc = u * fs.b + vE + v_D(fs, u, mu, species)
    p_r = species.m * v_gc + (species.q / species.c) * fs.A
    return GCState(fs.r, p_r, phi, p_phi, v_gc, s.t)


def from_guiding_center(g: GCState, model: FieldModel, eps: float,
                        species: Species = DEFAULT_SPECIES, *,
                        frame_rotation: float = 0.0) -> FullState:
    """Inverse transformation: r = r' + rho', v = v' + w_vec.

    Everything is evaluated at the stored r', so no iteration is needed.
    """
    mu = g.mu(species)
    if mu < 0.0:
        raise ValueError(f"magnetic moment must be nonnegative, got {mu}")
    fs = sample(model, g.r, g.t, eps, species)
    e1, e2 = _rotated_frame(fs, frame_rotation)
    w = math.sqrt(2.0 * fs.Bmag * mu / species.m)
    phi = g.phi % TWO_PI
    w_vec = w * (math.cos(phi) * e1 + math.sin(phi) * e2)
    rho = larmor_vector(w_vec, fs.b, fs.Omega)
    return FullState(g.r + rho, g.v + w_vec, g.t)


def gc_state_from_scalars(r_gc, u: float, mu: float, phi: float,
                          model: FieldModel, eps: float,
                          species: Species = DEFAULT_SPECIES,
                          t: float = 0.0) -> GCState:
    """Build a consistent guiding-center state from (r', u', mu', phi').

    v' is assembled from the drift expressions and p_r' from the momentum
    constraint, so the returned state starts with zero constraint residual.
    """
    from .gcmotion import v_D

    if mu < 0.0:
        raise ValueError(f"magnetic moment must be nonnegative, got {mu}")
    fs = sample(model, r_gc, t, eps, species)
    vE = _local_vE(fs, species)
    v_gc = u * fs.b + vE + v_D(fs, u, mu, species)
    p_r = species.m * v_gc + (species.q / species.c) * fs.A
    p_phi = -(species.m * species.c / species.q) * mu
    return GCState(np.asarray(r_gc, dtype=float), p_r, phi % TWO_PI, p_phi,
                   v_gc, t)


@dataclass
class OrbitAverageSeries:
    """Gyro-averaged guiding-center estimate from a dense full orbit."""

    t: np.ndarray
    r: np.ndarray
    mu: np.ndarray


def gc_from_orbit_average(traj: FullTrajectory, model: FieldModel, eps: float,
                          species: Species = DEFAULT_SPECIES
                          ) -> OrbitAverageSeries:
    """Independent guiding-center estimate: sliding average of the exact
    orbit over one local gyroperiod, with mu = m <|v - <v>|^2> / (2 B_phys).

    The trajectory must be uniformly sampled with at least 32 points per
    gyroperiod; indices whose window does not fit inside the series are
    dropped.
    """
    t = traj.t
    if len(t) < 3:
        raise ValueError("trajectory too short for gyro-averaging")
    dts = np.diff(t)
    dt = float(dts[0])
    if not np.allclose(dts, dt, rtol=1e-9, atol=1e-15):
        raise ValueError("gyro-averaging requires uniform sampling")

    n = len(t)
    cr = np.vstack([np.zeros(3), np.cumsum(traj.r, axis=0)])
    cv = np.vstack([np.zeros(3), np.cumsum(traj.v, axis=0)])
    cv2 = np.concatenate([[0.0], np.cumsum(np.sum(traj.v**2, axis=1))])

    out_t, out_r, out_mu = [], [], []
    qmc = abs(species.q) / (species.m * species.c)
    for i in range(n):
        B_ref = model.B(traj.r[i], t[i])
        omega = qmc * math.sqrt(float(B_ref @ B_ref)) / eps
        period = TWO_PI / omega
        if period / dt < 32.0:
            raise WindowTooCoarse(
                f"{period / dt:.1f} samples per gyroperiod at index {i}; "
                "need at least 32"
            )
        half = int(round(period / (2.0 * dt)))
        lo, hi = i - half, i + half + 1
        if lo < 0 or hi > n:
            continue
        nw = hi - lo
        mean_r = (cr[hi] - cr[lo]) / nw
        mean_v = (cv[hi] - cv[lo]) / nw
        var_v = (cv2[hi] - cv2[lo]) / nw - float(mean_v @ mean_v)
        B_at = model.B(mean_r, t[i])
        Bmag_phys = math.sqrt(float(B_at @ B_at)) / eps
        out_t.append(t[i])
        out_r.append(mean_r)
        out_mu.append(species.m * max(var_v, 0.0) / (2.0 * Bmag_phys))
    if not out_t:
        raise ValueError("no index had a full gyroperiod window inside the "
                         "trajectory")
    return OrbitAverageSeries(np.array(out_t), np.array(out_r),
                              np.array(out_mu))
