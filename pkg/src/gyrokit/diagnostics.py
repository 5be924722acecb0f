"""Quantitative verification of the physics claims: adiabatic-invariance
scaling, single-valuedness of the magnetic moment, conservation ledgers, and
ordering-parameter scans with log-log slope fits.

Every O(eps^n) statement in the package is realized here as a measurable
slope: a scan runs the same scenario over a ladder of eps values (orderings
are produced by scaling the field amplitude while the particle speed stays
fixed) and fits ln(metric) against ln(eps) by least squares. Scans are
deterministic given scenario and seed.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import FitDegenerate, NoConvergence, ZeroMu
from .fields import DEFAULT_SPECIES, FieldModel, Species, sample
from .fullorbit import FullState, FullTrajectory, _rk4_step, integrate_full
from .gcmotion import GCTrajectory, hamiltonian_K, integrate_gc, speed_scale
from .gyrotransform import (
    TWO_PI,
    from_guiding_center,
    gc_from_orbit_average,
    gc_scalars,
    to_guiding_center,
)

MIN_GYROPERIODS = 50.0
FLOOR = 1e-14


@dataclass
class ScanResult:
    """Metric values over a strictly decreasing eps ladder with the fitted
    log-log slope and its standard error."""

    eps_values: np.ndarray
    metric_values: np.ndarray
    loglog_slope: float
    slope_stderr: float


def loglog_fit(x, y):
    """Least-squares slope of ln y vs ln x with its standard error."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    n = len(lx)
    A = np.vstack([lx, np.ones(n)]).T
    coef, res, _, _ = np.linalg.lstsq(A, ly, rcond=None)
    slope = float(coef[0])
    if n > 2 and res.size:
        s2 = float(res[0]) / (n - 2)
        stderr = math.sqrt(s2 / float(np.sum((lx - lx.mean()) ** 2)))
    else:
        stderr = 0.0
    return slope, stderr


def _initial_omega(traj: FullTrajectory, model, eps, species) -> float:
    B = model.B(traj.r[0], traj.t[0])
    return abs(species.q) * math.sqrt(float(B @ B)) / (eps * species.m * species.c)


def mu_series(traj: FullTrajectory, model: FieldModel, eps: float,
              species: Species = DEFAULT_SPECIES):
    """Magnetic moment along a full orbit via the forward transformation."""
    mus = np.empty(len(traj))
    for i in range(len(traj)):
        _, _, _, _, mus[i] = gc_scalars(traj.state(i), model, eps, species)
    return traj.t, mus


def mu_drift(traj: FullTrajectory, model: FieldModel, eps: float,
             species: Species = DEFAULT_SPECIES) -> float:
    """Max relative excursion of mu along a full orbit.

    The maximum (not the endpoint difference) is used so bounce-phase
    aliasing cannot hide a drift. The trajectory must span at least 50
    gyroperiods of the initial field.
    """
    span = float(traj.t[-1] - traj.t[0])
    omega0 = _initial_omega(traj, model, eps, species)
    if span * omega0 / TWO_PI < MIN_GYROPERIODS:
        raise ValueError(
            f"trajectory spans {span * omega0 / TWO_PI:.1f} gyroperiods; "
            f"need at least {MIN_GYROPERIODS}"
        )
    _, mus = mu_series(traj, model, eps, species)
    if mus[0] < 1e-14:
        raise ZeroMu(f"mu(0) = {mus[0]:.3e} too small for a relative drift")
    return float(np.max(np.abs(mus - mus[0])) / mus[0])


def conservation_ledger(traj, model: FieldModel, eps: float,
                        species: Species = DEFAULT_SPECIES) -> dict:
    """Relative drifts of the exact and adiabatic invariants.

    Full-orbit trajectories report energy and mu drifts; guiding-center
    trajectories report K, p_phi (exactly constant by construction), and mu
    (proportional to p_phi) drifts. Assumes static fields.
    """
    if isinstance(traj, GCTrajectory):
        K = np.array([
            hamiltonian_K(traj.state(i),
                          sample(model, traj.r[i], traj.t[i], eps, species),
                          species)
            for i in range(len(traj))
        ])
        p_phi_drift = float(np.max(np.abs(traj.p_phi - traj.p_phi[0])))
        return {
            "kind": "gc",
            "K_drift": float(np.max(np.abs(K - K[0])) / abs(K[0])),
            "p_phi_drift": p_phi_drift,
            "mu_drift": (abs(species.q / (species.m * species.c))
                         * p_phi_drift),
        }
    E = np.empty(len(traj))
    for i in range(len(traj)):
        fs = sample(model, traj.r[i], traj.t[i], eps, species)
        E[i] = (0.5 * species.m * float(traj.v[i] @ traj.v[i])
                + species.q * fs.Phi)
    _, mus = mu_series(traj, model, eps, species)
    return {
        "kind": "full",
        "energy_drift": float(np.max(np.abs(E - E[0])) / abs(E[0])),
        "mu_drift": float(np.max(np.abs(mus - mus[0])) / mus[0]),
    }


@dataclass
class ProbeReport:
    """Single-valuedness probe over seeded pseudo-random states."""

    n_states: int
    n_converged: int
    convergence_rate: float
    max_same_state_discrepancy: float
    max_excursion_discrepancy: float
    n_excursions: int


def single_valuedness_probe(model: FieldModel, eps: float, n_states: int,
                            seed: int, species: Species = DEFAULT_SPECIES,
                            box=(0.0, TWO_PI), speed=(0.2, 0.6),
                            n_excursions: int = 64,
                            excursion_steps: int = 64) -> ProbeReport:
    """Check that mu is a single-valued function of the full state.

    Draws seeded pseudo-random states, evaluates mu twice through
    independent call paths (a repeated direct transformation, and a
    transformation after an integrate-forward-then-backward excursion that
    returns to the start within the integrator's reversibility budget), and
    reports the worst discrepancies plus the transformation convergence
    rate. NoConvergence is aggregated, not raised.
    """
    if n_states < 100:
        raise ValueError(f"need at least 100 states, got {n_states}")
    rng = np.random.default_rng(seed)
    lo, hi = box
    n_conv = 0
    max_same = 0.0
    max_exc = 0.0
    n_exc_done = 0
    for k in range(n_states):
        r = rng.uniform(lo, hi, size=3)
        d = rng.normal(size=3)
        d /= math.sqrt(float(d @ d))
        v = rng.uniform(speed[0], speed[1]) * d
        s = FullState(r, v, 0.0)
        try:
            mu1 = gc_scalars(s, model, eps, species)[4]
        except NoConvergence:
            continue
        n_conv += 1
        mu2 = gc_scalars(s, model, eps, species)[4]
        max_same = max(max_same, abs(mu2 - mu1))
        if n_exc_done < n_excursions:
            B = model.B(r, 0.0)
            omega = (abs(species.q) * math.sqrt(float(B @ B))
                     / (eps * species.m * species.c))
            dt = 0.05 / omega
            # forward n steps, then the same n steps with -dt; RK4 is not
            # time-symmetric, so the return state differs from the start by
            # the reversibility budget rather than exactly
            r_e, v_e, t_e = s.r.copy(), s.v.copy(), s.t
            for i in range(excursion_steps):
                r_e, v_e = _rk4_step(model, eps, species, r_e, v_e,
                                     t_e + i * dt, dt)
            for i in range(excursion_steps):
                r_e, v_e = _rk4_step(model, eps, species, r_e, v_e,
                                     t_e + (excursion_steps - i) * dt, -dt)
            try:
                mu3 = gc_scalars(FullState(r_e, v_e, t_e), model, eps,
                                 species)[4]
                max_exc = max(max_exc, abs(mu3 - mu1))
                n_exc_done += 1
            except NoConvergence:
                pass
    return ProbeReport(
        n_states=n_states,
        n_converged=n_conv,
        convergence_rate=n_conv / n_states,
        max_same_state_discrepancy=max_same,
        max_excursion_discrepancy=max_exc,
        n_excursions=n_exc_done,
    )


def scan(metric, eps_list, jobs: int = 1) -> ScanResult:
    """Run a metric over an eps ladder and fit the log-log slope.

    eps_list must be strictly decreasing with at least 3 entries. Raises
    FitDegenerate if any metric value is at or below the 1e-14 floor (the
    fit would measure floating-point noise). metric must be a top-level
    callable for jobs > 1 (process pool); scan points are independent and
    results are gathered by eps index either way.
    """
    eps_arr = np.asarray(list(eps_list), dtype=float)
    if len(eps_arr) < 3:
        raise ValueError("need at least 3 eps values")
    if not np.all(np.diff(eps_arr) < 0):
        raise ValueError("eps values must be strictly decreasing")
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            vals = list(pool.map(metric, eps_arr))
    else:
        vals = [metric(e) for e in eps_arr]
    vals = np.asarray(vals, dtype=float)
    if np.any(vals <= FLOOR):
        raise FitDegenerate(
            f"metric values {vals} include entries at the {FLOOR} floor"
        )
    slope, stderr = loglog_fit(eps_arr, vals)
    return ScanResult(eps_values=eps_arr, metric_values=vals,
                      loglog_slope=slope, slope_stderr=stderr)


# --------------------------------------------------------------------------
# Named scan scenarios. Each builder binds a model and a reference full
# state and returns metric(eps); dt rules scale with eps so the gyration
# stays resolved while the physical integration time stays fixed.
# --------------------------------------------------------------------------


def _omega_scale(species: Species, b_max: float, eps: float) -> float:
    return abs(species.q) * b_max / (species.m * species.c * eps)


class MuDriftMetric:
    """Max relative mu excursion over a fixed physical time."""

    def __init__(self, model, s0: FullState, species=DEFAULT_SPECIES,
                 t_end=40.0, dt_omega=0.05, b_max=3.0, samples_per_gyro=8.0):
        self.model = model
        self.s0 = s0
        self.species = species
        self.t_end = t_end
        self.dt_omega = dt_omega
        self.b_max = b_max
        self.samples_per_gyro = samples_per_gyro

    def __call__(self, eps: float) -> float:
        omega_max = _omega_scale(self.species, self.b_max, eps)
        dt = self.dt_omega / omega_max
        stride = max(1, int(round(
            TWO_PI / (omega_max * dt * self.samples_per_gyro))))
        traj = integrate_full(self.s0, self.t_end, dt, self.model, eps,
                              self.species, sample_stride=stride)
        return mu_drift(traj, self.model, eps, self.species)


class RoundTripMetric:
    """Guiding-center position defect of the transform pair.

    A state is mapped down to a particle and back up; the first-order
    velocity truncation shifts the re-derived guiding center by O(eps^2).
    States are seeded jitters of the reference state.
    """

    def __init__(self, model, s0: FullState, species=DEFAULT_SPECIES,
                 n_states=12, seed=7, jitter=0.15):
        rng = np.random.default_rng(seed)
        self.model = model
        self.species = species
        self.states = []
        for _ in range(n_states):
            r = s0.r + rng.uniform(-jitter, jitter, size=3)
            d = rng.normal(size=3)
            d /= math.sqrt(float(d @ d))
            speed = math.sqrt(float(s0.v @ s0.v))
            self.states.append(FullState(r, speed * d, s0.t))

    def __call__(self, eps: float) -> float:
        worst = 0.0
        for s in self.states:
            g = to_guiding_center(s, self.model, eps, self.species)
            s2 = from_guiding_center(g, self.model, eps, self.species)
            g2 = to_guiding_center(s2, self.model, eps, self.species)
            d = g2.r - g.r
            worst = max(worst, math.sqrt(float(d @ d)))
        return worst


class ConstraintResidualMetric:
    """Max relative drift-form residual along a guiding-center run."""

    def __init__(self, model, s0: FullState, species=DEFAULT_SPECIES,
                 t_end=8.0, dt_omega=0.4, b_max=2.0, sample_stride=4):
        self.model = model
        self.s0 = s0
        self.species = species
        self.t_end = t_end
        self.dt_omega = dt_omega
        self.b_max = b_max
        self.sample_stride = sample_stride

    def __call__(self, eps: float) -> float:
        g0 = to_guiding_center(self.s0, self.model, eps, self.species)
        dt = self.dt_omega / _omega_scale(self.species, self.b_max, eps)
        traj = integrate_gc(g0, self.t_end, dt, self.model, eps, self.species,
                            sample_stride=self.sample_stride)
        fs0 = sample(self.model, g0.r, g0.t, eps, self.species)
        scale = speed_scale(g0, fs0, self.species)
        return float(np.max(traj.residual) / scale)


class GCTrackingMetric:
    """Distance between the canonical guiding-center trajectory and the
    gyro-averaged exact orbit over a fixed physical time."""

    def __init__(self, model, s0: FullState, species=DEFAULT_SPECIES,
                 t_end=8.0, dt_omega=0.05, b_max=2.0, gc_dt_omega=0.25):
        self.model = model
        self.s0 = s0
        self.species = species
        self.t_end = t_end
        self.dt_omega = dt_omega
        self.b_max = b_max
        self.gc_dt_omega = gc_dt_omega

    def __call__(self, eps: float) -> float:
        omega_max = _omega_scale(self.species, self.b_max, eps)
        dt = self.dt_omega / omega_max
        full = integrate_full(self.s0, self.t_end, dt, self.model, eps,
                              self.species, sample_stride=1)
        avg = gc_from_orbit_average(full, self.model, eps, self.species)
        g0 = to_guiding_center(self.s0, self.model, eps, self.species)
        dt_gc = self.gc_dt_omega / omega_max
        gc = integrate_gc(g0, self.t_end, dt_gc, self.model, eps,
                          self.species)
        r_gc = np.column_stack([
            np.interp(avg.t, gc.t, gc.r[:, k]) for k in range(3)
        ])
        return float(np.max(np.sqrt(np.sum((r_gc - avg.r) ** 2, axis=1))))


METRIC_BUILDERS = {
    "mu_drift": MuDriftMetric,
    "round_trip_position": RoundTripMetric,
    "constraint_residual": ConstraintResidualMetric,
    "gc_tracking": GCTrackingMetric,
}


def build_metric(name: str, model: FieldModel, s0: FullState,
                 species: Species = DEFAULT_SPECIES, **options):
    """Instantiate a named scan metric bound to a model and reference state."""
    if name not in METRIC_BUILDERS:
        raise KeyError(
            f"unknown scan metric {name!r}; known: {sorted(METRIC_BUILDERS)}"
        )
    return METRIC_BUILDERS[name](model, s0, species, **options)
