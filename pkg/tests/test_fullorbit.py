import math

import numpy as np
import pytest

from gyrokit.errors import NonFinite, StepTooLargeWarning
from gyrokit.fields import CrossedEB, MagneticMirror, UniformB, sample
from gyrokit.fullorbit import (
    FullState,
    canonical_momentum,
    energy,
    integrate_full,
    lorentz_rhs,
    poisson_matrix,
    step_boris,
    step_rk4,
    symplectic_residual,
)


def test_lorentz_rhs_pure_magnetic():
    fs = sample(UniformB(1.0), np.zeros(3))
    s = FullState(np.zeros(3), np.array([1.0, 0.0, 0.0]), 0.0)
    drdt, dvdt = lorentz_rhs(s, fs)
    np.testing.assert_array_equal(drdt, s.v)
    np.testing.assert_allclose(dvdt, [0.0, -1.0, 0.0], atol=1e-15)


def test_lorentz_rhs_pure_electric():
    fs = sample(CrossedEB(1.0, 0.1), np.zeros(3))
    s = FullState(np.zeros(3), np.zeros(3), 0.0)
    _, dvdt = lorentz_rhs(s, fs)
    np.testing.assert_allclose(dvdt, [0.1, 0.0, 0.0], atol=1e-15)


def test_crossed_field_mean_drift_is_cEoverB():
    # cycloid from rest: mean velocity over one full gyroperiod equals the
    # electric drift c E x B / B^2 = (0, -c E0/B0, 0)
    eps = 0.1
    model = CrossedEB(1.0, 0.1)
    omega = 1.0 / eps
    T = 2.0 * math.pi / omega
    traj = integrate_full(FullState(np.zeros(3), np.zeros(3), 0.0), T,
                          T / 2000, model, eps, sample_stride=2000)
    v_mean = (traj.r[-1] - traj.r[0]) / T
    np.testing.assert_allclose(v_mean, [0.0, -0.1, 0.0], atol=1e-7)


def test_rk4_gyroperiod_closure():
    eps = 0.05
    w = 0.7
    omega = 1.0 / eps
    T = 2.0 * math.pi / omega
    traj = integrate_full(FullState(np.zeros(3), np.array([w, 0.0, 0.0]), 0.0),
                          T, T / 1000, UniformB(1.0), eps, sample_stride=1000)
    r_larmor = w / omega
    assert np.linalg.norm(traj.r[-1] - traj.r[0]) < 1e-8 * r_larmor


def test_gyroradius_matches_mcw_over_qB():
    eps = 0.05
    w = 0.7
    omega = 1.0 / eps
    T = 2.0 * math.pi / omega
    traj = integrate_full(FullState(np.zeros(3), np.array([w, 0.0, 0.0]), 0.0),
                          T, T / 1000, UniformB(1.0), eps)
    center = traj.r[:-1].mean(axis=0)
    radius = float(np.mean(np.linalg.norm(traj.r[:-1] - center, axis=1)))
    assert radius == pytest.approx(w / omega, rel=1e-6)


def test_rk4_fourth_order_convergence():
    model = UniformB(1.0)
    s = FullState(np.zeros(3), np.array([1.0, 0.0, 0.0]), 0.0)
    T = 2.0 * math.pi
    errs = []
    for n in (200, 400):
        traj = integrate_full(s, T, T / n, model, 1.0, sample_stride=n)
        errs.append(np.linalg.norm(traj.r[-1] - s.r))
    assert errs[0] / errs[1] == pytest.approx(16.0, rel=0.05)


def test_boris_speed_conserved_over_1e6_steps():
    # pure-B rotation preserves |v| by construction; only roundoff remains
    model = UniformB(1.0)
    s = FullState(np.zeros(3), np.array([1.0, 0.0, 0.2]), 0.0)
    dt = 0.05
    traj = integrate_full(s, 1e6 * dt, dt, model, 1.0, scheme="boris",
                          sample_stride=10000)
    v2 = np.sum(traj.v**2, axis=1)
    assert np.max(np.abs(v2 - v2[0])) / v2[0] < 1e-12


def test_rk4_energy_conservation_static_mirror():
    # 1e5 steps; dt*Omega = 0.006 keeps the RK4 amplitude loss below 1e-9
    eps = 1.0 / 16.0
    dt = 0.006 * eps
    model = MagneticMirror(1.0, 1.0)
    s0 = FullState(np.array([0.1, 0.0, 0.0]), np.array([0.6, 0.0, 0.4]), 0.0)
    traj = integrate_full(s0, 1e5 * dt, dt, model, eps, sample_stride=100)
    E = 0.5 * np.sum(traj.v**2, axis=1)
    assert np.max(np.abs(E - E[0])) / E[0] < 1e-9


def test_single_steps_match_integrator():
    model = MagneticMirror(1.0, 1.0)
    eps = 0.1
    s = FullState(np.array([0.1, 0.0, 0.2]), np.array([0.5, 0.1, 0.4]), 0.0)
    traj = integrate_full(s, 3e-3, 1e-3, model, eps)
    s_steps = s
    for _ in range(3):
        s_steps = step_rk4(s_steps, 1e-3, model, eps)
    np.testing.assert_array_equal(s_steps.r, traj.r[-1])
    np.testing.assert_array_equal(s_steps.v, traj.v[-1])


def test_boris_step_runs_and_kicks():
    model = CrossedEB(1.0, 0.1)
    s = FullState(np.zeros(3), np.zeros(3), 0.0)
    s1 = step_boris(s, 1e-3, model, 1.0)
    assert s1.v[0] > 0.0  # accelerated along E


def test_step_too_large_warns():
    model = UniformB(1.0)
    s = FullState(np.zeros(3), np.array([1.0, 0.0, 0.0]), 0.0)
    with pytest.warns(StepTooLargeWarning):
        step_rk4(s, 0.6, model, 1.0)


def test_energy_and_momentum_helpers():
    model = CrossedEB(1.0, 0.1)
    fs = sample(model, np.array([0.3, 0.0, 0.0]), 0.0, 1.0)
    s = FullState(np.array([0.3, 0.0, 0.0]), np.array([0.2, 0.0, 0.0]), 0.0)
    assert energy(s, fs) == pytest.approx(0.5 * 0.04 + (-0.1 * 0.3))
    np.testing.assert_allclose(canonical_momentum(s, fs),
                               s.v + fs.A, atol=1e-15)


def test_symplectic_residual_identity_map():
    rep = symplectic_residual(lambda x: x, np.array([0.1, 0.2, 0.3, 0.4]))
    assert rep.symplectic_residual == 0.0


def test_symplectic_residual_scaled_map():
    # (q, p) -> (2q, p): M J M^T - J has max entry 1
    rep = symplectic_residual(lambda x: np.array([2.0 * x[0], x[1]]),
                              np.array([0.3, -0.2]))
    assert rep.symplectic_residual == pytest.approx(1.0, rel=1e-8)


def test_symplectic_residual_of_hamiltonian_flow():
    # exact time-T flow in uniform B is canonical; residual at the
    # finite-difference floor
    model = UniformB(1.0)

    def flow(x):
        fs = sample(model, x[0:3], 0.0, 1.0)
        s = FullState(x[0:3], x[3:6] - fs.A, 0.0)
        traj = integrate_full(s, 1.0, 1e-3, model, 1.0, sample_stride=1000)
        st = traj.state(len(traj) - 1)
        fs2 = sample(model, st.r, st.t, 1.0)
        return np.concatenate([st.r, st.v + fs2.A])

    rep = symplectic_residual(flow, np.array([0.1, 0.2, 0.0, 0.3, 0.1, 0.2]))
    assert rep.symplectic_residual < 1e-8


def test_symplectic_residual_divergent_map_raises():
    with np.errstate(divide="ignore", invalid="ignore"):
        with pytest.raises(NonFinite):
            symplectic_residual(lambda x: x / 0.0, np.array([1.0, 1.0]))


def test_poisson_matrix_structure():
    J = poisson_matrix(4)
    np.testing.assert_array_equal(J @ J, -np.eye(4))
    with pytest.raises(ValueError):
        poisson_matrix(3)


def test_integrate_rejects_bad_inputs():
    model = UniformB(1.0)
    s = FullState(np.zeros(3), np.array([1.0, 0.0, 0.0]), 0.0)
    with pytest.raises(ValueError):
        integrate_full(s, 1.0, -0.1, model, 1.0)
    with pytest.raises(ValueError):
        integrate_full(s, 1.0, 0.1, model, 1.0, scheme="euler")
