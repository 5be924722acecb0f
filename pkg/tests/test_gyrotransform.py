import math

import numpy as np
import pytest

from gyrokit.errors import NoConvergence, WindowTooCoarse
from gyrokit.fields import ABCFlowField, MagneticMirror, UniformB, sample
from gyrokit.fullorbit import FullState, integrate_full
from gyrokit.gyrotransform import (
    from_guiding_center,
    gc_from_orbit_average,
    gc_scalars,
    gc_state_from_scalars,
    larmor_vector,
    to_guiding_center,
)

TWO_PI = 2.0 * math.pi


def test_larmor_vector_hand_cross_product():
    # -(x_hat x z_hat) = +y_hat
    out = larmor_vector(np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0]),
                        1.0)
    np.testing.assert_allclose(out, [0.0, 1.0, 0.0], atol=1e-15)


def test_larmor_vector_zero_velocity():
    out = larmor_vector(np.zeros(3), np.array([0.0, 0.0, 1.0]), 2.0)
    np.testing.assert_array_equal(out, np.zeros(3))


def test_larmor_vector_perpendicular_to_b():
    rng = np.random.default_rng(2)
    for _ in range(50):
        b = rng.normal(size=3)
        b /= np.linalg.norm(b)
        w = rng.normal(size=3)
        assert abs(larmor_vector(w, b, 1.7) @ b) < 1e-12


def test_uniform_field_closed_form():
    # B_phys = z_hat/eps, v = (w, 0, u): the guiding center sits at
    # (0, -w/Omega, 0) with phi = 0 and mu = m w^2 / (2 B_phys)
    eps = 0.01
    model = UniformB(1.0)
    s = FullState(np.zeros(3), np.array([1.0, 0.0, 0.3]), 0.0)
    g = to_guiding_center(s, model, eps)
    np.testing.assert_allclose(g.r, [0.0, -0.01, 0.0], atol=1e-14)
    assert g.phi == pytest.approx(0.0, abs=1e-14)
    assert g.mu() == pytest.approx(0.005, rel=1e-12)
    assert g.p_phi == pytest.approx(-0.005, rel=1e-12)
    fs = sample(model, g.r, 0.0, eps)
    assert g.u(fs) == pytest.approx(0.3, rel=1e-12)
    assert g.w(fs) == pytest.approx(1.0, rel=1e-12)


def test_purely_parallel_velocity_has_zero_mu():
    model = MagneticMirror(1.0, 1.0)
    eps = 0.05
    r = np.array([0.0, 0.0, 0.1])
    fs = sample(model, r, 0.0, eps)
    s = FullState(r, 0.5 * fs.b, 0.0)
    g = to_guiding_center(s, model, eps)
    assert g.mu() == pytest.approx(0.0, abs=1e-16)
    np.testing.assert_allclose(g.r, r, atol=1e-13)


def test_gyrophase_quadrant():
    # velocity along e2 = y_hat gives phi = pi/2
    eps = 0.02
    s = FullState(np.zeros(3), np.array([0.0, 1.0, 0.0]), 0.0)
    g = to_guiding_center(s, UniformB(1.0), eps)
    assert g.phi == pytest.approx(math.pi / 2, rel=1e-12)


def test_inverse_zero_mu_is_identity():
    model = MagneticMirror(1.0, 1.0)
    g = gc_state_from_scalars(np.array([0.1, 0.0, 0.2]), 0.4, 0.0, 1.0,
                              model, 0.05)
    s = from_guiding_center(g, model, 0.05)
    np.testing.assert_array_equal(s.r, g.r)
    np.testing.assert_array_equal(s.v, g.v)


def test_inverse_periodic_in_phi():
    model = MagneticMirror(1.0, 1.0)
    g1 = gc_state_from_scalars(np.array([0.1, 0.0, 0.2]), 0.4, 0.01, 0.7,
                               model, 0.05)
    g2 = gc_state_from_scalars(np.array([0.1, 0.0, 0.2]), 0.4, 0.01,
                               0.7 + TWO_PI, model, 0.05)
    s1 = from_guiding_center(g1, model, 0.05)
    s2 = from_guiding_center(g2, model, 0.05)
    np.testing.assert_allclose(s1.r, s2.r, atol=1e-12)
    np.testing.assert_allclose(s1.v, s2.v, atol=1e-12)


def test_negative_mu_rejected():
    model = UniformB(1.0)
    with pytest.raises(ValueError):
        gc_state_from_scalars(np.zeros(3), 0.1, -1e-3, 0.0, model, 0.05)


def test_round_trip_bounds(mirror, mirror_state):
    # down-and-back reconstructs the position to the fixed-point tolerance
    # and the velocity up to the first-order drift left in v'
    from gyrokit.gcmotion import v_D

    for eps in (1 / 8, 1 / 16, 1 / 32):
        g = to_guiding_center(mirror_state, mirror, eps)
        s2 = from_guiding_center(g, mirror, eps)
        pos_err = np.linalg.norm(s2.r - mirror_state.r)
        vel_err = np.linalg.norm(s2.v - mirror_state.v)
        w = math.sqrt(float(mirror_state.v @ mirror_state.v))
        assert pos_err <= 1e-10
        assert pos_err <= 2.0 * eps**2
        assert vel_err <= 2.0 * eps * w
        fs = sample(mirror, g.r, 0.0, eps)
        vd = v_D(fs, g.u(fs), g.mu())
        assert vel_err == pytest.approx(np.linalg.norm(vd), rel=1e-9)


def test_gc_round_trip_defect_scales_second_order(mirror, mirror_state):
    # mapping a guiding-center state down to a particle and re-deriving the
    # guiding center shifts it by the first-order velocity truncation;
    # halving eps quarters the position defect
    errs = []
    eps_list = (1 / 8, 1 / 16, 1 / 32, 1 / 64)
    for eps in eps_list:
        g = to_guiding_center(mirror_state, mirror, eps)
        g2 = to_guiding_center(from_guiding_center(g, mirror, eps), mirror,
                               eps)
        errs.append(np.linalg.norm(g2.r - g.r))
    fit = np.polyfit(np.log(eps_list), np.log(errs), 1)
    assert fit[0] == pytest.approx(2.0, abs=0.2)


def test_round_trip_across_models():
    rng = np.random.default_rng(6)
    eps = 0.02
    for model, box in ((MagneticMirror(1.0, 1.0), 0.3),
                       (ABCFlowField(1.0, 1.0, 1.0), None)):
        for _ in range(5):
            if box is None:
                r = rng.uniform(1.0, 2.0, 3)
            else:
                r = rng.uniform(-box, box, 3)
            d = rng.normal(size=3)
            v = 0.5 * d / np.linalg.norm(d)
            s = FullState(r, v, 0.0)
            g = to_guiding_center(s, model, eps)
            s2 = from_guiding_center(g, model, eps)
            assert np.linalg.norm(s2.r - s.r) < 1e-10
            assert np.linalg.norm(s2.v - s.v) < 2.0 * eps * 0.5


def test_frame_rotation_gauge_covariance(mirror):
    s = FullState(np.array([0.15, 0.05, 0.2]), np.array([0.5, 0.3, 0.4]), 0.0)
    eps = 1 / 16
    alpha = 0.7
    g0 = to_guiding_center(s, mirror, eps)
    g1 = to_guiding_center(s, mirror, eps, frame_rotation=alpha)
    assert ((g0.phi - g1.phi) % TWO_PI) == pytest.approx(alpha, abs=1e-12)
    np.testing.assert_array_equal(g0.r, g1.r)
    np.testing.assert_array_equal(g0.p_r, g1.p_r)
    np.testing.assert_array_equal(g0.v, g1.v)
    assert g0.p_phi == g1.p_phi
    # inverse with the same rotated frame recovers the particle bitwise-close
    s1 = from_guiding_center(g1, mirror, eps, frame_rotation=alpha)
    s0 = from_guiding_center(g0, mirror, eps)
    np.testing.assert_allclose(s1.r, s0.r, atol=1e-15)
    np.testing.assert_allclose(s1.v, s0.v, atol=1e-15)


def test_mu_is_deterministic_single_valued():
    model = ABCFlowField(1.0, 1.0, 1.0)
    rng = np.random.default_rng(13)
    for _ in range(20):
        r = rng.uniform(0.5, 2.5, 3)
        d = rng.normal(size=3)
        v = 0.4 * d / np.linalg.norm(d)
        s = FullState(r, v, 0.0)
        mu1 = gc_scalars(s, model, 0.02)[4]
        mu2 = gc_scalars(s, model, 0.02)[4]
        assert mu1 == mu2


def test_no_convergence_at_huge_ordering():
    # the fixed point stops contracting when the Larmor radius is comparable
    # to the field scale
    model = ABCFlowField(1.0, 1.0, 1.0)
    s = FullState(np.array([2.3, 4.0, 1.0]), np.array([0.9, 0.2, 0.1]), 0.0)
    with pytest.raises(NoConvergence):
        to_guiding_center(s, model, 2.0, max_iter=20)


def test_orbit_average_agrees_in_uniform_field():
    eps = 0.02
    model = UniformB(1.0)
    omega = 1.0 / eps
    dt = 0.05 / omega
    s = FullState(np.zeros(3), np.array([0.7, 0.0, 0.3]), 0.0)
    traj = integrate_full(s, 6 * TWO_PI / omega, dt, model, eps,
                          sample_stride=1)
    avg = gc_from_orbit_average(traj, model, eps)
    g = to_guiding_center(s, model, eps)
    mid = len(avg.t) // 2
    # transverse guiding-center position agrees to O(eps^2)
    assert np.linalg.norm(avg.r[mid][:2] - g.r[:2]) < eps**2
    assert avg.mu[mid] == pytest.approx(g.mu(), rel=5.0 * eps)


def test_orbit_average_mu_matches_transform_in_mirror(mirror, mirror_state):
    eps = 1 / 32
    dt = 0.05 / (2.0 / eps)
    traj = integrate_full(mirror_state, 4.0, dt, mirror, eps, sample_stride=1)
    avg = gc_from_orbit_average(traj, mirror, eps)
    g = to_guiding_center(mirror_state, mirror, eps)
    assert abs(avg.mu[0] - g.mu()) / g.mu() < eps


def test_orbit_average_zero_mu_returns_orbit():
    model = UniformB(1.0)
    eps = 0.05
    fs = sample(model, np.zeros(3), 0.0, eps)
    s = FullState(np.zeros(3), 0.4 * fs.b, 0.0)
    omega = 1.0 / eps
    dt = 0.05 / omega
    traj = integrate_full(s, 4 * TWO_PI / omega, dt, model, eps,
                          sample_stride=1)
    avg = gc_from_orbit_average(traj, model, eps)
    for i, t in enumerate(avg.t):
        j = int(round((t - traj.t[0]) / dt))
        np.testing.assert_allclose(avg.r[i], traj.r[j], atol=1e-12)
    np.testing.assert_allclose(avg.mu, 0.0, atol=1e-15)


def test_orbit_average_rejects_coarse_sampling():
    from gyrokit.errors import StepTooLargeWarning

    model = UniformB(1.0)
    eps = 0.05
    omega = 1.0 / eps
    dt = TWO_PI / omega / 8  # 8 samples per gyroperiod: too coarse
    s = FullState(np.zeros(3), np.array([0.5, 0.0, 0.1]), 0.0)
    with pytest.warns(StepTooLargeWarning):
        traj = integrate_full(s, 40 * dt, dt, model, eps, sample_stride=1)
    with pytest.raises(WindowTooCoarse):
        gc_from_orbit_average(traj, model, eps)


def test_state_from_scalars_zero_initial_residual(mirror):
    from gyrokit.fields import sample as fsample
    from gyrokit.gcmotion import canonical_rhs

    g = gc_state_from_scalars(np.array([0.1, 0.05, 0.2]), 0.3, 0.02, 1.1,
                              mirror, 0.05)
    d = canonical_rhs(g, fsample(mirror, g.r, 0.0, 0.05))
    assert np.linalg.norm(d.constraint_residual) < 1e-15
