import math

import numpy as np
import pytest

from gyrokit.canonchecks import (
    FullOrbitAction,
    GCAction,
    GeneralizedSystem,
    el_residual,
    full_path,
    gc_blocks,
    gc_path,
    gyrokinetic_system,
    pseudo_canonical_map,
    verify_generalized_canonical,
)
from gyrokit.fields import MagneticMirror, UniformB, sample
from gyrokit.fullorbit import FullState, integrate_full, symplectic_residual
from gyrokit.gcmotion import integrate_gc
from gyrokit.gyrotransform import to_guiding_center


def _harmonic_system():
    return GeneralizedSystem(2, 0, lambda z, u, t: 0.5 * (z[0] ** 2 + z[1] ** 2))


def test_harmonic_oscillator_residual_second_order():
    # exact solution sampled at dt: residual dominated by the dt^2/6 term of
    # the central time difference
    for n, bound in ((1001, None), (2001, None)):
        t = np.linspace(0.0, 10.0, n)
        dt = t[1] - t[0]
        z = np.column_stack([np.cos(t), -np.sin(t)])
        rep = verify_generalized_canonical(_harmonic_system(), t, z)
        assert rep.hamilton_residual_max == pytest.approx(dt**2 / 6.0, rel=0.05)
    assert rep.constraint_residual_max == 0.0


def test_corrupted_trajectory_detected():
    t = np.linspace(0.0, 10.0, 2001)
    z = np.column_stack([np.cos(t), -np.sin(t)])
    clean = verify_generalized_canonical(_harmonic_system(), t, z)
    zc = z.copy()
    zc[:, 1] *= 1.01
    bad = verify_generalized_canonical(_harmonic_system(), t, zc)
    assert bad.hamilton_residual_max > 100.0 * clean.hamilton_residual_max


def test_gyrokinetic_blocks_consistent_with_recorded_residual(
        mirror, mirror_state):
    eps = 1 / 16
    g0 = to_guiding_center(mirror_state, mirror, eps)
    traj = integrate_gc(g0, 1.0, 1e-3, mirror, eps)
    t, z, u = gc_blocks(traj, mirror, eps)
    rep = verify_generalized_canonical(gyrokinetic_system(mirror, eps), t, z, u)
    # the verifier's pointwise constraint residual is the max component of
    # the same vector whose norm the integrator recorded
    assert rep.constraint_residual_max <= np.max(traj.residual) * (1 + 1e-9)
    assert rep.constraint_residual_max >= np.max(traj.residual) / math.sqrt(3)
    # Hamilton residual at the central-difference floor for this dt
    assert rep.hamilton_residual_max < 1e-5


def test_gyrokinetic_hamilton_residual_halves_as_dt_squared(
        mirror, mirror_state):
    eps = 1 / 16
    g0 = to_guiding_center(mirror_state, mirror, eps)
    sys_gc = gyrokinetic_system(mirror, eps)
    res = {}
    for dt in (2e-3, 1e-3):
        traj = integrate_gc(g0, 1.0, dt, mirror, eps)
        t, z, u = gc_blocks(traj, mirror, eps)
        res[dt] = verify_generalized_canonical(sys_gc, t, z, u)
    ratio = res[2e-3].hamilton_residual_max / res[1e-3].hamilton_residual_max
    assert ratio == pytest.approx(4.0, abs=1.0)
    # the constraint residual is a physical band, not a discretization error
    con_ratio = (res[2e-3].constraint_residual_max
                 / res[1e-3].constraint_residual_max)
    assert con_ratio == pytest.approx(1.0, abs=0.05)


def test_verify_requires_uniform_sampling():
    t = np.array([0.0, 0.1, 0.3])
    z = np.zeros((3, 2))
    with pytest.raises(ValueError):
        verify_generalized_canonical(_harmonic_system(), t, z)


def test_generalized_system_rejects_odd_dimension():
    with pytest.raises(ValueError):
        GeneralizedSystem(3, 0, lambda z, u, t: 0.0)


def test_free_motion_action_is_extremal():
    # straight line along b in a uniform field is an exact orbit: the
    # variation residual sits at the quadrature floor
    model = UniformB(1.0)
    n = 500
    t = np.linspace(0.0, 0.5, n)
    v = np.array([0.0, 0.0, 0.4])
    Y = np.zeros((n, 9))
    Y[:, 0:3] = np.outer(t, v)
    Y[:, 6:9] = v
    for i in range(n):
        fs = sample(model, Y[i, 0:3], t[i], 1.0)
        Y[i, 3:6] = Y[i, 6:9] + fs.A
    act = FullOrbitAction(model, 1.0)
    assert el_residual(act, t, Y, node_stride=13) < 1e-10


def test_full_orbit_action_residual_second_order(mirror, mirror_state):
    eps = 1 / 16
    act = FullOrbitAction(mirror, eps)
    res = []
    for dt in (2e-3, 1e-3):
        traj = integrate_full(mirror_state, 0.5, dt, mirror, eps,
                              sample_stride=1)
        t, Y = full_path(traj, mirror, eps)
        res.append(el_residual(act, t, Y, node_stride=7))
    assert res[0] / res[1] == pytest.approx(4.0, abs=1.0)


def test_gc_action_residual_second_order(mirror, mirror_state):
    eps = 1 / 16
    g0 = to_guiding_center(mirror_state, mirror, eps)
    act = GCAction(mirror, eps)
    res = []
    for dt in (4e-3, 2e-3):
        traj = integrate_gc(g0, 1.0, dt, mirror, eps)
        t, Y = gc_path(traj)
        res.append(el_residual(act, t, Y, node_stride=7))
    assert res[0] / res[1] == pytest.approx(4.0, abs=1.0)


def test_non_extremal_path_residual_does_not_converge(mirror, mirror_state):
    # straight line through the inhomogeneous field with the Lorentz force
    # unbalanced: residual stays O(1) under refinement
    eps = 1 / 16
    act = FullOrbitAction(mirror, eps)
    res = []
    for n in (200, 400):
        t = np.linspace(0.0, 0.5, n)
        Y = np.zeros((n, 9))
        Y[:, 0:3] = mirror_state.r + np.outer(t, mirror_state.v)
        Y[:, 6:9] = mirror_state.v
        for i in range(n):
            fs = sample(mirror, Y[i, 0:3], t[i], eps)
            Y[i, 3:6] = mirror_state.v + fs.A
        res.append(el_residual(act, t, Y, node_stride=7))
    assert res[0] > 1.0
    assert res[1] > 0.5 * res[0]


def test_truncated_map_is_not_symplectic(mirror):
    # dropping the gyrophase pair and the velocity block from the
    # superabundant state leaves a map that fails the ordinary symplectic
    # condition by an O(1) margin
    eps = 0.1
    map_fn = pseudo_canonical_map(mirror, eps)
    r0 = np.array([0.12, 0.05, 0.2])
    v0 = np.array([0.5, 0.2, 0.4])
    fs = sample(mirror, r0, 0.0, eps)
    x0 = np.concatenate([r0, v0 + fs.A])
    rep = symplectic_residual(map_fn, x0)
    assert rep.symplectic_residual > 1e-2


def test_action_values_finite_and_reproducible(mirror, mirror_state):
    from gyrokit.canonchecks import action_full, action_gc

    eps = 1 / 16
    traj = integrate_full(mirror_state, 0.2, 1e-3, mirror, eps,
                          sample_stride=1)
    a1 = action_full(traj, mirror, eps)
    a2 = action_full(traj, mirror, eps)
    assert math.isfinite(a1) and a1 == a2
    g0 = to_guiding_center(mirror_state, mirror, eps)
    gtraj = integrate_gc(g0, 0.2, 1e-3, mirror, eps)
    b1 = action_gc(gtraj, mirror, eps)
    assert math.isfinite(b1)
