import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from hamshade.errors import InputError, SingularStart
from hamshade.flow import (Policy, flow_at, integrate, sample_orbit, symplectic_defect,
                           tangent_flow, write_trajectory_csv)
from hamshade.hamsys import BUILTINS, harmonic, henon_heiles, on_energy_level, saddle_center

HH_START = on_energy_level(henon_heiles(), [0.0, -0.2, 0.3, 0.05], 1 / 8, 2)


def _harmonic_exact(x0, t):
    # X_H = (p, -q): each (q_i, p_i) pair rotates clockwise
    n = len(x0) // 2
    q, p = x0[:n], x0[n:]
    c, s = math.cos(t), math.sin(t)
    return np.concatenate([c * q + s * p, -s * q + c * p])


def test_harmonic_full_period_returns():
    x0 = np.array([1.0, 0.0, 0.0, 0.0])
    traj = integrate(harmonic(), x0, 2 * math.pi, Policy(step=1e-3))
    np.testing.assert_allclose(traj.points[-1], x0, atol=1e-6)


def test_zero_time_is_identity():
    x0 = np.array([0.1, 0.2, 0.3, 0.0])
    traj = integrate(henon_heiles(), x0, 0.0)
    assert traj.points.shape == (1, 4)
    assert np.array_equal(traj.points[0], x0) and traj.energy_drift == 0.0
    assert np.array_equal(flow_at(henon_heiles(), x0, 0.0), x0)


def test_half_period_per_mode():
    x0 = np.array([1.0, 1.0, 0.0, 0.0])
    np.testing.assert_allclose(flow_at(harmonic(), x0, math.pi), [-1.0, -1.0, 0.0, 0.0],
                               atol=1e-6)


@settings(max_examples=20, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_harmonic_matches_closed_form(t, a):
    x0 = np.array([1.0, a, 0.5, -0.25])
    np.testing.assert_allclose(flow_at(harmonic(), x0, t), _harmonic_exact(x0, t), atol=1e-6)


def test_energy_drift_is_second_order():
    sys = henon_heiles()
    d1 = integrate(sys, HH_START, 100.0, Policy(step=1e-3)).energy_drift
    d2 = integrate(sys, HH_START, 100.0, Policy(step=5e-4)).energy_drift
    assert d1 <= 1e-6
    assert 3.0 <= d1 / d2 <= 5.0


def test_rk4_is_fourth_order():
    x0 = np.array([1.0, 0.3, 0.0, 0.5])
    exact = _harmonic_exact(x0, 3.0)
    errs = [np.max(np.abs(flow_at(harmonic(), x0, 3.0, Policy(step=h, method="rk4-reference"))
                          - exact)) for h in (0.1, 0.05)]
    assert math.log2(errs[0] / errs[1]) >= 3.8


def test_leapfrog_on_separable_system():
    sys = henon_heiles()
    assert sys.separable
    a = flow_at(sys, HH_START, 5.0, Policy(step=1e-3, method="leapfrog-if-separable"))
    b = flow_at(sys, HH_START, 5.0, Policy(step=1e-4, method="rk4-reference"))
    np.testing.assert_allclose(a, b, atol=1e-5)


def test_semigroup():
    rng = np.random.default_rng(5)
    sys = henon_heiles()
    for _ in range(5):
        s, s2 = rng.uniform(-3, 3, 2)
        a = flow_at(sys, flow_at(sys, HH_START, s), s2)
        np.testing.assert_allclose(a, flow_at(sys, HH_START, s + s2), atol=1e-6)


def test_sample_orbit_handles_both_directions():
    sys = henon_heiles()
    times = np.array([2.0, -1.0, 0.0, 0.5, -3.0])
    pts = sample_orbit(sys, HH_START, times)
    for t, p in zip(times, pts):
        np.testing.assert_allclose(p, flow_at(sys, HH_START, t), atol=1e-12)


def test_tangent_flow_harmonic_period_is_identity():
    res = tangent_flow(harmonic(), [1.0, 0.0, 0.0, 0.0], 2 * math.pi)
    np.testing.assert_allclose(res.M, np.eye(4), atol=1e-6)


def test_tangent_flow_saddle_center_closed_form():
    # variational generator J Hess H is constant: expm gives the exact solution
    sys = saddle_center()
    x0 = np.array([0.3, 0.2, -0.1, 0.4])
    J = np.block([[np.zeros((2, 2)), np.eye(2)], [-np.eye(2), np.zeros((2, 2))]])
    exact = expm(J @ sys.hessian(x0))
    # the midpoint phase error is O(step^2), about 1e-7 at the default step
    res = tangent_flow(sys, x0, 1.0, Policy(step=1e-4))
    np.testing.assert_allclose(res.M, exact, atol=1e-8)
    # in (q1, p1), (q2, p2) coordinates this is diag(e, 1/e) and a unit rotation
    idx = [0, 2, 1, 3]
    blk = exact[np.ix_(idx, idx)]
    np.testing.assert_allclose(blk[:2, :2], np.diag([math.e, 1 / math.e]), atol=1e-12)
    c, s = math.cos(1.0), math.sin(1.0)
    np.testing.assert_allclose(blk[2:, 2:], [[c, s], [-s, c]], atol=1e-12)


@pytest.mark.parametrize("name", ["harmonic", "henon-heiles", "saddle-center"])
def test_tangent_flow_is_symplectic(name):
    sys = BUILTINS[name]()
    x0 = HH_START if name == "henon-heiles" else np.array([0.5, 0.3, -0.2, 0.1])
    for t in (1.0, -7.5, 100.0):
        res = tangent_flow(sys, x0, t)
        assert res.symplectic_defect <= 1e-8
        # M X_H(x0) = X_H(x_t) holds to O(step^2) relative to the size of M
        assert res.equivariance_defect <= 1e-6 * max(1.0, np.linalg.norm(res.M, 2))


def test_symplectic_defect_detects_non_symplectic():
    assert symplectic_defect(np.diag([2.0, 1.0])) > 0.1
    assert symplectic_defect(np.diag([2.0, 0.5])) == 0.0


def test_singular_start_rejected():
    with pytest.raises(SingularStart):
        integrate(harmonic(), np.zeros(4), 1.0)
    traj = integrate(harmonic(), np.zeros(4), 1.0, Policy(allow_singular=True))
    assert np.all(traj.points == 0.0)


def test_policy_validation():
    with pytest.raises(InputError):
        Policy(step=0.0)
    with pytest.raises(InputError):
        Policy(method="euler")


def test_trajectory_csv(tmp_path):
    sys = harmonic()
    traj = integrate(sys, [1.0, 0.0, 0.0, 0.0], 0.01, Policy(step=1e-3))
    path = tmp_path / "t.csv"
    write_trajectory_csv(path, sys, traj)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,q1,q2,p1,p2,energy_error"
    assert len(lines) == traj.points.shape[0] + 1
