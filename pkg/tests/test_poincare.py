import math

import numpy as np
import pytest

from hamshade.errors import DegenerateForm, TangentialCrossing
from hamshade.flow import Policy, flow_at
from hamshade.hamsys import harmonic, henon_heiles, on_energy_level, saddle_center
from hamshade.poincare import (Section, TransversalFrame, induced_form, linear_poincare,
                               section_return, transversal_frame)

def _regular_points(count, seed):
    rng = np.random.default_rng(seed)
    sys = henon_heiles()
    out = []
    while len(out) < count:
        x = rng.uniform(-0.3, 0.3, 4)
        if np.linalg.norm(sys.gradient(x)) > 1e-3:
            out.append(x)
    return sys, out


def test_frame_is_doubly_orthogonal():
    sys, pts = _regular_points(100, 0)
    for x in pts:
        b = transversal_frame(sys, x).basis
        assert b.shape == (4, 2)
        np.testing.assert_allclose(b.T @ b, np.eye(2), atol=1e-12)
        assert np.max(np.abs(b.T @ sys.field(x))) <= 1e-12
        assert np.max(np.abs(b.T @ sys.gradient(x))) <= 1e-12
        omega = induced_form(sys, transversal_frame(sys, x))
        assert abs(np.linalg.det(omega)) > 1e-12
        assert np.array_equal(omega + omega.T, np.zeros((2, 2)))


def test_frame_is_deterministic():
    sys, pts = _regular_points(3, 1)
    for x in pts:
        assert np.array_equal(transversal_frame(sys, x).basis, transversal_frame(sys, x).basis)


def test_saddle_center_frame_spans_center_plane():
    b = transversal_frame(saddle_center(), [1.0, 0.0, 0.0, 0.0]).basis
    # projector onto span(e_q2, e_p2)
    proj = b @ b.T
    expect = np.zeros((4, 4))
    expect[1, 1] = expect[3, 3] = 1.0
    np.testing.assert_allclose(proj, expect, atol=1e-12)


def test_induced_form_on_coordinate_plane():
    frame = TransversalFrame(x=np.zeros(4), basis=np.eye(4)[:, [1, 3]])
    np.testing.assert_array_equal(induced_form(harmonic(), frame), [[0.0, 1.0], [-1.0, 0.0]])
    flat = TransversalFrame(x=np.zeros(4), basis=np.eye(4)[:, [0, 1]])
    with pytest.raises(DegenerateForm):
        induced_form(harmonic(), flat)


def test_harmonic_period_map_is_identity():
    lp = linear_poincare(harmonic(), [1.0, 0.5, 0.0, 0.2], 2 * math.pi)
    np.testing.assert_allclose(lp.P, np.eye(2), atol=1e-6)


def test_saddle_center_center_plane_rotates():
    # on the (q2, p2) plane the tangent flow is a clockwise unit-speed rotation
    sys = saddle_center()
    x = np.array([1.0, 0.0, 0.0, 0.0])
    for t in (0.5, 1.0, 3.0):
        lp = linear_poincare(sys, x, t, Policy(step=1e-4))
        b0, b1 = lp.frame_src.basis, lp.frame_dst.basis
        c, s = math.cos(t), math.sin(t)
        rot = np.array([[c, 0, s, 0], [0, 1, 0, 0], [-s, 0, c, 0], [0, 0, 0, 1]])
        rot = rot[np.ix_([1, 0, 3, 2], [1, 0, 3, 2])]
        np.testing.assert_allclose(lp.P, b1.T @ rot @ b0, atol=1e-8)


@pytest.mark.parametrize("t", [-40.0, -3.0, 2.5, 50.0])
def test_projected_map_is_symplectic(t):
    sys = henon_heiles()
    x = on_energy_level(sys, [0.0, -0.2, 0.3, 0.05], 1 / 8, 2)
    lp = linear_poincare(sys, x, t, Policy(step=2.5e-4))
    assert lp.defect <= 1e-8


def test_cocycle_relation():
    sys = henon_heiles()
    x = on_energy_level(sys, [0.0, 0.1, 0.3, 0.0], 1 / 10, 2)
    a = linear_poincare(sys, x, 1.5)
    b = linear_poincare(sys, a.frame_dst.x, 2.0, frame_src=a.frame_dst)
    c = linear_poincare(sys, x, 3.5, frame_dst=b.frame_dst)
    np.testing.assert_allclose(b.P @ a.P, c.P, atol=1e-8)


def test_harmonic_section_return_time():
    sys = harmonic()
    x = np.array([1.0, 0.3, 0.0, 0.1])
    sec = Section.through(x, 2, direction=-1)
    # the midpoint phase error is 2 pi step^2 / 12, so 1e-8 needs step 1e-4
    ret = section_return(sys, x, sec, Policy(step=1e-4))
    assert ret.tau == pytest.approx(2 * math.pi, abs=1e-8)
    np.testing.assert_allclose(ret.y, x, atol=1e-6)


def test_henon_heiles_section_consistency():
    sys = henon_heiles()
    x = on_energy_level(sys, [0.0, 0.1, 0.3, 0.0], 1 / 8, 2)
    sec = Section([1.0, 0.0, 0.0, 0.0])
    ret = section_return(sys, x, sec)
    assert abs(sec(ret.y)) <= 1e-10 and ret.y[2] > 0 and ret.tau > 0
    assert abs(sys.energy(ret.y) - 1 / 8) <= 1e-6
    np.testing.assert_allclose(flow_at(sys, x, ret.tau), ret.y, atol=1e-9)


def test_tangential_start_raises():
    sys = harmonic()
    x = np.array([1.0, 0.0, 0.0, 0.0])
    with pytest.raises(TangentialCrossing):
        section_return(sys, x, Section.through(x, 0))
