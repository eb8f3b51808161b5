import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import block_diag

from hamshade.errors import InputError, NudgeOutOfReach
from hamshade.flow import Policy, symplectic_defect
from hamshade.hamsys import harmonic, henon_heiles, on_energy_level, saddle_center
from hamshade.orbits import (classify, eigen_quadruples, elliptic_index, find_periodic,
                             random_symplectic, rationalize_rotation, rotation, spectral_nudge)
from hamshade.poincare import Section

ROT1 = rotation(1.0)
MIXED = block_diag(ROT1, np.diag([3.0, 1 / 3]))


def _sorted_groups(q):
    return [sorted(g, key=lambda z: (z.real, z.imag)) for g in q.groups]


def test_reciprocal_pair_is_one_group():
    q = eigen_quadruples(np.diag([2.0, 0.5]))
    assert len(q.groups) == 1
    np.testing.assert_allclose(sorted(np.abs(q.groups[0])), [0.5, 2.0])


def test_conjugate_unit_pair_is_one_group():
    q = eigen_quadruples(ROT1)
    assert len(q.groups) == 1
    g = _sorted_groups(q)[0]
    np.testing.assert_allclose(g, [np.exp(-1j), np.exp(1j)], atol=1e-14)


def test_mixed_block_groups():
    # brute-force oracle: eigenvalues of each block separately
    q = eigen_quadruples(MIXED)
    assert len(q.groups) == 2
    mods = sorted(sorted(np.abs(g)) for g in q.groups)
    np.testing.assert_allclose(mods[0], [1 / 3, 3.0])
    np.testing.assert_allclose(mods[1], [1.0, 1.0])
    assert q.defect <= 1e-12


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([2, 4, 6]), st.integers(0, 2**32 - 1))
def test_random_symplectic_spectrum_is_closed(dim, seed):
    A = random_symplectic(dim, np.random.default_rng(seed))
    assert symplectic_defect(A) <= 1e-9
    q = eigen_quadruples(A)
    assert q.defect <= 1e-6
    assert sum(len(g) for g in q.groups) == dim


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_unit_real_eigenvalues_have_even_multiplicity(seed):
    rng = np.random.default_rng(seed)
    # a shear in each pair has eigenvalue 1 twice; conjugating keeps that
    P = random_symplectic(4, rng, 0.5)
    S = np.eye(4)
    S[0, 2] = S[1, 3] = rng.normal()
    ev = np.linalg.eigvals(P @ S @ np.linalg.inv(P))
    for target in (1.0, -1.0):
        assert np.sum(np.abs(ev - target) <= 1e-4) % 2 == 0


def test_classify_examples():
    assert classify(ROT1) == "1-elliptic"
    assert classify(np.diag([2.0, 0.5])) == "hyperbolic"
    assert classify(MIXED) == "1-elliptic"
    assert classify(np.eye(2)) == "degenerate"
    assert elliptic_index("2-elliptic") == 2
    assert elliptic_index("hyperbolic") == 0


def test_harmonic_periodic_orbit():
    x = np.array([1.0, 0.3, 0.0, 0.1])
    orb = find_periodic(harmonic(), x, Section.through(x, 2, direction=-1), Policy(step=1e-4))
    assert orb.period == pytest.approx(2 * math.pi, abs=1e-8)
    assert orb.residual <= 1e-10


def test_saddle_center_elliptic_circle():
    # the q1 = p1 = 0 plane carries the period-2 pi circle orbits
    x = np.array([0.0, 1.0, 0.0, 0.0])
    orb = find_periodic(saddle_center(), x, Section.through(x, 3, direction=-1),
                        Policy(step=1e-4))
    assert orb.period == pytest.approx(2 * math.pi, abs=1e-7)
    assert abs(orb.p[0]) <= 1e-8 and abs(orb.p[2]) <= 1e-8
    assert orb.classification == "hyperbolic"
    mods = sorted(np.abs(np.linalg.eigvals(orb.monodromy)))
    np.testing.assert_allclose(mods, [math.exp(-2 * math.pi), math.exp(2 * math.pi)], rtol=1e-6)


@pytest.mark.parametrize("q2,kind", [(0.1, "1-elliptic"), (-0.2, "hyperbolic")])
def test_henon_heiles_orbit_is_self_consistent(q2, kind):
    sys = henon_heiles()
    seed = on_energy_level(sys, [0.0, q2, 0.3, 0.0], 1 / 12, 2)
    sec = Section([1.0, 0.0, 0.0, 0.0])
    a = find_periodic(sys, seed, sec, Policy(step=1e-3))
    b = find_periodic(sys, seed, sec, Policy(step=5e-4))
    assert a.residual <= 1e-8 and b.residual <= 1e-8
    assert abs(a.period - b.period) <= 1e-5
    assert a.classification == kind
    assert eigen_quadruples(a.monodromy).defect <= 1e-6


def test_orbit_report_schema():
    x = np.array([1.0, 0.3, 0.0, 0.1])
    rep = find_periodic(harmonic(), x, Section.through(x, 2, direction=-1)).to_report()
    assert set(rep) == {"point", "period", "residual", "eigenvalues", "classification"}
    assert set(rep["eigenvalues"][0]) == {"re", "im", "modulus"}


# ------------------------------------------------------------------ nudge

def _sp2_with_trace(t, x=0.5, y=1.0):
    return np.array([[x, y], [(x * (t - x) - 1) / y, t - x]])


def test_nudge_near_parabolic():
    A = _sp2_with_trace(2.001)
    B = spectral_nudge(A, 1e-2)
    assert abs(np.trace(B)) <= 2.0
    assert np.linalg.norm(B - A, 2) <= 1e-2
    assert symplectic_defect(B) <= 1e-10


def test_nudge_elliptic_is_identity():
    A = _sp2_with_trace(1.5)
    assert np.array_equal(spectral_nudge(A, 1e-3), A)


def test_nudge_out_of_reach():
    with pytest.raises(NudgeOutOfReach):
        spectral_nudge(np.diag([3.0, 1 / 3]), 1e-3)


def test_nudge_block_diagonal():
    # pair blocks live on (q1, p1) = (0, 2) and (q2, p2) = (1, 3)
    A = np.zeros((4, 4))
    A[np.ix_([0, 2], [0, 2])] = np.diag([3.0, 1 / 3])
    A[np.ix_([1, 3], [1, 3])] = _sp2_with_trace(2.002)
    B = spectral_nudge(A, 1e-2)
    assert np.linalg.norm(B - A, 2) <= 1e-2
    assert symplectic_defect(B) <= 1e-10
    # eigenvalues near a parabolic block are only sqrt(eps)-accurate; test the trace
    assert abs(np.trace(B[np.ix_([1, 3], [1, 3])])) <= 2.0
    np.testing.assert_array_equal(B[np.ix_([0, 2], [0, 2])], A[np.ix_([0, 2], [0, 2])])
    with pytest.raises(InputError):
        spectral_nudge(np.ones((4, 4)), 1e-2)


# ------------------------------------------------------------- rationals

def _brute_force(theta, delta, qmax=100000):
    for q in range(1, qmax + 1):
        p = round(theta * q / (2 * math.pi))
        if abs(2 * math.pi * p / q - theta) <= delta:
            return p, q
    return None


def test_rationalize_examples():
    assert rationalize_rotation(2 * math.pi / 3, 1e-6) == (1, 3)
    assert rationalize_rotation(0.0, 1e-6) == (0, 1)
    p, q = rationalize_rotation(1.0, 1e-4)
    assert q <= 1e4
    assert abs(2 * math.pi * p / q - 1.0) <= 1e-4
    np.testing.assert_allclose(np.linalg.matrix_power(rotation(2 * math.pi * p / q), q),
                               np.eye(2), atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 6.2), st.sampled_from([1e-2, 1e-3, 1e-4]))
def test_rationalize_minimal_denominator(theta, delta):
    p, q = rationalize_rotation(theta, delta)
    assert abs(2 * math.pi * p / q - theta) <= delta * (1 + 1e-9)
    bp, bq = _brute_force(theta, delta)
    assert q == bq
