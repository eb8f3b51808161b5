import json
import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from hamshade.errors import (DimensionMismatch, InputError, InverseUnavailable,
                             SingularPoint)
from hamshade.hamsys import (BUILTINS, HamiltonianSystem, SuspensionSystem, cat_map,
                             cat_map_inverse, cat_suspension, eval_h, fd_gradient,
                             hamiltonian_field, harmonic, henon_heiles, is_regular, load_system,
                             on_energy_level, pair_rotation, pedro, saddle_center, slab_witness,
                             suspension_by_formula, suspension_flow, symmetry_defect)

q1, q2, p1, p2 = sp.symbols("q1 q2 p1 p2")
SYMBOLIC = {
    "henon-heiles": ((q1, q2, p1, p2),
                     (q1**2 + q2**2 + p1**2 + p2**2) / 2 + q1**2 * q2 - q2**3 / 3),
    "harmonic": ((q1, q2, p1, p2), (q1**2 + q2**2 + p1**2 + p2**2) / 2),
    "saddle-center": ((q1, q2, p1, p2), q1 * p1 + (q2**2 + p2**2) / 2),
    "pedro": ((q1, p1), q1**3 - 3 * q1 * p1**2),
}

coords = st.floats(-2, 2, allow_nan=False)


@pytest.mark.parametrize("name", sorted(SYMBOLIC))
def test_polynomial_matches_symbolic_oracle(name):
    vars_, expr = SYMBOLIC[name]
    sys = BUILTINS[name]()
    h = sp.lambdify(vars_, expr)
    grad = sp.lambdify(vars_, [sp.diff(expr, v) for v in vars_])
    hess = sp.lambdify(vars_, sp.hessian(expr, vars_))
    rng = np.random.default_rng(0)
    for x in rng.uniform(-2, 2, (25, len(vars_))):
        assert eval_h(sys, x) == pytest.approx(h(*x), abs=1e-12)
        np.testing.assert_allclose(sys.gradient(x), grad(*x), atol=1e-12)
        np.testing.assert_allclose(sys.hessian(x), np.array(hess(*x), dtype=float), atol=1e-12)


def test_pedro_examples():
    s = pedro()
    assert eval_h(s, [1.0, 0.0]) == 1.0
    np.testing.assert_allclose(hamiltonian_field(s, [1.0, 0.0]), [0.0, -3.0], atol=0)
    np.testing.assert_allclose(hamiltonian_field(s, [0.0, 0.0]), [0.0, 0.0], atol=0)
    assert not is_regular(s, [0.0, 0.0], 1e-8)
    assert is_regular(s, [1.0, 0.0], 1e-8)


@given(coords, coords)
def test_pedro_field_formula(x, y):
    np.testing.assert_allclose(pedro().field(np.array([x, y])),
                               [-6 * x * y, 3 * y * y - 3 * x * x], atol=1e-12)


def test_pedro_rotation_symmetry():
    rng = np.random.default_rng(1)
    c, s = math.cos(2 * math.pi / 3), math.sin(2 * math.pi / 3)
    R = np.array([[c, -s], [s, c]])
    assert symmetry_defect(pedro(), R, rng.uniform(-2, 2, (100, 2))) <= 1e-12


def test_harmonic_examples():
    s = harmonic()
    assert eval_h(s, np.zeros(4)) == 0.0
    assert not is_regular(s, np.zeros(4))
    np.testing.assert_allclose(s.field([1.0, 1.0, 0.0, 0.0]), [0.0, 0.0, -1.0, -1.0])


@given(st.floats(-10, 10, allow_nan=False))
def test_harmonic_pair_rotation_symmetry(theta):
    rng = np.random.default_rng(2)
    s = harmonic()
    assert symmetry_defect(s, pair_rotation(2, theta), rng.uniform(-1, 1, (20, 4))) <= 1e-12


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_identity_symmetry_defect_is_zero(name):
    s = BUILTINS[name]()
    pts = np.random.default_rng(3).uniform(-1, 1, (10, s.dim))
    assert symmetry_defect(s, np.eye(s.dim), pts) == 0.0


def test_finite_difference_gradient_order():
    # the stencil is fourth order; the error ratio for halved steps is ~16
    vars_ = (q1, q2, p1, p2)
    expr = sp.exp(sp.sin(q1) * q2) + sp.cos(p1 * p2)
    h = sp.lambdify(vars_, expr)
    x = np.array([0.3, -0.2, 0.1, 0.25])
    exact = np.array(sp.lambdify(vars_, [sp.diff(expr, v) for v in vars_])(*x))
    errs = [np.max(np.abs(fd_gradient(lambda y: h(*y), x, step) - exact))
            for step in (2e-2, 1e-2)]
    assert math.log2(errs[0] / errs[1]) >= 3.5


def test_callable_system_uses_finite_differences():
    s = HamiltonianSystem(n=2, h=lambda x: 0.5 * float(x @ x), name="callable")
    x = np.array([0.5, -1.0, 0.25, 2.0])
    np.testing.assert_allclose(s.gradient(x), x, atol=1e-8)
    np.testing.assert_allclose(s.hessian(x), np.eye(4), atol=1e-5)


def test_low_dimension_requires_flag():
    with pytest.raises(InputError):
        HamiltonianSystem(n=1, h=lambda x: x[0])


def test_dimension_mismatch():
    s = harmonic()
    with pytest.raises(DimensionMismatch):
        eval_h(s, [1.0, 2.0])
    with pytest.raises(DimensionMismatch):
        HamiltonianSystem.from_polynomial(2, [(1.0, (1, 0, 0))])


def test_on_energy_level():
    s = henon_heiles()
    x = on_energy_level(s, [0.0, 0.1, 0.3, 0.0], 1 / 8, 2)
    assert s.energy(x) == pytest.approx(1 / 8, abs=1e-14)
    assert x[[0, 1, 3]].tolist() == [0.0, 0.1, 0.0]


def test_load_system_roundtrip(tmp_path):
    doc = henon_heiles().to_document()
    doc["builtin"] = None
    path = tmp_path / "hh.json"
    path.write_text(json.dumps(doc))
    s = load_system(str(path))
    x = np.array([0.1, 0.2, -0.3, 0.05])
    assert s.energy(x) == pytest.approx(henon_heiles().energy(x), abs=1e-15)
    assert load_system("builtin:pedro").n == 1
    with pytest.raises(InputError):
        load_system("builtin:nothing")
    with pytest.raises(InputError):
        load_system({"n": 2})


# ------------------------------------------------------------- suspension

def test_suspension_unit_ceiling_example():
    susp = cat_suspension(1.0)
    x = np.array([0.3, 0.7])
    y, r = suspension_flow(susp, (x, 0.0), 3.25)
    np.testing.assert_allclose(y, cat_map(cat_map(cat_map(x))), atol=1e-15)
    assert r == pytest.approx(0.25, abs=1e-15)
    y, r = suspension_flow(susp, (x, 0.4), 0.0)
    assert np.array_equal(y, x) and r == 0.4


@settings(max_examples=50)
@given(st.floats(0, 0.999), st.floats(0, 0.999), st.floats(0, 0.999), st.floats(0, 20))
def test_suspension_matches_formula(a, b, r, s):
    susp = cat_suspension(1.0)
    y, rr = suspension_flow(susp, (np.array([a, b]), r), s)
    fy, fr = suspension_by_formula(susp, (np.array([a, b]), r), s)
    np.testing.assert_allclose(y, fy, atol=1e-12)
    assert rr == pytest.approx(fr, abs=1e-12)


def test_suspension_backward_and_inverse():
    susp = cat_suspension(1.0)
    x = np.array([0.2, 0.9])
    y, r = suspension_flow(susp, suspension_flow(susp, (x, 0.5), 2.7), -2.7)
    np.testing.assert_allclose(y, x, atol=1e-12)
    assert r == pytest.approx(0.5, abs=1e-12)
    np.testing.assert_allclose(cat_map_inverse(cat_map(x)), x, atol=1e-15)
    no_inv = SuspensionSystem(base_map=cat_map, ceiling=lambda x: 1.0)
    with pytest.raises(InverseUnavailable):
        suspension_flow(no_inv, (x, 0.5), -1.0)
    with pytest.raises(InputError):
        suspension_flow(susp, (x, 1.5), 1.0)


def test_non_mixing_slab_witness():
    rng = np.random.default_rng(4)
    states = [(rng.uniform(0, 1, 2), float(rng.uniform(0.01, 0.49))) for _ in range(30)]
    assert slab_witness(cat_suspension(1.0), states, range(1, 11)) == 0


def test_singular_point_error_type():
    from hamshade.poincare import transversal_frame
    with pytest.raises(SingularPoint):
        transversal_frame(harmonic(), np.zeros(4))
