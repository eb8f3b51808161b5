"""Hamiltonian systems on R^2n with the standard symplectic form.

Coordinates are ordered (q1..qn, p1..pn) and the symplectic matrix is
J = [[0, I], [-I, 0]], so the Hamiltonian field is X_H = J grad H.
"""
import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _kernels as K
from .errors import (DimensionMismatch, GradientUnavailable, HessianUnavailable,
                     InputError, InverseUnavailable)

SINGULAR_TOL = 1e-8
_FD_EPS = np.cbrt(np.finfo(float).eps)


def symplectic_matrix(n):
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, eye], [-eye, zero]])


def _fd_step(x):
    return _FD_EPS * max(1.0, float(np.linalg.norm(x)))


def fd_gradient(h, x, step=None):
    """Fourth-order central-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    s = _fd_step(x) if step is None else step
    g = np.empty_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = s
        g[j] = (-h(x + 2 * e) + 8 * h(x + e) - 8 * h(x - e) + h(x - 2 * e)) / (12 * s)
    return g


def fd_jacobian(f, x, step=None):
    """Fourth-order central-difference Jacobian of a vector function."""
    x = np.asarray(x, dtype=float)
    s = _fd_step(x) if step is None else step
    cols = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = s
        cols.append((-f(x + 2 * e) + 8 * f(x + e) - 8 * f(x - e) + f(x - 2 * e)) / (12 * s))
    return np.column_stack(cols)


@dataclass(frozen=True, eq=False)
class HamiltonianSystem:
    """An evaluable Hamiltonian H on R^2n.

    Polynomial systems (``coeffs``/``powers`` set) run on the compiled
    kernels; systems given only by Python callables use the generic path and
    fall back to finite differences for missing derivatives.
    """

    n: int
    h: Optional[Callable] = None
    grad: Optional[Callable] = None
    hess: Optional[Callable] = None
    name: str = "custom"
    coeffs: Optional[np.ndarray] = None
    powers: Optional[np.ndarray] = None
    low_dim: bool = False
    separable: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1:
            raise InputError("n must be positive")
        if self.n < 2 and not self.low_dim:
            raise InputError("n = 1 systems must be flagged low_dim=True")

    @property
    def dim(self):
        return 2 * self.n

    @property
    def is_polynomial(self):
        return self.coeffs is not None

    @classmethod
    def from_polynomial(cls, n, terms, name="polynomial", low_dim=False):
        """Build from ``[(coeff, powers), ...]`` with powers of length 2n."""
        if not terms:
            raise InputError("polynomial needs at least one term")
        coeffs = np.array([float(c) for c, _ in terms])
        powers = np.array([list(p) for _, p in terms], dtype=np.int64)
        if powers.ndim != 2 or powers.shape[1] != 2 * n:
            raise DimensionMismatch(f"powers must have length {2 * n}")
        if np.any(powers < 0):
            raise InputError("negative powers are not polynomial")
        q_part = powers[:, :n].any(axis=1)
        p_part = powers[:, n:].any(axis=1)
        separable = not bool(np.any(q_part & p_part))
        coeffs.setflags(write=False)
        powers.setflags(write=False)
        return cls(n=n, name=name, coeffs=coeffs, powers=powers,
                   low_dim=low_dim, separable=separable)

    def energy(self, x):
        x = np.asarray(x, dtype=float)
        if self.coeffs is not None:
            return float(K.poly_value(self.coeffs, self.powers, x))
        if self.h is None:
            raise GradientUnavailable(f"{self.name}: no energy evaluator")
        return float(self.h(x))

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        if self.coeffs is not None:
            return K.poly_grad(self.coeffs, self.powers, x)
        if self.grad is not None:
            return np.asarray(self.grad(x), dtype=float)
        if self.h is None:
            raise GradientUnavailable(f"{self.name}: neither H nor grad H is evaluable")
        g = fd_gradient(self.h, x)
        if not np.all(np.isfinite(g)):
            raise GradientUnavailable(f"{self.name}: finite-difference gradient is not finite")
        return g

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        if self.coeffs is not None:
            return K.poly_hess(self.coeffs, self.powers, x)
        if self.hess is not None:
            return np.asarray(self.hess(x), dtype=float)
        try:
            hm = fd_jacobian(self.gradient, x)
        except GradientUnavailable as exc:
            raise HessianUnavailable(str(exc)) from exc
        return 0.5 * (hm + hm.T)

    def field(self, x):
        return K.apply_j(self.gradient(x))

    def to_document(self):
        doc = {"name": self.name, "builtin": self.meta.get("builtin"), "n": self.n,
               "polynomial": None}
        if self.coeffs is not None:
            doc["polynomial"] = [{"coeff": float(c), "powers": [int(v) for v in p]}
                                 for c, p in zip(self.coeffs, self.powers)]
        return doc


def as_point(sys, x):
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != sys.dim:
        raise DimensionMismatch(f"{sys.name}: expected {sys.dim} coordinates, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise InputError("phase point has non-finite entries")
    return x


def eval_h(sys, x):
    return sys.energy(as_point(sys, x))


def hamiltonian_field(sys, x):
    return sys.field(as_point(sys, x))


def is_regular(sys, x, tol=SINGULAR_TOL):
    if tol <= 0:
        raise InputError("tol must be positive")
    return bool(np.linalg.norm(sys.gradient(as_point(sys, x))) > tol)


def symmetry_defect(sys, R, samples):
    """max over samples of |X_H(R x) - R X_H(x)|."""
    R = np.asarray(R, dtype=float)
    if abs(np.linalg.det(R)) < 1e-14:
        raise InputError("R must be invertible")
    worst = 0.0
    for x in samples:
        x = as_point(sys, x)
        worst = max(worst, float(np.linalg.norm(sys.field(R @ x) - R @ sys.field(x))))
    return worst


def pair_rotation(n, theta):
    """Rotate every (q_i, p_i) pair by theta."""
    c, s = np.cos(theta), np.sin(theta)
    R = np.zeros((2 * n, 2 * n))
    for i in range(n):
        R[i, i] = c
        R[i, n + i] = -s
        R[n + i, i] = s
        R[n + i, n + i] = c
    return R


def on_energy_level(sys, x, energy, index, tol=1e-14, maxit=100):
    """Move coordinate ``index`` of x (Newton) until H(x) = energy."""
    x = as_point(sys, x).copy()
    for _ in range(maxit):
        r = sys.energy(x) - energy
        if abs(r) <= tol:
            return x
        g = sys.gradient(x)[index]
        if g == 0:
            break
        x[index] -= r / g
    if abs(sys.energy(x) - energy) > 1e-10:
        raise InputError(f"could not reach energy {energy} along coordinate {index}")
    return x


# ----------------------------------------------------------------- builtins

def pedro():
    # H(x, y) = x^3 - 3 x y^2, one degree of freedom
    s = HamiltonianSystem.from_polynomial(1, [(1.0, (3, 0)), (-3.0, (1, 2))],
                                          name="pedro", low_dim=True)
    s.meta["builtin"] = "pedro"
    return s


def harmonic(n=2):
    terms = []
    for j in range(2 * n):
        p = [0] * (2 * n)
        p[j] = 2
        terms.append((0.5, p))
    s = HamiltonianSystem.from_polynomial(n, terms, name="harmonic")
    s.meta["builtin"] = "harmonic"
    return s


def henon_heiles():
    terms = [(0.5, (2, 0, 0, 0)), (0.5, (0, 2, 0, 0)), (0.5, (0, 0, 2, 0)),
             (0.5, (0, 0, 0, 2)), (1.0, (2, 1, 0, 0)), (-1.0 / 3.0, (0, 3, 0, 0))]
    s = HamiltonianSystem.from_polynomial(2, terms, name="henon-heiles")
    s.meta["builtin"] = "henon-heiles"
    return s


def saddle_center():
    # q1 p1 + (q2^2 + p2^2) / 2
    terms = [(1.0, (1, 0, 1, 0)), (0.5, (0, 2, 0, 0)), (0.5, (0, 0, 0, 2))]
    s = HamiltonianSystem.from_polynomial(2, terms, name="saddle-center")
    s.meta["builtin"] = "saddle-center"
    return s


BUILTINS = {
    "pedro": pedro,
    "harmonic": harmonic,
    "henon-heiles": henon_heiles,
    "saddle-center": saddle_center,
}


def load_system(spec):
    """Resolve ``builtin:NAME``, a path to a JSON document, or a parsed dict."""
    if isinstance(spec, HamiltonianSystem):
        return spec
    if isinstance(spec, str):
        if spec.startswith("builtin:"):
            name = spec.split(":", 1)[1]
            if name not in BUILTINS:
                raise InputError(f"unknown builtin {name!r}; choose from {sorted(BUILTINS)}")
            return BUILTINS[name]()
        with open(spec) as fh:
            spec = json.load(fh)
    if not isinstance(spec, dict):
        raise InputError("system must be 'builtin:NAME', a JSON path or a dict")
    if spec.get("builtin"):
        return load_system("builtin:" + spec["builtin"])
    try:
        n = int(spec["n"])
        terms = [(t["coeff"], t["powers"]) for t in spec["polynomial"]]
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed system document: {exc}") from exc
    return HamiltonianSystem.from_polynomial(n, terms, name=spec.get("name", "polynomial"),
                                             low_dim=(n == 1))


# --------------------------------------------------------------- suspension

@dataclass(frozen=True)
class SuspensionSystem:
    """Suspension flow of a base map f under a roof function h >= beta > 0."""

    base_map: Callable
    ceiling: Callable
    base_inverse: Optional[Callable] = None
    beta: float = 0.0
    name: str = "suspension"

    def check_ceiling(self, samples):
        vals = np.array([self.ceiling(x) for x in samples])
        bound = self.beta if self.beta > 0 else 0.0
        return bool(np.all(vals >= bound) and np.all(vals > 0))


def suspension_flow(susp, state, s):
    """Flow (x, r) for time s: r + s is reduced by roof values along the base
    orbit until it lies in [0, h(x'))."""
    x, r = state
    x = np.array(x, dtype=float)
    if not 0.0 <= r < susp.ceiling(x):
        raise InputError("roof coordinate must lie in [0, ceiling(x))")
    r = r + s
    if s >= 0:
        hx = susp.ceiling(x)
        while r >= hx:
            r -= hx
            x = susp.base_map(x)
            hx = susp.ceiling(x)
    else:
        if susp.base_inverse is None:
            raise InverseUnavailable("negative time needs the base map inverse")
        while r < 0:
            x = susp.base_inverse(x)
            r += susp.ceiling(x)
    return x, r


CAT = np.array([[2.0, 1.0], [1.0, 1.0]])
CAT_INV = np.array([[1.0, -1.0], [-1.0, 2.0]])


def cat_map(x):
    return np.mod(CAT @ x, 1.0)


def cat_map_inverse(x):
    return np.mod(CAT_INV @ x, 1.0)


def cat_suspension(height=1.0):
    if height <= 0:
        raise InputError("ceiling must be positive")
    return SuspensionSystem(base_map=cat_map, base_inverse=cat_map_inverse,
                            ceiling=lambda x: height, beta=height, name="cat-suspension")


def suspension_by_formula(susp, state, s):
    """S^s(x, r) = (f^m x, r + s - sum_{i<m} h(f^i x)) for s >= 0, with m
    found by accumulating roof values. Independent of :func:`suspension_flow`."""
    x, r = state
    x = np.array(x, dtype=float)
    if s < 0:
        raise InputError("the closed formula is evaluated for s >= 0")
    total, m, xm = 0.0, 0, x
    heights = []
    while True:
        hm = susp.ceiling(xm)
        if total + hm > r + s:
            break
        heights.append(hm)
        total += hm
        xm = susp.base_map(xm)
        m += 1
    return xm, r + s - float(np.sum(heights))


def slab_witness(susp, states, times):
    """Count integer-time images of states in the slab r in (0, 1/2) that
    land in r in (1/2, 1); zero means the sample witnesses non-mixing for a
    unit roof."""
    hits = 0
    for x, r in states:
        if not 0.0 < r < 0.5:
            raise InputError("witness states must start in the lower slab")
        for s in times:
            _, r1 = suspension_flow(susp, (x, r), s)
            if 0.5 < r1 < 1.0:
                hits += 1
    return hits
