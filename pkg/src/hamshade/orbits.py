"""Periodic orbits, symplectic spectra and the linear spectral sandbox."""
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional

import numpy as np
from scipy.linalg import expm, logm
from scipy.optimize import minimize

from .errors import (EigenFailure, InputError, NoConvergence, NudgeOutOfReach,
                     SingularJacobian)
from .flow import DEFAULT_POLICY, flow_at
from .hamsys import as_point, symplectic_matrix
from .poincare import linear_poincare, section_return

UNIT_BAND_EXACT = 1e-6
UNIT_BAND_INTEGRATED = 1e-4


@dataclass
class SpectrumQuadruples:
    groups: List[np.ndarray]
    unit_band: float
    eigenvalues: np.ndarray
    pairing_defect: float
    conjugation_defect: float

    @property
    def defect(self):
        return max(self.pairing_defect, self.conjugation_defect)


@dataclass
class PeriodicOrbit:
    p: np.ndarray
    period: float
    monodromy: np.ndarray
    residual: float
    classification: str
    newton_iterations: int = 0
    eigenvalues: Optional[np.ndarray] = field(default=None, repr=False)

    def to_report(self):
        ev = self.eigenvalues if self.eigenvalues is not None else np.linalg.eigvals(self.monodromy)
        ev = sorted(ev, key=lambda z: (-abs(z), -z.real, -z.imag))
        return {
            "point": [float(v) for v in self.p],
            "period": float(self.period),
            "residual": float(self.residual),
            "eigenvalues": [{"re": float(z.real), "im": float(z.imag), "modulus": float(abs(z))}
                            for z in ev],
            "classification": self.classification,
        }


def _eigvals(A):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InputError("matrix must be square")
    if not np.all(np.isfinite(A)):
        raise InputError("matrix has non-finite entries")
    try:
        return np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc


def eigen_quadruples(A, unit_band=UNIT_BAND_EXACT):
    """Group the spectrum into orbits of sigma -> 1/sigma and sigma -> conj(sigma).

    Eigenvalues are paired greedily by smallest |sigma sigma' - 1|; reciprocal
    pairs that are complex conjugates of one another form one group.
    """
    ev = _eigvals(A)
    m = ev.size
    cost = np.abs(np.outer(ev, ev) - 1.0)
    np.fill_diagonal(cost, np.inf)
    free = set(range(m))
    pairs = []
    for flat in np.argsort(cost, axis=None, kind="stable"):
        i, j = divmod(int(flat), m)
        if i < j and i in free and j in free:
            pairs.append((i, j))
            free -= {i, j}
    singles = sorted(free)
    pairing = max([cost[i, j] for i, j in pairs] + [abs(ev[i] ** 2 - 1) for i in singles] + [0.0])
    conj = 0.0
    for z in ev:
        conj = max(conj, float(np.min(np.abs(ev - np.conj(z)))))
    groups, used = [], set()
    for a, (i, j) in enumerate(pairs):
        if a in used:
            continue
        used.add(a)
        members = [i, j]
        if abs(ev[i].imag) > unit_band and abs(ev[j] - np.conj(ev[i])) > unit_band:
            # look for the conjugate reciprocal pair
            best, bd = None, np.inf
            for b, (k, l) in enumerate(pairs):
                if b in used:
                    continue
                d = min(abs(ev[k] - np.conj(ev[i])), abs(ev[l] - np.conj(ev[i])))
                if d < bd:
                    best, bd = b, d
            if best is not None:
                used.add(best)
                members += list(pairs[best])
        groups.append(ev[members])
    groups += [ev[[i]] for i in singles]
    return SpectrumQuadruples(groups=groups, unit_band=unit_band, eigenvalues=ev,
                              pairing_defect=float(pairing), conjugation_defect=conj)


def classify_spectrum(ev, unit_band):
    """'hyperbolic', 'k-elliptic' (k >= 1) or 'degenerate'."""
    ev = np.asarray(ev)
    on_circle = np.abs(np.abs(ev) - 1.0) <= unit_band
    if not on_circle.any():
        return "hyperbolic"
    sep = 10 * unit_band
    for i in np.nonzero(on_circle)[0]:
        if abs(ev[i].imag) < sep:
            return "degenerate"
        others = np.delete(ev, i)
        if others.size and np.min(np.abs(others - ev[i])) < sep:
            return "degenerate"
    return f"{int(on_circle.sum()) // 2}-elliptic"


def classify(orbit, unit_band=UNIT_BAND_INTEGRATED):
    M = orbit.monodromy if isinstance(orbit, PeriodicOrbit) else orbit
    return classify_spectrum(_eigvals(M), unit_band)


def elliptic_index(classification):
    if classification.endswith("-elliptic"):
        return int(classification.split("-")[0])
    return 0


def _section_basis(section):
    nrm = section.normal / np.linalg.norm(section.normal)
    # orthonormal basis of the hyperplane normal^perp
    q, _ = np.linalg.qr(np.column_stack([nrm, np.eye(nrm.size)]))
    return q[:, 1:nrm.size]


def find_periodic(sys, seed, section, policy=DEFAULT_POLICY, max_newton=30, tol=1e-10,
                  energy=None, unit_band=UNIT_BAND_INTEGRATED, fd_step=1e-7, max_time=1000.0):
    """Fixed point of the section return map at fixed energy.

    Gauss-Newton on [R(y) - y, H(y) - e] over points y of the section, with
    the Jacobian of R by central differences along the section.
    """
    seed = as_point(sys, seed)
    nrm = section.normal
    base = seed - (section(seed) / (nrm @ nrm)) * nrm
    B = _section_basis(section)
    e = sys.energy(seed) if energy is None else float(energy)

    def residual(c):
        y = base + B @ c
        ret = section_return(sys, y, section, policy, max_time=max_time)
        return np.append(ret.y - y, sys.energy(y) - e), ret

    c = np.zeros(B.shape[1])
    its = 0
    F, ret = residual(c)
    while np.linalg.norm(F[:-1]) > tol or abs(F[-1]) > tol:
        if its >= max_newton:
            raise NoConvergence(f"Newton did not converge in {max_newton} iterations "
                                f"(residual {np.linalg.norm(F):.3e})")
        eta = fd_step * max(1.0, float(np.linalg.norm(base + B @ c)))
        jac = np.empty((F.size, c.size))
        for j in range(c.size):
            dc = np.zeros_like(c)
            dc[j] = eta
            jac[:, j] = (residual(c + dc)[0] - residual(c - dc)[0]) / (2 * eta)
        sv = np.linalg.svd(jac, compute_uv=False)
        if sv[-1] <= 1e-9 * sv[0]:
            raise SingularJacobian("return-map Jacobian is singular (eigenvalue 1)")
        c = c + np.linalg.lstsq(jac, -F, rcond=None)[0]
        F, ret = residual(c)
        its += 1
    p = base + B @ c
    period = ret.tau
    res = float(np.linalg.norm(flow_at(sys, p, period, policy) - p))
    lp = linear_poincare(sys, p, period, policy)
    ev = _eigvals(lp.P) if lp.P.size else np.array([], dtype=complex)
    return PeriodicOrbit(p=p, period=period, monodromy=lp.P, residual=res,
                         classification=classify_spectrum(ev, unit_band),
                         newton_iterations=its, eigenvalues=ev)


# ----------------------------------------------------------- spectral nudge

_SL2 = (np.array([[1.0, 0.0], [0.0, -1.0]]), np.array([[0.0, 1.0], [0.0, 0.0]]),
        np.array([[0.0, 0.0], [1.0, 0.0]]))


def _nearest_direction(A):
    """Generator X in sl(2) pointing at the closest |trace| = 2 matrix."""
    target = 2.0 * np.sign(np.trace(A))
    cons = [{"type": "eq", "fun": lambda e: np.linalg.det(A + e.reshape(2, 2)) - 1.0},
            {"type": "eq", "fun": lambda e: np.trace(A + e.reshape(2, 2)) - target}]
    res = minimize(lambda e: np.sum(e ** 2), np.full(4, 1e-3), constraints=cons,
                   method="SLSQP", options={"ftol": 1e-14, "maxiter": 200})
    X = np.real(logm(np.linalg.solve(A, A + res.x.reshape(2, 2))))
    return X - 0.5 * np.trace(X) * np.eye(2)


def _min_frobenius_direction(A):
    M = np.column_stack([(A @ E).ravel() for E in _SL2])
    g = np.array([np.trace(A @ E) for E in _SL2])
    coef = np.linalg.solve(M.T @ M, g)
    return sum(c * E for c, E in zip(coef, _SL2))


def _nudge_along(A, X, delta):
    """Smallest s with |tr(A exp(sX))| <= 2, or None if that costs more than delta."""
    tr = np.trace(A)
    X = X * (-np.sign(tr) / np.trace(A @ X))

    def moved(s):
        return A @ expm(s * X)

    def dist(s):
        return np.linalg.norm(moved(s) - A, 2)

    hi = 1e-12
    while dist(hi) < delta and hi < 1e6:
        hi *= 2
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if dist(mid) <= delta:
            lo = mid
        else:
            hi = mid
    s_max = lo
    if abs(np.trace(moved(s_max))) > 2.0:
        return None
    lo, hi = 0.0, s_max
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if abs(np.trace(moved(mid))) <= 2.0:
            hi = mid
        else:
            lo = mid
    return moved(hi)


def _nudge_block(A, delta):
    tr = np.trace(A)
    if abs(tr) <= 2.0:
        return A.copy()
    out = _nudge_along(A, _min_frobenius_direction(A), delta)
    if out is None:
        out = _nudge_along(A, _nearest_direction(A), delta)
    if out is None:
        raise NudgeOutOfReach(f"trace {tr:.6g} cannot reach [-2, 2] within delta={delta:g}")
    return out


def spectral_nudge(A, delta):
    """Symplectic A' within ``delta`` (operator norm) of A having an eigenvalue
    of modulus one.

    Handles 2x2 matrices and matrices block-diagonal in the (q_i, p_i) pairs;
    the block closest to the unit circle is the one moved.
    """
    A = np.asarray(A, dtype=float)
    if delta <= 0:
        raise InputError("delta must be positive")
    d = A.shape[0]
    if A.shape != (d, d) or d % 2:
        raise InputError("spectral_nudge needs an even-dimensional square matrix")
    m = d // 2
    blocks = [[i, m + i] for i in range(m)]
    mask = np.zeros((d, d), dtype=bool)
    for b in blocks:
        mask[np.ix_(b, b)] = True
    if np.max(np.abs(A[~mask]), initial=0.0) > 1e-12:
        raise InputError("only 2x2 and pair-block-diagonal matrices are supported")
    subs = [A[np.ix_(b, b)] for b in blocks]
    if any(abs(np.trace(s)) <= 2.0 for s in subs):
        return A.copy()
    k = int(np.argmin([abs(np.trace(s)) for s in subs]))
    out = A.copy()
    out[np.ix_(blocks[k], blocks[k])] = _nudge_block(subs[k], delta)
    return out


# ------------------------------------------------------ rational rotations

def _simplest_between(lo, hi):
    fl = math.floor(lo)
    if fl == lo:
        return Fraction(fl)
    if fl + 1 <= hi:
        return Fraction(fl + 1)
    return fl + 1 / _simplest_between(1 / (hi - fl), 1 / (lo - fl))


def rationalize_rotation(theta, delta):
    """(p, q) with |2 pi p/q - theta| <= delta and q as small as possible."""
    if delta <= 0:
        raise InputError("delta must be positive")
    x = Fraction(theta) / Fraction(2 * math.pi)
    w = Fraction(delta) / Fraction(2 * math.pi)
    f = _simplest_between(x - w, x + w)
    return f.numerator, f.denominator


def rotation(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def random_symplectic(dim, rng, scale=1.0):
    """exp of a random Hamiltonian matrix J S with S symmetric."""
    n = dim // 2
    S = rng.normal(size=(dim, dim)) * scale / np.sqrt(dim)
    S = 0.5 * (S + S.T)
    return expm(symplectic_matrix(n) @ S)
