"""Transversal frames, the linear Poincare flow, and section return maps."""
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import (DegenerateForm, InputError, NoReturn, SingularOnOrbit, SingularPoint,
                     TangentialCrossing)
from .flow import DEFAULT_POLICY, _advance, _advance_tangent, _method, _raise, check_start
from .hamsys import SINGULAR_TOL, as_point, symplectic_matrix


@dataclass
class TransversalFrame:
    x: np.ndarray
    basis: np.ndarray


@dataclass
class LinearPoincareMap:
    P: np.ndarray
    frame_src: TransversalFrame
    frame_dst: TransversalFrame
    t: float
    omega_src: np.ndarray
    omega_dst: np.ndarray

    @property
    def defect(self):
        """|P^T Omega_dst P - Omega_src|_max scaled by max(1, |P|^2)."""
        if self.P.size == 0:
            return 0.0
        raw = np.max(np.abs(self.P.T @ self.omega_dst @ self.P - self.omega_src))
        return float(raw / max(1.0, np.linalg.norm(self.P, 2) ** 2))


@dataclass
class Section:
    """Affine hyperplane normal . x = offset, crossed in ``direction``."""

    normal: np.ndarray
    offset: float = 0.0
    direction: int = 1

    def __post_init__(self):
        self.normal = np.asarray(self.normal, dtype=float)
        if self.direction not in (1, -1):
            raise InputError("section direction must be +1 or -1")
        if not np.any(self.normal):
            raise InputError("section normal must be non-zero")

    def __call__(self, x):
        return x @ self.normal - self.offset

    @classmethod
    def from_config(cls, cfg):
        return cls(normal=cfg["normal"], offset=float(cfg.get("offset", 0.0)),
                   direction=int(cfg.get("direction", 1)))

    @classmethod
    def through(cls, x, index, direction=1):
        """Coordinate hyperplane x[index] = const passing through x."""
        normal = np.zeros(len(x))
        normal[index] = 1.0
        return cls(normal=normal, offset=float(x[index]), direction=direction)


@dataclass
class SectionReturn:
    y: np.ndarray
    tau: float
    crossings: int


def _unit_pair(sys, x, tol):
    g = sys.gradient(x)
    ng = np.linalg.norm(g)
    if ng <= tol:
        raise SingularPoint(f"{sys.name}: |grad H| = {ng:.3e} at x")
    g = g / ng
    return K.apply_j(g), g


def _complement(vectors, dim, skip):
    """Orthonormal completion of the orthonormal ``vectors`` using standard
    basis vectors, skipping the ``skip`` with largest projection."""
    weight = np.sum(vectors ** 2, axis=0)
    order = sorted(range(dim), key=lambda j: (-weight[j], j))
    keep = sorted(order[skip:])
    out = []
    for j in keep:
        v = np.zeros(dim)
        v[j] = 1.0
        for _ in range(2):
            for u in list(vectors) + out:
                v -= (u @ v) * u
        v /= np.linalg.norm(v)
        out.append(v)
    return np.array(out).T.reshape(dim, len(out))


def transversal_frame(sys, x, tol=SINGULAR_TOL):
    """Orthonormal basis of N_x, the orthogonal complement of X_H(x) and grad H(x)."""
    x = as_point(sys, x)
    f, g = _unit_pair(sys, x, tol)
    return TransversalFrame(x=x, basis=_complement(np.array([f, g]), sys.dim, 2))


def project_transversal(sys, x, w, tol=SINGULAR_TOL):
    """Orthogonal projection of the columns of w onto N_x."""
    f, g = _unit_pair(sys, x, tol)
    return w - np.outer(f, f @ w) - np.outer(g, g @ w)


def transport_frame(sys, x_dst, pushed, tol=SINGULAR_TOL):
    """Re-orthonormalize a pushed-forward frame inside N_{x_dst}.

    QR with a positive diagonal keeps the column orientation of ``pushed``.
    """
    w = project_transversal(sys, x_dst, pushed, tol)
    q, r = np.linalg.qr(w)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return TransversalFrame(x=np.asarray(x_dst, dtype=float), basis=q * signs)


def induced_form(sys, frame):
    """Matrix of the symplectic form restricted to N_x in frame coordinates."""
    b = frame.basis
    omega = b.T @ symplectic_matrix(sys.n) @ b
    omega = 0.5 * (omega - omega.T)  # exactly skew despite round-off
    if omega.size and abs(np.linalg.det(omega)) < 1e-12:
        raise DegenerateForm("induced form is degenerate on the frame")
    return omega


def linear_poincare(sys, x, t, policy=DEFAULT_POLICY, frame_src=None, frame_dst=None,
                    transport=False):
    """Matrix of the transversal linear Poincare flow from N_x to N_{X^t x}.

    ``frame_dst`` defaults to the canonical frame at the end point, or the
    transported image of ``frame_src`` when ``transport`` is set.
    """
    x = as_point(sys, x)
    check_start(sys, x, policy)
    src = frame_src if frame_src is not None else transversal_frame(sys, x, policy.singular_tol)
    x1, w = _advance_tangent(sys, x, src.basis, t, policy)
    if np.linalg.norm(sys.gradient(x1)) <= policy.singular_tol:
        raise SingularOnOrbit(f"{sys.name}: orbit reaches a singular point")
    if frame_dst is None:
        if transport:
            frame_dst = transport_frame(sys, x1, w, policy.singular_tol)
        else:
            frame_dst = transversal_frame(sys, x1, policy.singular_tol)
    P = frame_dst.basis.T @ w
    return LinearPoincareMap(P=P, frame_src=src, frame_dst=frame_dst, t=float(t),
                             omega_src=induced_form(sys, src),
                             omega_dst=induced_form(sys, frame_dst))


def _partial(sys, x, tau, policy):
    return _advance(sys, x, tau, policy) if tau else x


def section_return(sys, x, section, policy=DEFAULT_POLICY, max_time=1000.0, chunk=10.0,
                   tol=1e-10):
    """First positive-time crossing of ``section`` in its direction.

    The crossing step is found on the integrator grid, then the partial step
    size is located by bisection and polished with Newton steps.
    """
    x = as_point(sys, x)
    check_start(sys, x, policy)
    grad_s = section.normal
    if abs(grad_s @ sys.field(x)) <= tol * np.linalg.norm(grad_s):
        raise TangentialCrossing("flow is tangent to the section at the start point")
    method = _method(sys, policy)
    h = policy.step
    nchunk = max(1, int(round(chunk / h)))
    t0, cur, crossings = 0.0, x, 0
    while t0 < max_time:
        if sys.is_polynomial:
            pts, done, status = K.trajectory(sys.coeffs, sys.powers, cur, h, nchunk, method,
                                             policy.tol, policy.maxit)
            _raise(status, sys.name)
        else:
            pts = [cur]
            for _ in range(nchunk):
                pts.append(_advance(sys, pts[-1], h, policy))
            pts = np.array(pts)
        s = section(pts) * section.direction
        if t0 == 0.0 and abs(s[0]) <= 1e-8:
            s[0] = 0.0
        hit = np.nonzero((s[:-1] < 0) & (s[1:] >= 0))[0]
        sign_change = np.nonzero(np.sign(s[:-1]) * np.sign(s[1:]) < 0)[0]
        if hit.size:
            k = int(hit[0])
            crossings += int(np.sum(sign_change < k)) + 1
            tau = _locate(sys, section, pts[k], h, policy, tol)
            y = _partial(sys, pts[k], tau, policy)
            if abs(grad_s @ sys.field(y)) <= tol * np.linalg.norm(grad_s) * max(
                    1.0, np.linalg.norm(sys.field(y))):
                raise TangentialCrossing("flow is tangent to the section at the crossing")
            return SectionReturn(y=y, tau=t0 + k * h + tau, crossings=crossings)
        crossings += int(sign_change.size)
        t0 += nchunk * h
        cur = pts[-1]
    raise NoReturn(f"no return to the section within t = {max_time}")


def _locate(sys, section, xk, h, policy, tol):
    def g(tau):
        return section(_partial(sys, xk, tau, policy))

    lo, hi = 0.0, h
    glo = g(lo)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if (gm < 0) == (glo < 0):
            lo, glo = mid, gm
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    tau = hi
    for _ in range(5):
        y = _partial(sys, xk, tau, policy)
        val = section(y)
        if abs(val) <= 1e-3 * tol:
            break
        rate = section.normal @ sys.field(y)
        new = tau - val / rate
        if not lo - h * 1e-9 <= new <= hi + h * 1e-9:
            break
        tau = new
    return tau
