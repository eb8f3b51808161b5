"""Fixed-step integration of the Hamiltonian flow and its tangent flow."""
import csv
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import InputError, OrbitEscaped, SingularStart, StepRejected
from .hamsys import SINGULAR_TOL, as_point, symplectic_matrix

METHODS = {"implicit-midpoint": K.MIDPOINT, "leapfrog-if-separable": K.LEAPFROG,
           "rk4-reference": K.RK4}


@dataclass(frozen=True)
class Policy:
    step: float = 1e-3
    method: str = "implicit-midpoint"
    tol: float = 1e-12
    maxit: int = 50
    allow_singular: bool = False
    singular_tol: float = SINGULAR_TOL

    def __post_init__(self):
        if not self.step > 0:
            raise InputError("step must be positive")
        if self.method not in METHODS:
            raise InputError(f"unknown method {self.method!r}; choose from {sorted(METHODS)}")

    def replace(self, **kw):
        d = dict(self.__dict__)
        d.update(kw)
        return Policy(**d)


DEFAULT_POLICY = Policy()


@dataclass
class TrajectorySample:
    times: np.ndarray
    points: np.ndarray
    energy_drift: float


@dataclass
class TangentFlowResult:
    M: np.ndarray
    t: float
    symplectic_defect: float
    x_final: np.ndarray
    equivariance_defect: float


def symplectic_defect(M, J=None):
    """max-abs entry of M^T J M - J, scaled by max(1, |M|_2^2).

    The scaling keeps the number meaningful for strongly expanding maps,
    where the absolute residual is dominated by round-off in |M|^2.
    """
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0.0
    if J is None:
        J = symplectic_matrix(M.shape[0] // 2)
    raw = float(np.max(np.abs(M.T @ J @ M - J)))
    return raw / max(1.0, float(np.linalg.norm(M, 2)) ** 2)


def _method(sys, policy):
    code = METHODS[policy.method]
    if code == K.LEAPFROG and not sys.separable:
        raise InputError(f"{sys.name} is not separable; leapfrog is not allowed")
    return code


def _split(t, h):
    n = int(math.floor(abs(t) / h + 1e-9))
    rem = abs(t) - n * h
    if rem < 1e-15:
        rem = 0.0
    sign = 1.0 if t >= 0 else -1.0
    return n, sign * h, sign * rem


def _raise(status, where):
    if status == K.REJECTED:
        raise StepRejected(f"{where}: implicit solve did not converge")
    if status == K.NONFINITE:
        raise OrbitEscaped(f"{where}: state became non-finite")


def check_start(sys, x, policy):
    if not policy.allow_singular and np.linalg.norm(sys.gradient(x)) <= policy.singular_tol:
        raise SingularStart(f"{sys.name}: start point is singular (|grad H| <= {policy.singular_tol})")


# ---------------------------------------------------------- generic stepper
# Used for systems given only as Python callables.

def _g_midpoint(sys, x, h, tol, maxit):
    x1 = x + h * sys.field(x)
    scale = 1.0 + np.max(np.abs(x))
    for _ in range(maxit):
        xn = x + h * sys.field(0.5 * (x + x1))
        err = np.max(np.abs(xn - x1))
        x1 = xn
        if err <= tol * scale:
            return x1, K.OK
        if not np.isfinite(err):
            break
    x1 = x + h * sys.field(x)
    eye = np.eye(x.size)
    for _ in range(maxit):
        mid = 0.5 * (x + x1)
        g = x1 - x - h * sys.field(mid)
        dx = np.linalg.solve(eye - 0.5 * h * K.apply_j(sys.hessian(mid)), g)
        x1 = x1 - dx
        err = np.max(np.abs(dx))
        if err <= tol * scale:
            return x1, K.OK
        if not np.isfinite(err):
            return x1, K.NONFINITE
    return x1, K.REJECTED


def _g_step(sys, x, h, method, tol, maxit):
    n = sys.n
    if method == K.MIDPOINT:
        x1, status = _g_midpoint(sys, x, h, tol, maxit)
    elif method == K.LEAPFROG:
        x1 = x.copy()
        x1[n:] -= 0.5 * h * sys.gradient(x1)[:n]
        x1[:n] += h * sys.gradient(x1)[n:]
        x1[n:] -= 0.5 * h * sys.gradient(x1)[:n]
        status = K.OK
    else:
        k1 = sys.field(x)
        k2 = sys.field(x + 0.5 * h * k1)
        k3 = sys.field(x + 0.5 * h * k2)
        k4 = sys.field(x + h * k3)
        x1 = x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        status = K.OK
    if status == K.OK and not np.all(np.isfinite(x1)):
        status = K.NONFINITE
    return x1, status


def _g_tangent_step(sys, x, w, h, method, tol, maxit):
    n = sys.n
    if method == K.MIDPOINT:
        x1, status = _g_midpoint(sys, x, h, tol, maxit)
        if status != K.OK:
            return x1, w, status
        js = K.apply_j(sys.hessian(0.5 * (x + x1)))
        w1 = np.linalg.solve(np.eye(x.size) - 0.5 * h * js, w + 0.5 * h * (js @ w))
    elif method == K.LEAPFROG:
        x1, w1 = x.copy(), w.copy()
        hs = sys.hessian(x1)
        x1[n:] -= 0.5 * h * sys.gradient(x1)[:n]
        w1[n:] -= 0.5 * h * (hs[:n, :n] @ w1[:n])
        hs = sys.hessian(x1)
        x1[:n] += h * sys.gradient(x1)[n:]
        w1[:n] += h * (hs[n:, n:] @ w1[n:])
        hs = sys.hessian(x1)
        x1[n:] -= 0.5 * h * sys.gradient(x1)[:n]
        w1[n:] -= 0.5 * h * (hs[:n, :n] @ w1[:n])
    else:
        def jsm(y):
            return K.apply_j(sys.hessian(y))
        k1, l1 = sys.field(x), jsm(x) @ w
        x2 = x + 0.5 * h * k1
        k2, l2 = sys.field(x2), jsm(x2) @ (w + 0.5 * h * l1)
        x3 = x + 0.5 * h * k2
        k3, l3 = sys.field(x3), jsm(x3) @ (w + 0.5 * h * l2)
        x4 = x + h * k3
        k4, l4 = sys.field(x4), jsm(x4) @ (w + h * l3)
        x1 = x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        w1 = w + h / 6.0 * (l1 + 2 * l2 + 2 * l3 + l4)
    status = K.OK if np.all(np.isfinite(x1)) and np.all(np.isfinite(w1)) else K.NONFINITE
    return x1, w1, status


# ------------------------------------------------------------- dispatchers

def _advance(sys, x, t, policy):
    method = _method(sys, policy)
    n, h, last = _split(t, policy.step)
    if sys.is_polynomial:
        x1, status = K.advance(sys.coeffs, sys.powers, x, h, n, last, method,
                               policy.tol, policy.maxit)
    else:
        x1, status = x.copy(), K.OK
        for hk in [h] * n + ([last] if last else []):
            x1, status = _g_step(sys, x1, hk, method, policy.tol, policy.maxit)
            if status != K.OK:
                break
    _raise(status, sys.name)
    return x1


def _advance_tangent(sys, x, w, t, policy):
    method = _method(sys, policy)
    n, h, last = _split(t, policy.step)
    w = np.ascontiguousarray(w, dtype=float)
    if sys.is_polynomial:
        x1, w1, status = K.advance_tangent(sys.coeffs, sys.powers, x, w, h, n, last,
                                           method, policy.tol, policy.maxit)
    else:
        x1, w1, status = x.copy(), w.copy(), K.OK
        for hk in [h] * n + ([last] if last else []):
            x1, w1, status = _g_tangent_step(sys, x1, w1, hk, method, policy.tol, policy.maxit)
            if status != K.OK:
                break
    _raise(status, sys.name)
    return x1, w1


def sample_orbit(sys, x0, times, policy=DEFAULT_POLICY):
    """States X^t(x0) for arbitrary real ``times`` (returned in input order).

    Forward and backward times are integrated separately from x0, each in
    ascending |t| order.
    """
    x0 = as_point(sys, x0)
    times = np.asarray(times, dtype=float)
    out = np.empty((times.size, sys.dim))
    method = _method(sys, policy)
    for sign in (1.0, -1.0):
        idx = np.nonzero(times >= 0)[0] if sign > 0 else np.nonzero(times < 0)[0]
        if idx.size == 0:
            continue
        order = idx[np.argsort(np.abs(times[idx]), kind="stable")]
        abs_t = np.ascontiguousarray(np.abs(times[order]))
        if sys.is_polynomial:
            pts, status = K.sample_times(sys.coeffs, sys.powers, x0, abs_t, sign, policy.step,
                                         method, policy.tol, policy.maxit)
            _raise(status, sys.name)
        else:
            pts = np.empty((abs_t.size, sys.dim))
            x, cur = x0, 0.0
            for i, t in enumerate(abs_t):
                x = _advance(sys, x, sign * (t - cur), policy)
                cur = t
                pts[i] = x
        out[order] = pts
    return out


def integrate(sys, x0, t_final, policy=DEFAULT_POLICY, store_every=1):
    """Trajectory on the fixed step grid (plus a final partial step)."""
    x0 = as_point(sys, x0)
    if t_final < 0:
        raise InputError("t_final must be non-negative; use flow_at for backward time")
    check_start(sys, x0, policy)
    method = _method(sys, policy)
    n, h, last = _split(t_final, policy.step)
    if store_every == 1 and sys.is_polynomial:
        pts, done, status = K.trajectory(sys.coeffs, sys.powers, x0, h, n, method,
                                         policy.tol, policy.maxit)
        _raise(status, sys.name)
        times = h * np.arange(n + 1)
    else:
        pts, times = [x0], [0.0]
        x, k = x0, 0
        while k < n:
            m = min(store_every, n - k)
            x = _advance(sys, x, m * h, policy)
            k += m
            pts.append(x)
            times.append(k * h)
        pts, times = np.array(pts), np.array(times)
    if last:
        xl = _advance(sys, pts[-1], last, policy)
        pts = np.vstack([pts, xl])
        times = np.append(times, n * h + last)
    e0 = sys.energy(x0)
    drift = max(abs(sys.energy(p) - e0) for p in pts)
    return TrajectorySample(times=times, points=pts, energy_drift=float(drift))


def flow_at(sys, x0, t, policy=DEFAULT_POLICY):
    x0 = as_point(sys, x0)
    check_start(sys, x0, policy)
    return _advance(sys, x0, t, policy)


def tangent_flow(sys, x0, t, policy=DEFAULT_POLICY):
    """DX^t at x0 integrated jointly with the base point."""
    x0 = as_point(sys, x0)
    check_start(sys, x0, policy)
    x1, M = _advance_tangent(sys, x0, np.eye(sys.dim), t, policy)
    f1 = sys.field(x1)
    eq = float(np.linalg.norm(M @ sys.field(x0) - f1) / max(np.linalg.norm(f1), 1e-300))
    return TangentFlowResult(M=M, t=float(t), symplectic_defect=symplectic_defect(M),
                             x_final=x1, equivariance_defect=eq)


def write_trajectory_csv(path, sys, traj):
    n = sys.n
    header = ["t"] + [f"q{i + 1}" for i in range(n)] + [f"p{i + 1}" for i in range(n)]
    header.append("energy_error")
    e0 = sys.energy(traj.points[0])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for t, x in zip(traj.times, traj.points):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in x]
                       + [repr(float(sys.energy(x) - e0))])
