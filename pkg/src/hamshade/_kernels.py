"""Hot loops for polynomial Hamiltonians.

A polynomial H is stored as ``coeffs`` (m,) and integer ``powers`` (m, 2n);
coordinates are ordered (q1..qn, p1..pn). Every kernel here is compiled
with numba unless ``HAMSHADE_NO_JIT`` is set, in which case the identical
source runs under CPython.

Integrator methods: 0 implicit midpoint, 1 leapfrog (separable H only),
2 classical RK4. Status codes: 0 ok, 1 implicit solve did not converge,
2 non-finite state.
"""
import numpy as np

from ._jit import njit

MIDPOINT = 0
LEAPFROG = 1
RK4 = 2

OK = 0
REJECTED = 1
NONFINITE = 2


@njit
def poly_value(coeffs, powers, x):
    total = 0.0
    for k in range(coeffs.shape[0]):
        term = coeffs[k]
        for j in range(x.shape[0]):
            e = powers[k, j]
            if e != 0:
                term *= x[j] ** e
        total += term
    return total


@njit
def poly_grad(coeffs, powers, x):
    d = x.shape[0]
    g = np.zeros(d)
    for k in range(coeffs.shape[0]):
        for j in range(d):
            e = powers[k, j]
            if e == 0:
                continue
            term = coeffs[k] * e * x[j] ** (e - 1)
            for l in range(d):
                if l != j and powers[k, l] != 0:
                    term *= x[l] ** powers[k, l]
            g[j] += term
    return g


@njit
def poly_hess(coeffs, powers, x):
    d = x.shape[0]
    hm = np.zeros((d, d))
    for k in range(coeffs.shape[0]):
        for i in range(d):
            ei = powers[k, i]
            if ei == 0:
                continue
            for j in range(i, d):
                ej = powers[k, j]
                if i == j:
                    if ei < 2:
                        continue
                    term = coeffs[k] * ei * (ei - 1) * x[i] ** (ei - 2)
                else:
                    if ej == 0:
                        continue
                    term = coeffs[k] * ei * ej * x[i] ** (ei - 1) * x[j] ** (ej - 1)
                for l in range(d):
                    if l != i and l != j and powers[k, l] != 0:
                        term *= x[l] ** powers[k, l]
                hm[i, j] += term
                if i != j:
                    hm[j, i] += term
    return hm


@njit
def apply_j(v):
    """J @ v for v of shape (2n,) or (2n, k), J = [[0, I], [-I, 0]]."""
    n = v.shape[0] // 2
    out = np.empty_like(v)
    out[:n] = v[n:]
    out[n:] = -v[:n]
    return out


@njit
def field(coeffs, powers, x):
    return apply_j(poly_grad(coeffs, powers, x))


@njit
def _finite(x):
    return bool(np.all(np.isfinite(x)))


@njit
def midpoint_step(coeffs, powers, x, h, tol, maxit):
    x1 = x + h * field(coeffs, powers, x)
    scale = 1.0 + np.max(np.abs(x))
    for _ in range(maxit):
        xn = x + h * field(coeffs, powers, 0.5 * (x + x1))
        err = np.max(np.abs(xn - x1))
        x1 = xn
        if err <= tol * scale:
            return x1, OK
        if not np.isfinite(err):
            break
    # fixed point stalled: Newton on G(x1) = x1 - x - h J grad(mid)
    d = x.shape[0]
    x1 = x + h * field(coeffs, powers, x)
    eye = np.eye(d)
    for _ in range(maxit):
        mid = 0.5 * (x + x1)
        g = x1 - x - h * field(coeffs, powers, mid)
        jac = eye - 0.5 * h * apply_j(poly_hess(coeffs, powers, mid))
        dx = np.linalg.solve(jac, g)
        x1 = x1 - dx
        err = np.max(np.abs(dx))
        if err <= tol * scale:
            return x1, OK
        if not np.isfinite(err):
            return x1, NONFINITE
    return x1, REJECTED


@njit
def leapfrog_step(coeffs, powers, x, h):
    n = x.shape[0] // 2
    y = x.copy()
    g = poly_grad(coeffs, powers, y)
    y[n:] -= 0.5 * h * g[:n]
    g = poly_grad(coeffs, powers, y)
    y[:n] += h * g[n:]
    g = poly_grad(coeffs, powers, y)
    y[n:] -= 0.5 * h * g[:n]
    return y


@njit
def rk4_step(coeffs, powers, x, h):
    k1 = field(coeffs, powers, x)
    k2 = field(coeffs, powers, x + 0.5 * h * k1)
    k3 = field(coeffs, powers, x + 0.5 * h * k2)
    k4 = field(coeffs, powers, x + h * k3)
    return x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@njit
def step(coeffs, powers, x, h, method, tol, maxit):
    if method == MIDPOINT:
        x1, status = midpoint_step(coeffs, powers, x, h, tol, maxit)
    elif method == LEAPFROG:
        x1 = leapfrog_step(coeffs, powers, x, h)
        status = OK
    else:
        x1 = rk4_step(coeffs, powers, x, h)
        status = OK
    if status == OK and not _finite(x1):
        status = NONFINITE
    return x1, status


@njit
def tangent_step(coeffs, powers, x, w, h, method, tol, maxit):
    """Advance the state and a block of tangent vectors ``w`` (2n, k).

    For the midpoint rule the tangent update is the exact derivative of the
    discrete map, i.e. the Cayley transform of h*J*Hess at the midpoint, so
    the product of updates is symplectic to round-off.
    """
    d = x.shape[0]
    n = d // 2
    if method == MIDPOINT:
        x1, status = midpoint_step(coeffs, powers, x, h, tol, maxit)
        if status != OK:
            return x1, w, status
        js = apply_j(poly_hess(coeffs, powers, 0.5 * (x + x1)))
        eye = np.eye(d)
        w1 = np.linalg.solve(eye - 0.5 * h * js, w + 0.5 * h * (js @ w))
    elif method == LEAPFROG:
        y = x.copy()
        w1 = w.copy()
        hs = poly_hess(coeffs, powers, y)
        g = poly_grad(coeffs, powers, y)
        y[n:] -= 0.5 * h * g[:n]
        w1[n:] -= 0.5 * h * (np.ascontiguousarray(hs[:n, :n]) @ np.ascontiguousarray(w1[:n]))
        hs = poly_hess(coeffs, powers, y)
        g = poly_grad(coeffs, powers, y)
        y[:n] += h * g[n:]
        w1[:n] += h * (np.ascontiguousarray(hs[n:, n:]) @ np.ascontiguousarray(w1[n:]))
        hs = poly_hess(coeffs, powers, y)
        g = poly_grad(coeffs, powers, y)
        y[n:] -= 0.5 * h * g[:n]
        w1[n:] -= 0.5 * h * (np.ascontiguousarray(hs[:n, :n]) @ np.ascontiguousarray(w1[:n]))
        x1 = y
        status = OK
    else:
        k1 = field(coeffs, powers, x)
        l1 = apply_j(poly_hess(coeffs, powers, x)) @ w
        x2 = x + 0.5 * h * k1
        k2 = field(coeffs, powers, x2)
        l2 = apply_j(poly_hess(coeffs, powers, x2)) @ (w + 0.5 * h * l1)
        x3 = x + 0.5 * h * k2
        k3 = field(coeffs, powers, x3)
        l3 = apply_j(poly_hess(coeffs, powers, x3)) @ (w + 0.5 * h * l2)
        x4 = x + h * k3
        k4 = field(coeffs, powers, x4)
        l4 = apply_j(poly_hess(coeffs, powers, x4)) @ (w + h * l3)
        x1 = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        w1 = w + h / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4)
        status = OK
    if status == OK and not (_finite(x1) and _finite(w1)):
        status = NONFINITE
    return x1, w1, status


@njit
def advance(coeffs, powers, x0, h, nsteps, last, method, tol, maxit):
    """Take ``nsteps`` steps of size h followed by one step of size ``last``
    (skipped when zero)."""
    x = x0.copy()
    for _ in range(nsteps):
        x, status = step(coeffs, powers, x, h, method, tol, maxit)
        if status != OK:
            return x, status
    if last != 0.0:
        x, status = step(coeffs, powers, x, last, method, tol, maxit)
        if status != OK:
            return x, status
    return x, OK


@njit
def advance_tangent(coeffs, powers, x0, w0, h, nsteps, last, method, tol, maxit):
    x = x0.copy()
    w = w0.copy()
    for _ in range(nsteps):
        x, w, status = tangent_step(coeffs, powers, x, w, h, method, tol, maxit)
        if status != OK:
            return x, w, status
    if last != 0.0:
        x, w, status = tangent_step(coeffs, powers, x, w, last, method, tol, maxit)
        if status != OK:
            return x, w, status
    return x, w, OK


@njit
def trajectory(coeffs, powers, x0, h, nsteps, method, tol, maxit):
    """All ``nsteps + 1`` states of a fixed-step run; rows past a failure
    are NaN."""
    d = x0.shape[0]
    out = np.full((nsteps + 1, d), np.nan)
    out[0] = x0
    x = x0.copy()
    for k in range(nsteps):
        x, status = step(coeffs, powers, x, h, method, tol, maxit)
        if status != OK:
            return out, k, status
        out[k + 1] = x
    return out, nsteps, OK


@njit
def sample_times(coeffs, powers, x0, times, direction, h, method, tol, maxit):
    """States at ``direction * times[i]`` for ascending non-negative times."""
    d = x0.shape[0]
    out = np.full((times.shape[0], d), np.nan)
    x = x0.copy()
    cur = 0.0
    for i in range(times.shape[0]):
        dt = times[i] - cur
        if dt > 0.0:
            n = int(np.floor(dt / h + 1e-9))
            rem = dt - n * h
            if rem < 1e-15:
                rem = 0.0
            x, status = advance(coeffs, powers, x, direction * h, n, direction * rem,
                                method, tol, maxit)
            if status != OK:
                return out, status
            cur = times[i]
        out[i] = x
    return out, OK


@njit
def frechet_profile(a, b):
    """Prefix min-max alignment cost of two sampled curves.

    Entry k is the smallest achievable max distance over monotone couplings
    of a[0..k] with any prefix b[0..j], both starting at index 0.
    """
    na = a.shape[0]
    nb = b.shape[0]
    prev = np.empty(nb)
    cur = np.empty(nb)
    prof = np.empty(na)
    for j in range(nb):
        dj = np.sqrt(np.sum((a[0] - b[j]) ** 2))
        prev[j] = dj if j == 0 else max(prev[j - 1], dj)
    prof[0] = np.min(prev)
    for k in range(1, na):
        for j in range(nb):
            dkj = np.sqrt(np.sum((a[k] - b[j]) ** 2))
            best = prev[j]
            if j > 0:
                if cur[j - 1] < best:
                    best = cur[j - 1]
                if prev[j - 1] < best:
                    best = prev[j - 1]
            cur[j] = max(dkj, best)
        prof[k] = np.min(cur)
        for j in range(nb):
            prev[j] = cur[j]
    return prof
