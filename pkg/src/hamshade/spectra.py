"""Transversal Lyapunov spectra by repeated QR of the linear Poincare flow."""
import csv
import math
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .errors import IndexOutOfRange, InputError, OrbitEscaped, SingularOnOrbit
from .flow import DEFAULT_POLICY, _advance, _advance_tangent, check_start
from .hamsys import as_point
from .poincare import project_transversal, transversal_frame


@dataclass
class LyapunovSpectrum:
    exponents: np.ndarray
    T: float
    renorm_interval: float
    pairing_defect: float
    sum_defect: float
    full: bool = False
    progress: List[tuple] = field(default_factory=list, repr=False)


def spectrum_diagnostics(spec):
    """Mirror-pair and total-sum defects of a sorted spectrum."""
    lam = np.sort(np.asarray(getattr(spec, "exponents", spec), dtype=float))[::-1]
    if lam.size == 0:
        return {"pairing_defect": 0.0, "sum_defect": 0.0}
    return {"pairing_defect": float(np.max(np.abs(lam + lam[::-1]))),
            "sum_defect": float(abs(np.sum(lam)))}


def volume_growth(spec, i):
    lam = np.sort(np.asarray(getattr(spec, "exponents", spec), dtype=float))[::-1]
    if not 1 <= i <= lam.size:
        raise IndexOutOfRange(f"i must lie in [1, {lam.size}]")
    return float(np.sum(lam[:i]))


def _qr_positive(w):
    q, r = np.linalg.qr(w)
    d = np.diag(r)
    signs = np.where(d < 0, -1.0, 1.0)
    return q * signs, np.abs(d)


def lyapunov_spectrum(sys, x0, T, policy=DEFAULT_POLICY, renorm=1.0, bound=1e6, full=False,
                      progress_every=None):
    """Benettin estimate of the 2n-2 transversal exponents along X^t(x0).

    The transversal frame is advanced by the tangent flow for ``renorm``
    time units, projected back onto N_x, and re-orthonormalized; the logs of
    the QR diagonal are averaged over [0, T]. With ``full`` the whole tangent
    space is used without projection (exposes the trivial zero pair).
    """
    x = as_point(sys, x0)
    if T <= 0 or renorm <= 0:
        raise InputError("T and renorm must be positive")
    check_start(sys, x, policy)
    w = np.eye(sys.dim) if full else transversal_frame(sys, x, policy.singular_tol).basis
    sums = np.zeros(w.shape[1])
    t, rows = 0.0, []
    next_report = progress_every
    while t < T - 1e-12:
        dt = min(renorm, T - t)
        x, w = _advance_tangent(sys, x, w, dt, policy)
        t += dt
        if not np.all(np.abs(x) <= bound):
            raise OrbitEscaped(f"{sys.name}: orbit left |x| <= {bound} at t = {t:.6g}")
        if not full:
            if np.linalg.norm(sys.gradient(x)) <= policy.singular_tol:
                raise SingularOnOrbit(f"{sys.name}: orbit reaches a singular point")
            w = project_transversal(sys, x, w, policy.singular_tol)
        w, d = _qr_positive(w)
        sums += np.log(d)
        if next_report is not None and t >= next_report - 1e-9:
            lam = np.sort(sums / t)[::-1]
            rows.append((t, lam, spectrum_diagnostics(lam)))
            next_report += progress_every
    lam = np.sort(sums / T)[::-1]
    diag = spectrum_diagnostics(lam)
    return LyapunovSpectrum(exponents=lam, T=float(T), renorm_interval=float(renorm),
                            pairing_defect=diag["pairing_defect"], sum_defect=diag["sum_defect"],
                            full=full, progress=rows)


def two_trajectory_estimate(sys, x0, T, policy=DEFAULT_POLICY, d0=1e-8, renorm=1.0):
    """Largest exponent from the divergence of a nearby trajectory, rescaled
    back to distance ``d0`` every ``renorm`` time units."""
    x = as_point(sys, x0)
    check_start(sys, x, policy)
    v = transversal_frame(sys, x, policy.singular_tol).basis.sum(axis=1)
    y = x + d0 * v / np.linalg.norm(v)
    total, t = 0.0, 0.0
    while t < T - 1e-12:
        dt = min(renorm, T - t)
        x = _advance(sys, x, dt, policy)
        y = _advance(sys, y, dt, policy)
        t += dt
        d = np.linalg.norm(y - x)
        total += math.log(d / d0)
        y = x + (d0 / d) * (y - x)
    return total / T


def write_spectrum_csv(path, spec):
    k = spec.exponents.size
    header = ["T"] + [f"lambda_{i + 1}" for i in range(k)] + ["pairing_defect", "sum_defect"]
    rows = list(spec.progress)
    if not rows or abs(rows[-1][0] - spec.T) > 1e-9:
        rows.append((spec.T, spec.exponents, spectrum_diagnostics(spec)))
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(header)
        for t, lam, diag in rows:
            out.writerow([repr(float(t))] + [repr(float(v)) for v in lam]
                         + [repr(diag["pairing_defect"]), repr(diag["sum_defect"])])
