"""Pseudo-orbits and deterministic searches for shadowing-type properties.

Every search here is deterministic: fixed grids followed by a compass
(pattern) descent with step halving. A failed search means "not found
within budget", never a proof that no shadowing orbit exists. Because the
schedule does not depend on the budget, success at some budget implies
success at every larger one.
"""
import itertools
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels as K
from .errors import (BudgetExhausted, InputError, InsufficientSteps, JumpTooLarge,
                     NumericalError, OutOfWindow, TimeTooShort)
from .flow import DEFAULT_POLICY, flow_at, sample_orbit
from .hamsys import as_point
from .poincare import transversal_frame

SAMPLES_PER_SEGMENT = 20
RETURN_SLACK = 1e-3
SEMI_DECIDABLE = "failure means not found within budget, not proved absent"


# --------------------------------------------------------------- pseudo-orbits

@dataclass
class PseudoOrbit:
    """Finite window x_i, i = start_index .. start_index + N - 1, of a chain.

    Segment i starts at S(i) with S(0) = 0, S(i+1) = S(i) + t_i; points
    before index 0 sit at negative times.
    """

    sys: object
    points: np.ndarray
    times: np.ndarray
    delta: float
    T: float
    jump_errors: np.ndarray
    start_index: int = 0
    policy: object = DEFAULT_POLICY

    @property
    def indices(self):
        return np.arange(self.start_index, self.start_index + len(self.points))

    def point(self, i):
        k = i - self.start_index
        if not 0 <= k < len(self.points):
            raise OutOfWindow(f"index {i} outside the window")
        return self.points[k]

    @property
    def knots(self):
        """S(i) for every window index, plus the end of the last segment."""
        cum = np.concatenate([[0.0], np.cumsum(self.times)])
        return cum - cum[-self.start_index]

    @property
    def span(self):
        s = self.knots
        return float(s[0]), float(s[-1])

    def segment_of(self, t):
        s = self.knots
        lo, hi = s[0], s[-1]
        if not lo - 1e-12 <= t <= hi + 1e-12:
            raise OutOfWindow(f"time {t} outside the window [{lo}, {hi}]")
        k = int(np.searchsorted(s, t, side="right") - 1)
        return min(max(k, 0), len(self.points) - 1)

    def to_document(self):
        return {"delta": float(self.delta), "T": float(self.T),
                "start_index": int(self.start_index), "step": float(self.policy.step),
                "entries": [{"x": [float(v) for v in x], "t": float(t)}
                            for x, t in zip(self.points, self.times)]}


def build_pseudo_orbit(sys, points, times, delta, T, start_index=0, policy=DEFAULT_POLICY):
    """Validate a (delta, T)-pseudo-orbit and record its jump errors.

    ``times[i]`` is the flight time from ``points[i]`` before the jump to
    ``points[i + 1]``; the last time only sets the length of the final
    segment.
    """
    pts = np.array([as_point(sys, x) for x in points])
    times = np.asarray(times, dtype=float).reshape(-1)
    if len(pts) == 0 or len(times) != len(pts):
        raise InputError("need one flight time per point")
    if delta <= 0 or T <= 0:
        raise InputError("delta and T must be positive")
    if not start_index <= 0 < start_index + len(pts):
        raise InputError("the window must contain index 0")
    for k, t in enumerate(times):
        if t < T:
            raise TimeTooShort(start_index + k, t, T)
    errs = np.zeros(len(pts) - 1)
    for k in range(len(pts) - 1):
        errs[k] = np.linalg.norm(flow_at(sys, pts[k], times[k], policy) - pts[k + 1])
        if not errs[k] < delta:
            raise JumpTooLarge(start_index + k, float(errs[k]), delta)
    return PseudoOrbit(sys=sys, points=pts, times=times, delta=float(delta), T=float(T),
                       jump_errors=errs, start_index=int(start_index), policy=policy)


def load_pseudo_orbit(sys, doc, policy=None):
    """Parse a pseudo-orbit document; without ``policy`` the optional
    ``step`` recorded in the document sets the integrator step."""
    if isinstance(doc, str):
        with open(doc) as fh:
            doc = json.load(fh)
    try:
        if policy is None:
            policy = DEFAULT_POLICY
            if doc.get("step") is not None:
                policy = policy.replace(step=float(doc["step"]))
        pts = [e["x"] for e in doc["entries"]]
        ts = [e["t"] for e in doc["entries"]]
        return build_pseudo_orbit(sys, pts, ts, float(doc["delta"]), float(doc["T"]),
                                  int(doc.get("start_index", 0)), policy)
    except (KeyError, TypeError, AttributeError) as exc:
        raise InputError(f"malformed pseudo-orbit document: {exc}") from exc


def chain_eval(po, t):
    """x_0 * t: flow of the active segment's anchor point for t - S(i)."""
    k = po.segment_of(t)
    return flow_at(po.sys, po.points[k], t - po.knots[k], po.policy)


def chain_samples(po, per_segment=SAMPLES_PER_SEGMENT):
    """Sample times and chain points, ``per_segment`` per segment plus the end."""
    s = po.knots
    ts, pts = [], []
    frac = np.arange(per_segment) / per_segment
    for k in range(len(po.points)):
        local = frac * po.times[k]
        if k == len(po.points) - 1:
            local = np.append(local, po.times[k])
        ts.append(s[k] + local)
        pts.append(sample_orbit(po.sys, po.points[k], local, po.policy))
    return np.concatenate(ts), np.vstack(pts)


# ----------------------------------------------------------- reparametrization

@dataclass
class Reparametrization:
    """Increasing piecewise-linear alpha through (0, 0)."""

    t: np.ndarray
    alpha: np.ndarray
    epsilon_class: float

    @classmethod
    def from_slopes(cls, knots, slopes, epsilon_class, zero_index):
        """Slope ``slopes[k]`` on [knots[k], knots[k+1]], anchored at knots[zero_index] = 0."""
        knots = np.asarray(knots, dtype=float)
        slopes = np.asarray(slopes, dtype=float)
        a = np.zeros_like(knots)
        for k in range(zero_index, len(knots) - 1):
            a[k + 1] = a[k] + slopes[k] * (knots[k + 1] - knots[k])
        for k in range(zero_index - 1, -1, -1):
            a[k] = a[k + 1] - slopes[k] * (knots[k + 1] - knots[k])
        return cls(t=knots, alpha=a, epsilon_class=float(epsilon_class))

    @classmethod
    def identity(cls, knots, epsilon_class):
        knots = np.asarray(knots, dtype=float)
        return cls(t=knots, alpha=knots.copy(), epsilon_class=float(epsilon_class))

    def __call__(self, t):
        return np.interp(t, self.t, self.alpha)

    def max_ratio_defect(self):
        nz = np.abs(self.t) > 0
        if not nz.any():
            return 0.0
        return float(np.max(np.abs(self.alpha[nz] / self.t[nz] - 1.0)))

    def in_class(self, eps=None):
        eps = self.epsilon_class if eps is None else eps
        increasing = bool(np.all(np.diff(self.alpha) > 0))
        return increasing and self.max_ratio_defect() < eps

    def to_document(self):
        return {"breakpoints": [[float(a), float(b)] for a, b in zip(self.t, self.alpha)],
                "epsilon_class": self.epsilon_class}


@dataclass
class ShadowReport:
    success: bool
    z: Optional[np.ndarray]
    alpha: Optional[Reparametrization]
    achieved_eps: float
    budget_spent: int
    eps: float = 0.0
    budget: int = 0
    kind: str = "shadow"
    notes: list = field(default_factory=lambda: [SEMI_DECIDABLE])

    def to_report(self):
        return {"kind": self.kind, "success": bool(self.success),
                "z": None if self.z is None else [float(v) for v in self.z],
                "alpha": None if self.alpha is None else self.alpha.to_document(),
                "achieved_eps": float(self.achieved_eps), "eps": float(self.eps),
                "budget_spent": int(self.budget_spent), "budget": int(self.budget),
                "notes": list(self.notes)}


# --------------------------------------------------------------- search core

class _Counter:
    def __init__(self, f, budget, target):
        self.f, self.budget, self.target = f, budget, target
        self.spent = 0
        self.best_x, self.best_f = None, np.inf

    @property
    def done(self):
        return self.best_f < self.target or self.spent >= self.budget

    def __call__(self, x):
        self.spent += 1
        try:
            v = float(self.f(x))
        except (ArithmeticError, FloatingPointError):
            v = np.inf
        if not np.isfinite(v):
            v = np.inf
        if v < self.best_f:
            self.best_x, self.best_f = np.array(x, dtype=float), v
        return v


def _pattern_descent(ev, x, fx, steps, lower=None, upper=None, min_step=1e-13):
    """Compass search: try +-step along each coordinate in order, accept the
    first strict improvement, halve all steps after a fruitless sweep."""
    x = np.array(x, dtype=float)
    steps = np.array(steps, dtype=float)
    while not ev.done and np.max(steps) > min_step:
        improved = False
        for j in range(x.size):
            for sgn in (1.0, -1.0):
                if ev.done:
                    return x, fx
                y = x.copy()
                y[j] += sgn * steps[j]
                if lower is not None:
                    y = np.clip(y, lower, upper)
                if y[j] == x[j]:
                    continue
                fy = ev(y)
                if fy < fx:
                    x, fx, improved = y, fy, True
                    break
        if not improved:
            steps *= 0.5
    return x, fx


def _finish(ev, eps, budget, kind, build, raise_on_failure, notes=()):
    ok = ev.best_f < eps
    z, alpha = build(ev.best_x) if ev.best_x is not None else (None, None)
    rep = ShadowReport(success=bool(ok), z=z, alpha=alpha, achieved_eps=float(ev.best_f),
                       budget_spent=ev.spent, eps=eps, budget=budget, kind=kind,
                       notes=[SEMI_DECIDABLE] + list(notes))
    if not ok and raise_on_failure:
        raise BudgetExhausted(rep)
    return rep


# ------------------------------------------------------------------ shadowing

def shadow_search(po, eps, budget=2000, rep_eps=None, radius=None,
                  per_segment=SAMPLES_PER_SEGMENT, raise_on_failure=False):
    """Search z and alpha in Rep(rep_eps) with sup_t d(X^alpha(t) z, x_0 * t) < eps.

    Unknowns are z (a ball of ``radius`` around x_0) and one slope per
    segment in [1 - rep_eps, 1 + rep_eps] (clipped slightly inside). The
    centre (z = x_0, identity) is tried first, then a 3^{2n} grid of z
    times a common slope in {1 - rep_eps, 1, 1 + rep_eps}, then compass
    descent on all unknowns.
    """
    if eps <= 0:
        raise InputError("eps must be positive")
    rep_eps = eps if rep_eps is None else rep_eps
    radius = eps if radius is None else radius
    sys, pol = po.sys, po.policy
    ts, chain = chain_samples(po, per_segment)
    knots = po.knots
    nseg = len(po.points)
    zero = -po.start_index
    x0 = po.point(0)
    d = sys.dim
    smax = 0.999 * rep_eps

    def alpha_of(slopes):
        return Reparametrization.from_slopes(knots, slopes, rep_eps, zero)

    def objective(v):
        z = v[:d]
        a = alpha_of(v[d:])
        orbit = sample_orbit(sys, z, a(ts), pol)
        return np.max(np.linalg.norm(orbit - chain, axis=1))

    ev = _Counter(objective, budget, eps)
    start = np.concatenate([x0, np.ones(nseg)])
    ev(start)
    for offs in itertools.product((0.0, -1.0, 1.0), repeat=d):
        for c in (1.0, 1.0 - smax, 1.0 + smax):
            if ev.done:
                break
            if not any(offs) and c == 1.0:
                continue
            ev(np.concatenate([x0 + radius * np.array(offs), np.full(nseg, c)]))
    if not ev.done:
        steps = np.concatenate([np.full(d, radius / 2), np.full(nseg, smax / 2)])
        lower = np.concatenate([np.full(d, -np.inf), np.full(nseg, 1.0 - smax)])
        upper = np.concatenate([np.full(d, np.inf), np.full(nseg, 1.0 + smax)])
        _pattern_descent(ev, ev.best_x, ev.best_f, steps, lower, upper)

    def build(v):
        return v[:d].copy(), alpha_of(v[d:])

    return _finish(ev, eps, budget, "shadow", build, raise_on_failure)


def _polyline_distance(points, curve):
    """Distance from each point to the polyline through ``curve``."""
    a, b = curve[:-1], curve[1:]
    ab = b - a
    den = np.maximum(np.sum(ab * ab, axis=1), 1e-300)
    out = np.empty(len(points))
    for k, p in enumerate(points):
        s = np.clip(np.sum((p - a) * ab, axis=1) / den, 0.0, 1.0)
        out[k] = np.min(np.linalg.norm(a + s[:, None] * ab - p, axis=1))
    return out


def weak_shadow_search(po, eps, budget=500, per_segment=SAMPLES_PER_SEGMENT,
                       raise_on_failure=False):
    """Search z whose sampled orbit passes within eps of every x_i (as a set).

    The orbit of z is sampled over [-L, L] with L the window length.
    Candidates are the chain points themselves, followed by compass descent
    from the best one.
    """
    if eps <= 0:
        raise InputError("eps must be positive")
    sys, pol = po.sys, po.policy
    lo, hi = po.span
    L = hi - lo
    nsamp = max(2, int(per_segment * len(po.points)))
    grid = np.linspace(-L, L, 2 * nsamp + 1)
    targets = po.points

    def objective(z):
        return float(np.max(_polyline_distance(targets, sample_orbit(sys, z, grid, pol))))

    ev = _Counter(objective, budget, eps)
    seen = []
    for x in targets:
        if ev.done:
            break
        if any(np.array_equal(x, s) for s in seen):
            continue
        seen.append(x)
        ev(x)
    if not ev.done:
        _pattern_descent(ev, ev.best_x, ev.best_f, np.full(sys.dim, eps / 2))
    return _finish(ev, eps, budget, "weak-shadow", lambda v: (v.copy(), None),
                   raise_on_failure)


# ---------------------------------------------------------------- expansiveness

@dataclass
class ExpansivenessVerdict:
    verdict: str
    exit_time: Optional[float] = None
    witness: Optional[np.ndarray] = None
    probes: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def to_report(self):
        return {"verdict": self.verdict, "exit_time": self.exit_time,
                "witness": None if self.witness is None else [float(v) for v in self.witness],
                "probes": self.probes, "notes": list(self.notes)}


def _exit_time(a, b, delta, dt):
    prof = K.frechet_profile(np.ascontiguousarray(a), np.ascontiguousarray(b))
    over = np.nonzero(prof > delta)[0]
    return None if over.size == 0 else float(over[0] * dt)


def _probe_directions(sys, x, tol):
    fr = transversal_frame(sys, x, tol).basis
    if fr.shape[1]:
        return [fr[:, j] for j in range(fr.shape[1])]
    g = sys.gradient(x)
    return [g / np.linalg.norm(g)]


def expansiveness_probe(sys, x, delta, T_window, eps, d0=None, dt=0.01, policy=DEFAULT_POLICY):
    """Look for points that stay delta-close to the orbit of x under some
    monotone time alignment without lying on it.

    Probes y = x +- d0 v for the transversal frame vectors v (the gradient
    direction when n = 1). For each probe the prefix alignment cost of the
    two sampled orbits is computed forward and backward from t = 0; the
    probe separates at the first time that cost exceeds delta. The verdict
    is ``separated`` (exit time = slowest probe) when every probe
    separates, ``non_expansive_witness`` when a probe never does and is
    not X^s(x) for |s| <= eps, else ``inconclusive``. One-degree-of-freedom
    systems are capped at ``inconclusive``.
    """
    x = as_point(sys, x)
    d0 = delta * 1e-3 if d0 is None else d0
    n = int(round(T_window / dt))
    fwd = np.linspace(0.0, n * dt, n + 1)
    try:
        ax_f = sample_orbit(sys, x, fwd, policy)
        ax_b = sample_orbit(sys, x, -fwd, policy)
    except NumericalError as exc:
        return ExpansivenessVerdict(verdict="inconclusive",
                                    notes=[f"orbit of x not resolved on the window: {exc}"])
    near = sample_orbit(sys, x, np.linspace(-eps, eps, 201), policy)
    probes, exits, witness = [], [], None
    for v in _probe_directions(sys, x, policy.singular_tol):
        for sgn in (1.0, -1.0):
            y = x + sgn * d0 * v
            try:
                tf = _exit_time(ax_f, sample_orbit(sys, y, fwd, policy), delta, dt)
                tb = _exit_time(ax_b, sample_orbit(sys, y, -fwd, policy), delta, dt)
            except NumericalError:
                probes.append({"y": [float(c) for c in y], "forward_exit": None,
                               "backward_exit": None, "escaped": True})
                continue
            times = [t for t in (tf, tb) if t is not None]
            probes.append({"y": [float(c) for c in y], "forward_exit": tf, "backward_exit": tb})
            if times:
                exits.append(min(times))
            elif witness is None:
                on_orbit = float(np.min(_polyline_distance(y[None, :], near))) <= 1e-9
                if not on_orbit:
                    witness = y
    notes = []
    if witness is not None:
        verdict = "non_expansive_witness"
    elif len(exits) == len(probes):
        verdict = "separated"
    else:
        verdict = "inconclusive"
    if sys.n == 1:
        notes.append("one degree of freedom: local expansiveness is not certified by probing")
        verdict = "inconclusive"
    return ExpansivenessVerdict(verdict=verdict,
                                exit_time=max(exits) if exits and verdict == "separated" else None,
                                witness=witness, probes=probes, notes=notes)


# ----------------------------------------------------------- weak specification

def weak_spec_check(sys, arc1, arc2, K_gap, eps, budget=2000, per_unit=SAMPLES_PER_SEGMENT,
                    policy=DEFAULT_POLICY, raise_on_failure=False):
    """Search x with d(X^t x, P(t)) < eps on I1 and I2.

    Each arc is ``(p, (a, b))`` with P(t) = X^{t - a}(p) on [a, b]. The
    candidates X^{-a1}(p1) and X^{-a2}(p2) are tried first, then compass
    descent from the better one.
    """
    (p1, (a1, b1)), (p2, (a2, b2)) = arc1, arc2
    if not (a1 <= b1 and a2 <= b2):
        raise InputError("arc intervals must be ordered")
    if a2 < b1 + K_gap:
        raise InputError("second arc must start at least K after the first ends")
    p1, p2 = as_point(sys, p1), as_point(sys, p2)

    def grid(a, b):
        return np.linspace(a, b, max(2, int(np.ceil(per_unit * (b - a))) + 1))

    t1, t2 = grid(a1, b1), grid(a2, b2)
    target = np.vstack([sample_orbit(sys, p1, t1 - a1, policy),
                        sample_orbit(sys, p2, t2 - a2, policy)])
    ts = np.concatenate([t1, t2])

    def objective(xv):
        return np.max(np.linalg.norm(sample_orbit(sys, xv, ts, policy) - target, axis=1))

    ev = _Counter(objective, budget, eps)
    for p, a in ((p1, a1), (p2, a2)):
        if not ev.done:
            ev(flow_at(sys, p, -a, policy))
    if not ev.done:
        _pattern_descent(ev, ev.best_x, ev.best_f, np.full(sys.dim, eps / 2))
    return _finish(ev, eps, budget, "weak-spec", lambda v: (v.copy(), None), raise_on_failure)


# -------------------------------------------------------------- breakdown chain

def breakdown_pseudo_orbit(sys, q, y, delta, k, period, tail=3, policy=DEFAULT_POLICY):
    """Chain that rests at q, drifts to y in k equal jumps, then rests at y.

    Indices -tail..0 sit at q, 1..k move linearly to y, k+1..k+tail sit at
    y; every flight time is ``period``. The result is validated with
    T = period * (1 - 1e-3).
    """
    q, y = as_point(sys, q), as_point(sys, y)
    if k < 1:
        raise InputError("k must be at least 1")
    dist = float(np.linalg.norm(y - q))
    if k * delta < dist:
        raise InsufficientSteps(f"k * delta = {k * delta:.4g} < d(q, y) = {dist:.4g}")
    pts = [q] * (tail + 1)
    pts += [q + (i / k) * (y - q) for i in range(1, k + 1)]
    pts += [y] * tail
    times = np.full(len(pts), float(period))
    return build_pseudo_orbit(sys, pts, times, delta, period * (1 - RETURN_SLACK),
                              start_index=-tail, policy=policy)
