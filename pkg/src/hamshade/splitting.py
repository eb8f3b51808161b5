"""Finite-sample tests of hyperbolic, dominated and partially hyperbolic splittings.

Checks act on a *cocycle*: anything with ``dim``, ``nsamples``,
``matrix(k, t)`` returning the linear map from the fibre at sample ``k`` to
the fibre at its time-``t`` image in orthonormal frame coordinates, and
``chain(k, t, pieces)`` splitting that map into consecutive factors.
Blocks of a :class:`CandidateSplitting` are ordered by decreasing growth
rate, so block 0 is the most expanding one.
"""
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.linalg import expm

from .errors import InputError, RankCollapse
from .flow import DEFAULT_POLICY, sample_orbit
from .hamsys import as_point, symplectic_matrix
from .poincare import linear_poincare

THETA = 0.5
SLACK = 1e-6
SAMPLE_NOTE = "verdict holds on the sampled points only, not on an invariant set"
MIRROR_NOTE = ("a dominated splitting of a symplectic cocycle forces partial hyperbolicity; "
               "re-tested with the weaker block split by mirror dimension")


class LinearCocycle:
    """Constant cocycle t -> expm(t A) over a single (or repeated) base point."""

    def __init__(self, A, omega=None, nsamples=1):
        self.A = np.asarray(A, dtype=float)
        if self.A.ndim != 2 or self.A.shape[0] != self.A.shape[1]:
            raise InputError("generator must be square")
        self.dim = self.A.shape[0]
        self.nsamples = int(nsamples)
        self.omega = omega
        self._cache = {}

    @classmethod
    def diagonal(cls, rates):
        return cls(np.diag(np.asarray(rates, dtype=float)))

    @classmethod
    def hamiltonian(cls, S):
        """Generator J S of a linear Hamiltonian system with symmetric S."""
        S = np.asarray(S, dtype=float)
        n = S.shape[0] // 2
        return cls(symplectic_matrix(n) @ S, omega=symplectic_matrix(n))

    def matrix(self, k, t):
        key = float(t)
        if key not in self._cache:
            self._cache[key] = expm(key * self.A)
        return self._cache[key]

    def chain(self, k, t, pieces):
        return [self.matrix(k, t / pieces)] * pieces


class OrbitCocycle:
    """Transversal linear Poincare flow sampled along one trajectory.

    Samples are ``X^{k * spacing}(x0)`` for k < nsamples; fibres carry the
    canonical transversal frame.
    """

    def __init__(self, sys, x0, nsamples=10, spacing=1.0, policy=DEFAULT_POLICY):
        self.sys = sys
        self.policy = policy
        self.points = sample_orbit(sys, as_point(sys, x0), spacing * np.arange(nsamples), policy)
        self.nsamples = int(nsamples)
        self.dim = sys.dim - 2
        self._cache = {}

    def matrix(self, k, t):
        key = (int(k), float(t))
        if key not in self._cache:
            self._cache[key] = linear_poincare(self.sys, self.points[k], t, self.policy).P
        return self._cache[key]

    def chain(self, k, t, pieces):
        """Consecutive short-time maps whose product is matrix(k, t); canonical
        frames at the joints make the factors compose exactly."""
        tau = t / pieces
        x, out = self.points[k], []
        for _ in range(pieces):
            lp = linear_poincare(self.sys, x, tau, self.policy)
            out.append(lp.P)
            x = lp.frame_dst.x
        return out


@dataclass
class CandidateSplitting:
    subbundle_dims: List[int]
    bases_at: dict
    rates: np.ndarray
    horizon: float

    def block(self, k, i):
        return self.bases_at[k][i]

    @property
    def nblocks(self):
        return len(self.subbundle_dims)


@dataclass
class SplittingReport:
    verdict: str
    scale: float
    worst_product: float
    witness_index: Optional[int]
    block_dims: List[int]
    theta: float = THETA
    kind: str = "domination"
    notes: List[str] = field(default_factory=list)
    parts: List["SplittingReport"] = field(default_factory=list)

    @property
    def holds(self):
        return self.verdict == "holds"

    def to_report(self):
        out = {"verdict": self.verdict, "scale": float(self.scale),
               "worst_product": float(self.worst_product), "witness_index": self.witness_index,
               "block_dims": [int(d) for d in self.block_dims], "theta": float(self.theta),
               "kind": self.kind, "notes": list(self.notes)}
        if self.parts:
            out["parts"] = [p.to_report() for p in self.parts]
        return out


# ------------------------------------------------------------- estimation

def _group(rates, gap_tol):
    cuts = [0]
    for a in range(1, rates.size):
        if rates[a - 1] - rates[a] > gap_tol:
            cuts.append(a)
    cuts.append(rates.size)
    return [cuts[b + 1] - cuts[b] for b in range(len(cuts) - 1)]


def _intersection(E, S, d):
    if d == 0:
        return np.zeros((E.shape[0], 0))
    u, _, _ = np.linalg.svd(E.T @ S)
    return E @ u[:, :d]


def _qr_sweep(mats, z, adjoint):
    logs = np.zeros(z.shape[1])
    for M in (reversed(mats) if adjoint else mats):
        q, r = np.linalg.qr((M.T if adjoint else M) @ z)
        d = np.diag(r)
        z = q * np.where(d < 0, -1.0, 1.0)
        logs += np.log(np.abs(d))
    return z, logs


def _right_singular(mats, start):
    """Right singular frame and log singular values of mats[-1] ... mats[0].

    A forward QR sweep yields the left singular frame at the far end; the
    adjoint sweep started from it returns the right singular frame (fast
    columns first) with log sigma on the R diagonal. Working one factor at
    a time keeps every column resolved however ill-conditioned the
    product is.
    """
    left, _ = _qr_sweep(mats, start, adjoint=False)
    return _qr_sweep(mats, left, adjoint=True)


def _start_frame(d):
    q, _ = np.linalg.qr(np.random.default_rng(20240531).normal(size=(d, d)))
    return q


def estimate_splitting(cocycle, horizon=20.0, dims=None, gap_tol=1e-8, piece=1.0):
    """Finite-time Oseledets blocks from singular subspaces of P(+-horizon).

    Block i is the part of the backward-fast subspace (rates of blocks
    0..i) lying in the forward-slow subspace (rates of blocks i..end).
    Both subspaces come from QR iteration over unit-length pieces of the
    cocycle, which keeps them accurate when P(horizon) is badly
    conditioned. Without ``dims`` the rates at sample 0 are grouped
    wherever consecutive rates differ by more than ``gap_tol``.
    """
    if horizon <= 0:
        raise InputError("horizon must be positive")
    d = cocycle.dim
    pieces = max(1, int(np.ceil(horizon / piece - 1e-9)))
    start = _start_frame(d)
    fwd0, logs = _right_singular(cocycle.chain(0, horizon, pieces), start)
    rates = logs / horizon
    if dims is None:
        dims = _group(rates, gap_tol)
        if len(dims) < 2:
            raise RankCollapse("finite-time rates are not separated; no splitting")
    else:
        dims = [int(v) for v in dims]
        if sum(dims) != d or any(v < 0 for v in dims):
            raise InputError(f"block dims must be non-negative and sum to {d}")
        for e in np.cumsum(dims)[:-1]:
            if 0 < e < d and rates[e - 1] - rates[e] <= gap_tol:
                raise RankCollapse(f"no rate gap at block boundary {int(e)}")
    ends = np.cumsum(dims)
    starts = ends - np.array(dims)
    bases = {}
    for k in range(cocycle.nsamples):
        fwd = fwd0 if k == 0 else _right_singular(cocycle.chain(k, horizon, pieces), start)[0]
        back = _right_singular(cocycle.chain(k, -horizon, pieces), start)[0][:, ::-1]
        blocks = []
        for i in range(len(dims)):
            blocks.append(_intersection(back[:, :ends[i]], fwd[:, starts[i]:], dims[i]))
        bases[k] = blocks
    return CandidateSplitting(subbundle_dims=list(dims), bases_at=bases, rates=rates,
                              horizon=float(horizon))


def refine_by_mirror(cocycle, split):
    """Three blocks (d, total - 2d, d) from a two-block split, d = min dims."""
    if split.nblocks != 2:
        raise InputError("mirror refinement needs a two-block splitting")
    m = min(split.subbundle_dims)
    total = sum(split.subbundle_dims)
    return estimate_splitting(cocycle, split.horizon, dims=[m, total - 2 * m, m])


# ------------------------------------------------------------------ checks

def _sv(M):
    if M.shape[1] == 0:
        return np.array([0.0])
    return np.linalg.svd(M, compute_uv=False)


def _verdict(value, theta, slack):
    return "holds" if value <= theta + slack else "fails"


def _scan(cocycle, ell, fn):
    worst, witness = -np.inf, None
    for k in range(cocycle.nsamples):
        v = fn(cocycle.matrix(k, ell), k)
        if v > worst:
            worst, witness = v, k
    return float(worst), witness


def domination_check(cocycle, split, i, j, ell, theta=THETA, slack=SLACK):
    """sup over samples of |Phi^ell on N^i| * |Phi^-ell on N^j at the image|.

    Block j is the dominating one. With an invariant N^j the backward norm
    equals 1 / sigma_min(P B_j).
    """
    if ell <= 0:
        raise InputError("scale must be positive")
    if i == j or not (0 <= i < split.nblocks and 0 <= j < split.nblocks):
        raise InputError("domination needs two distinct block indices")

    def product(P, k):
        return _sv(P @ split.block(k, i))[0] / _sv(P @ split.block(k, j))[-1]

    worst, witness = _scan(cocycle, ell, product)
    return SplittingReport(verdict=_verdict(worst, theta, slack), scale=float(ell),
                           worst_product=worst, witness_index=witness,
                           block_dims=split.subbundle_dims, theta=theta,
                           notes=[SAMPLE_NOTE])


def _contraction(cocycle, split, b, ell, theta, slack, kind):
    def norm(P, k):
        return _sv(P @ split.block(k, b))[0]
    worst, witness = _scan(cocycle, ell, norm)
    return SplittingReport(verdict=_verdict(worst, theta, slack), scale=float(ell),
                           worst_product=worst, witness_index=witness,
                           block_dims=split.subbundle_dims, theta=theta, kind=kind)


def _expansion(cocycle, split, b, ell, theta, slack, kind):
    def back_norm(P, k):
        return 1.0 / _sv(P @ split.block(k, b))[-1]
    worst, witness = _scan(cocycle, ell, back_norm)
    return SplittingReport(verdict=_verdict(worst, theta, slack), scale=float(ell),
                           worst_product=worst, witness_index=witness,
                           block_dims=split.subbundle_dims, theta=theta, kind=kind)


def _aggregate(parts, ell, split, theta, kind, notes):
    worst = max(parts, key=lambda r: r.worst_product)
    verdict = "holds" if all(p.holds for p in parts) else "fails"
    failing = [p for p in parts if not p.holds]
    witness = (failing[0] if failing else worst).witness_index
    return SplittingReport(verdict=verdict, scale=float(ell), worst_product=worst.worst_product,
                           witness_index=witness, block_dims=split.subbundle_dims, theta=theta,
                           kind=kind, notes=[SAMPLE_NOTE] + notes, parts=parts)


def hyperbolicity_check(cocycle, split, ell, theta=THETA, slack=SLACK):
    """Two blocks ordered (N^u, N^s): contraction of N^s forward and of N^u backward."""
    if split.nblocks != 2:
        raise InputError("hyperbolicity check needs exactly two blocks")
    parts = [_expansion(cocycle, split, 0, ell, theta, slack, "expansion"),
             _contraction(cocycle, split, 1, ell, theta, slack, "contraction")]
    return _aggregate(parts, ell, split, theta, "hyperbolicity", [])


def partial_hyperbolicity_check(cocycle, split, ell, theta=THETA, slack=SLACK, refine=True):
    """Blocks (N^u, N^c, N^s): N^u expands, N^s contracts, N^u dominates N^c
    and N^c dominates N^s. A two-block input is refined by mirror dimension
    when ``refine`` is set; a trivial centre means the Anosov case."""
    notes = []
    if split.nblocks == 2 and refine:
        split = refine_by_mirror(cocycle, split)
        notes.append(MIRROR_NOTE)
    if split.nblocks != 3:
        raise InputError("partial hyperbolicity needs three blocks (u, c, s)")
    if sum(1 for v in split.subbundle_dims if v > 0) < 2:
        raise InputError("at least two blocks must be non-trivial")
    parts = [_expansion(cocycle, split, 0, ell, theta, slack, "expansion"),
             _contraction(cocycle, split, 2, ell, theta, slack, "contraction")]
    if split.subbundle_dims[1] == 0:
        notes.append("trivial centre: Anosov case")
    else:
        parts.append(domination_check(cocycle, split, 1, 0, ell, theta, slack))
        parts.append(domination_check(cocycle, split, 2, 1, ell, theta, slack))
    return _aggregate(parts, ell, split, theta, "partial-hyperbolicity", notes)


def min_domination_scale(cocycle, split, i, j, grid, theta=THETA, slack=SLACK):
    """Smallest grid scale at which block j dominates block i, or None."""
    return min_scale(lambda ell: domination_check(cocycle, split, i, j, ell, theta, slack), grid)


def min_scale(check, grid):
    grid = np.asarray(grid, dtype=float)
    if grid.size and (np.any(grid <= 0) or np.any(np.diff(grid) <= 0)):
        raise InputError("scale grid must be positive and increasing")
    for ell in grid:
        if check(float(ell)).holds:
            return float(ell)
    return None
